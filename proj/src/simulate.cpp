#include <kdm/simulate.hpp>
#include <kdm/parallel.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace kdm {

std::string_view to_string(Distribution d) {
  switch (d) {
    case Distribution::IndependentClouds: return "independent-clouds";
    case Distribution::W: return "w";
    case Distribution::Diamond: return "diamond";
    case Distribution::Parabola: return "parabola";
    case Distribution::TwoParabola: return "two-parabola";
    case Distribution::Circle: return "circle";
    case Distribution::Variance: return "variance";
    case Distribution::Log: return "log";
  }
  return "unknown";
}

Distribution parse_distribution(std::string_view name) {
  std::string key;
  for (char ch : name) {
    if (ch == '-' || ch == '_' || ch == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  for (Distribution d : kAllDistributions) {
    std::string canon;
    for (char ch : to_string(d))
      if (ch != '-') canon.push_back(ch);
    if (key == canon) return d;
  }
  if (key == "clouds" || key == "independent") return Distribution::IndependentClouds;
  throw std::invalid_argument("unknown distribution '" + std::string(name) + "'");
}

double default_constant(Distribution d) {
  switch (d) {
    case Distribution::Circle: return 4.2;
    case Distribution::Diamond: return 0.5;
    default: return 1.0;
  }
}

JointDataset sample_distribution(Distribution d, Index n, std::optional<double> c_opt, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_distribution: n must be >= 1");
  const double c = c_opt.value_or(default_constant(d));
  if (!std::isfinite(c)) throw std::invalid_argument("sample_distribution: constant must be finite");
  if (d == Distribution::Diamond && (c < 0.0 || c > 1.0))
    throw std::invalid_argument("sample_distribution: the diamond mixing probability must lie in [0, 1]");

  std::mt19937_64 rng(mix_seed(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  auto sign = [&] { return unit(rng) < 0.5 ? -1.0 : 1.0; };

  JointDataset out{Matrix(n, 1), Matrix(n, 1)};
  const double pi = std::numbers::pi;
  for (Index i = 0; i < n; ++i) {
    double x = 0.0;
    double y = 0.0;
    switch (d) {
      case Distribution::IndependentClouds: {
        const double x0 = sign();
        const double y0 = sign();
        x = x0 + normal(rng);
        y = y0 + normal(rng);
        break;
      }
      case Distribution::W: {
        x = sym(rng);
        const double t = x * x - 0.5;
        y = c * t * t + unit(rng);
        break;
      }
      case Distribution::Diamond: {
        const double u = sym(rng);
        const double v = sym(rng);
        const double u2 = sym(rng);
        const double v2 = sym(rng);
        const double e = unit(rng);
        const double s = std::sin(pi / 4.0);
        const double co = std::cos(pi / 4.0);
        if (e < c) {
          x = u * co + v * s;
          y = -u * co + v * s;
        } else {
          x = u2;
          y = v2;
        }
        break;
      }
      case Distribution::Parabola:
        x = sym(rng);
        y = c * x * x + unit(rng);
        break;
      case Distribution::TwoParabola: {
        x = sym(rng);
        const double e = unit(rng);
        y = (c * x * x + e) * sign();
        break;
      }
      case Distribution::Circle: {
        const double u = sym(rng);
        x = c * std::sin(2.0 * pi * u) + normal(rng);
        y = 4.2 * std::cos(2.0 * pi * u) + normal(rng);
        break;
      }
      case Distribution::Variance:
        x = normal(rng);
        y = normal(rng) * std::sqrt(c * x * x + 1.0);
        break;
      case Distribution::Log:
        x = normal(rng);
        y = c * std::log(x * x) + normal(rng);
        break;
    }
    out.x(i, 0) = x;
    out.y(i, 0) = y;
  }
  return out;
}

Matrix random_correlation(Index dim, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("random_correlation: dim must be >= 1");
  std::mt19937_64 rng(mix_seed(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) a(i, j) = normal(rng);
  Matrix g = a * a.transpose();
  const Vector inv_sd = g.diagonal().cwiseSqrt().cwiseInverse();
  g = inv_sd.asDiagonal() * g * inv_sd.asDiagonal();
  g = 0.5 * (g + g.transpose()).eval();
  g.diagonal().setOnes();
  return g;
}

MixtureParams draw_mixture_params(const MixtureConfig& config, std::uint64_t seed) {
  if (config.clusters < 1) throw std::invalid_argument("mixture: clusters must be >= 1");
  if (config.dim_x < 1 || config.dim_y < 1) throw std::invalid_argument("mixture: block dimensions must be >= 1");
  if (!(config.mean_range >= 0.0)) throw std::invalid_argument("mixture: mean_range must be >= 0");
  const Index dim = config.dim_x + config.dim_y;
  std::mt19937_64 rng(mix_seed(seed));
  std::uniform_real_distribution<double> mean_dist(-config.mean_range, config.mean_range);
  std::exponential_distribution<double> expo(1.0);

  MixtureParams p;
  p.weights.resize(config.clusters);
  for (int j = 0; j < config.clusters; ++j) {
    p.correlations.push_back(random_correlation(dim, rng()));
    Vector mu(dim);
    for (Index k = 0; k < dim; ++k) mu(k) = config.mean_range > 0.0 ? mean_dist(rng) : 0.0;
    p.means.push_back(std::move(mu));
    p.weights(j) = expo(rng);
  }
  p.weights /= p.weights.sum();
  return p;
}

int select_component(const Vector& weights, double u) {
  double cumulative = 0.0;
  for (Index j = 0; j < weights.size(); ++j) {
    cumulative += weights(j);
    if (cumulative >= u) return static_cast<int>(j);
  }
  return static_cast<int>(weights.size() - 1);  // roundoff in the last partial sum
}

MixtureSample sample_mixture(const MixtureParams& params, Index dim_x, Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_mixture: n must be >= 1");
  if (params.means.empty() || params.means.size() != params.correlations.size() ||
      static_cast<Index>(params.means.size()) != params.weights.size())
    throw std::invalid_argument("sample_mixture: inconsistent mixture parameters");
  const Index dim = params.means.front().size();
  if (dim_x < 1 || dim_x >= dim) throw std::invalid_argument("sample_mixture: dim_x out of range");

  std::vector<Matrix> factors;
  for (const Matrix& corr : params.correlations) {
    // Symmetric square root; tolerates rank-deficient matrices.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(corr);
    if (eig.info() != Eigen::Success) throw NumericError("sample_mixture: eigendecomposition failed");
    factors.push_back(eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                      eig.eigenvectors().transpose());
  }

  std::mt19937_64 rng(mix_seed(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MixtureSample out;
  out.data.x.resize(n, dim_x);
  out.data.y.resize(n, dim - dim_x);
  out.labels.resize(static_cast<std::size_t>(n));
  Vector e(dim);
  for (Index t = 0; t < n; ++t) {
    const int j = select_component(params.weights, unit(rng));
    for (Index k = 0; k < dim; ++k) e(k) = normal(rng);
    const Vector z = params.means[static_cast<std::size_t>(j)] + factors[static_cast<std::size_t>(j)] * e;
    out.data.x.row(t) = z.head(dim_x).transpose();
    out.data.y.row(t) = z.tail(dim - dim_x).transpose();
    out.labels[static_cast<std::size_t>(t)] = j;
  }
  return out;
}

JointDataset sample_gaussian_mixture(const MixtureConfig& config, Index n, std::uint64_t seed) {
  const MixtureParams params = draw_mixture_params(config, stream_seed(seed, 0));
  return sample_mixture(params, config.dim_x, n, stream_seed(seed, 1)).data;
}

}  // namespace kdm

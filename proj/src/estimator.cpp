#include <kdm/estimator.hpp>
#include <kdm/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace kdm {

std::string_view to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::Zero: return "zero";
    case PriorKind::One: return "one";
    case PriorKind::Custom: return "custom";
  }
  return "unknown";
}

PriorKind parse_prior_kind(std::string_view name) {
  if (name == "zero") return PriorKind::Zero;
  if (name == "one") return PriorKind::One;
  if (name == "custom") return PriorKind::Custom;
  throw std::invalid_argument("unknown prior '" + std::string(name) + "'");
}

PriorSpec PriorSpec::from_function(std::function<double(const PointRef&)> f, double pi_inf) {
  if (!f) throw std::invalid_argument("custom prior requires an evaluator");
  if (!(pi_inf >= 0.0)) throw std::invalid_argument("prior bound pi_inf must be nonnegative");
  return {PriorKind::Custom, std::move(f), pi_inf};
}

double PriorSpec::operator()(const PointRef& z) const {
  switch (kind) {
    case PriorKind::Zero: return 0.0;
    case PriorKind::One: return 1.0;
    case PriorKind::Custom:
      if (!custom) throw std::invalid_argument("custom prior has no evaluator");
      return custom(z);
  }
  return 0.0;
}

Vector PriorSpec::evaluate(const Matrix& points) const {
  switch (kind) {
    case PriorKind::Zero: return Vector::Zero(points.rows());
    case PriorKind::One: return Vector::Ones(points.rows());
    case PriorKind::Custom: break;
  }
  Vector out(points.rows());
  for (Index i = 0; i < points.rows(); ++i) out(i) = (*this)(points.row(i));
  return out;
}

namespace {

// Points of `data` in the model's kernel space.
Matrix to_model_space(const std::optional<AffineTransform>& transform, const Dataset& data) {
  if (data.transform || !transform) return data.points;
  return transform->apply(data.points);
}

// Points of `data` in raw (prior) space.
Matrix to_raw_space(const Dataset& data) {
  if (data.transform) return data.transform->invert(data.points);
  return data.points;
}

Matrix raw_to_model(const std::optional<AffineTransform>& transform, const Matrix& raw) {
  return transform ? transform->apply(raw) : raw;
}

void check_transforms(const Dataset& p, const Dataset& q) {
  if (p.transform.has_value() != q.transform.has_value() || (p.transform && !(*p.transform == *q.transform)))
    throw std::invalid_argument("P and Q samples must share the same standardization");
}

}  // namespace

FactorizedSample factorize_sample(const Dataset& sample_p, const Dataset& sample_q, const KernelSpec& kernel,
                                  const FitOptions& options) {
  sample_p.validate();
  sample_q.validate();
  kernel.validate();
  if (sample_p.dim() != sample_q.dim()) throw std::invalid_argument("fit: P and Q samples differ in dimension");
  check_transforms(sample_p, sample_q);

  FactorizedSample out;
  out.kernel = kernel;
  out.transform = sample_p.transform;
  out.n = std::min(sample_p.size(), sample_q.size());
  if (sample_p.size() != sample_q.size())
    out.warnings.push_back("unequal sample sizes (" + std::to_string(sample_p.size()) + " vs " +
                           std::to_string(sample_q.size()) + "), truncated to " + std::to_string(out.n));

  const Index n = out.n;
  out.stacked.resize(2 * n, sample_p.dim());
  out.stacked.topRows(n) = sample_p.points.topRows(n);
  out.stacked.bottomRows(n) = sample_q.points.topRows(n);

  const KernelColumnOracle oracle(kernel, out.stacked);
  CholeskyOptions copt;
  copt.epsilon = options.epsilon_abs ? *options.epsilon_abs : relative_tolerance(oracle, options.epsilon_rel);
  copt.strategy = options.strategy;
  copt.max_rank = options.max_rank;
  copt.omp_quantile = options.omp_quantile;
  copt.omp_target = options.omp_target;
  out.factors = pivoted_cholesky(oracle, copt);
  if (out.factors.rank_capped)
    out.warnings.push_back("rank cap " + std::to_string(options.max_rank) + " reached before tolerance");
  return out;
}

Vector moment_difference(const Matrix& L_P, const Matrix& L_Q, const Vector& p_star) {
  if (L_P.rows() != L_Q.rows() || L_P.cols() != L_Q.cols() || p_star.size() != L_P.rows())
    throw std::invalid_argument("moment_difference: block sizes disagree");
  Eigen::RowVectorXd sum_q = Eigen::RowVectorXd::Zero(L_Q.cols());
  Eigen::RowVectorXd sum_p = Eigen::RowVectorXd::Zero(L_P.cols());
  for (Index r = 0; r < L_Q.rows(); ++r) {
    sum_q += L_Q.row(r);
    sum_p += p_star(r) * L_P.row(r);
  }
  return (sum_q - sum_p).transpose();
}

KdmModel solve_model(const FactorizedSample& sample, double lambda, const PriorSpec& prior) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("fit: lambda must be positive");
  const Index n = sample.n;
  const Index m = sample.factors.rank();
  const CholeskyFactors& f = sample.factors;

  KdmModel model;
  model.kernel = sample.kernel;
  model.lambda = lambda;
  model.prior = prior;
  model.n = n;
  model.transform = sample.transform;
  model.warnings = sample.warnings;
  model.pivots = f.pivots;
  model.epsilon = f.epsilon;
  model.residual_trace = f.residual_trace;
  model.rank_capped = f.rank_capped;
  model.L_P = f.L.topRows(n);
  model.L_Q = f.L.bottomRows(n);
  model.R = f.R;
  model.pivot_points.resize(m, sample.stacked.cols());
  for (Index j = 0; j < m; ++j) model.pivot_points.row(j) = sample.stacked.row(f.pivots[static_cast<std::size_t>(j)]);

  const Matrix p_raw = sample.transform ? sample.transform->invert(sample.stacked.topRows(n))
                                        : Matrix(sample.stacked.topRows(n));
  model.p_star = prior.evaluate(p_raw);
  if (model.p_star.size() > 0 && model.p_star.cwiseAbs().maxCoeff() > prior.pi_inf) {
    model.prior_bound_violated = true;
    model.warnings.push_back("prior exceeds its declared bound pi_inf on the P sample");
  }

  const Dataset stacked_ds(sample.stacked);
  const KernelSup sup = kernel_sup(sample.kernel, &stacked_ds);
  model.kappa_inf = sup.value;
  model.kappa_empirical = sup.empirical;
  if (sup.empirical) model.warnings.push_back("kernel is unbounded; kappa_inf is the maximum over training data");

  const Vector rhs = moment_difference(model.L_P, model.L_Q, model.p_star);
  Matrix system = model.L_P.transpose() * model.L_P;
  system.diagonal().array() += static_cast<double>(n) * lambda;
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) throw NumericError("fit: ridge system is not positive definite");
  model.coordinates = llt.solve(rhs);
  model.beta = model.R * model.coordinates;
  if (!model.beta.allFinite()) throw NumericError("fit: non-finite coefficients");
  return model;
}

KdmModel fit(const Dataset& sample_p, const Dataset& sample_q, const KernelSpec& kernel, double lambda,
             const PriorSpec& prior, const FitOptions& options) {
  if (!(lambda > 0.0)) throw std::invalid_argument("fit: lambda must be positive");
  return solve_model(factorize_sample(sample_p, sample_q, kernel, options), lambda, prior);
}

FullRankFit fit_full(const Dataset& sample_p, const Dataset& sample_q, const KernelSpec& kernel, double lambda,
                     const PriorSpec& prior) {
  sample_p.validate();
  sample_q.validate();
  kernel.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("fit_full: lambda must be positive");
  if (sample_p.dim() != sample_q.dim()) throw std::invalid_argument("fit_full: dimension mismatch");
  check_transforms(sample_p, sample_q);
  const Index n = std::min(sample_p.size(), sample_q.size());
  if (2 * n > kFullRankMaxPoints) throw std::invalid_argument("fit_full: sample too large to materialize K");

  FullRankFit out;
  out.kernel = kernel;
  out.n = n;
  out.transform = sample_p.transform;
  out.points.resize(2 * n, sample_p.dim());
  out.points.topRows(n) = sample_p.points.topRows(n);
  out.points.bottomRows(n) = sample_q.points.topRows(n);

  // With h = sum_i c_i k(., z_i), the first-order condition reduces to
  //   c_Q = 1 / (n lambda),   (K_PP + n lambda) c_P = -p_star - K_PQ c_Q.
  const double nl = static_cast<double>(n) * lambda;
  const Matrix K = cross_kernel_matrix(kernel, out.points, out.points);
  const Matrix p_raw = out.transform ? out.transform->invert(out.points.topRows(n)) : Matrix(out.points.topRows(n));
  const Vector p_star = prior.evaluate(p_raw);
  const Vector c_q = Vector::Constant(n, 1.0 / nl);
  Matrix system = K.topLeftCorner(n, n);
  system.diagonal().array() += nl;
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) throw NumericError("fit_full: system is not positive definite");
  out.coefficients.resize(2 * n);
  out.coefficients.head(n) = llt.solve(-p_star - K.topRightCorner(n, n) * c_q);
  out.coefficients.tail(n) = c_q;
  return out;
}

double eval_h(const KdmModel& model, const PointRef& z) {
  if (z.size() != model.dim()) throw std::invalid_argument("eval_h: dimension mismatch");
  const Eigen::RowVectorXd x = model.transform ? model.transform->apply(z) : Eigen::RowVectorXd(z);
  double s = 0.0;
  for (Index j = 0; j < model.rank(); ++j) s += model.beta(j) * eval_kernel(model.kernel, x, model.pivot_points.row(j));
  return s;
}

Vector eval_h(const KdmModel& model, const Matrix& points) {
  if (points.cols() != model.dim()) throw std::invalid_argument("eval_h: dimension mismatch");
  if (model.rank() == 0) return Vector::Zero(points.rows());
  return cross_kernel_matrix(model.kernel, raw_to_model(model.transform, points), model.pivot_points) * model.beta;
}

double eval_h(const FullRankFit& fit, const PointRef& z) {
  if (z.size() != fit.points.cols()) throw std::invalid_argument("eval_h: dimension mismatch");
  const Eigen::RowVectorXd x = fit.transform ? fit.transform->apply(z) : Eigen::RowVectorXd(z);
  double s = 0.0;
  for (Index j = 0; j < fit.points.rows(); ++j)
    s += fit.coefficients(j) * eval_kernel(fit.kernel, x, fit.points.row(j));
  return s;
}

Vector eval_h(const FullRankFit& fit, const Matrix& points) {
  if (points.cols() != fit.points.cols()) throw std::invalid_argument("eval_h: dimension mismatch");
  return cross_kernel_matrix(fit.kernel, raw_to_model(fit.transform, points), fit.points) * fit.coefficients;
}

double eval_density_ratio(const KdmModel& model, const PointRef& z, bool clip) {
  const double g = model.prior(z) + eval_h(model, z);
  return clip ? std::max(0.0, g) : g;
}

Vector eval_density_ratio(const KdmModel& model, const Matrix& points, bool clip) {
  Vector g = model.prior.evaluate(points) + eval_h(model, points);
  if (clip) g = g.cwiseMax(0.0);
  return g;
}

double h_norm(const KdmModel& model) {
  if (model.rank() == 0) return 0.0;
  const Matrix K = cross_kernel_matrix(model.kernel, model.pivot_points, model.pivot_points);
  return std::sqrt(std::max(0.0, model.beta.dot(K * model.beta)));
}

double h_norm_coordinates(const KdmModel& model) { return model.coordinates.norm(); }

double validation_loss(const KdmModel& model, const Dataset& val_p, const Dataset& val_q) {
  if (val_p.size() == 0 || val_q.size() == 0) throw std::invalid_argument("validation_loss: empty validation set");
  if (val_p.dim() != model.dim() || val_q.dim() != model.dim())
    throw std::invalid_argument("validation_loss: dimension mismatch");
  if (model.rank() == 0) return 0.0;
  const Vector h_p =
      cross_kernel_matrix(model.kernel, to_model_space(model.transform, val_p), model.pivot_points) * model.beta;
  const Vector h_q =
      cross_kernel_matrix(model.kernel, to_model_space(model.transform, val_q), model.pivot_points) * model.beta;
  const Vector p_bar = model.prior.evaluate(to_raw_space(val_p));
  const double np = static_cast<double>(val_p.size());
  const double nq = static_cast<double>(val_q.size());
  return -2.0 * (h_q.sum() / nq - p_bar.dot(h_p) / np) + h_p.squaredNorm() / np;
}

std::vector<Candidate> make_grid(const std::vector<KernelSpec>& kernels, const std::vector<double>& lambdas) {
  std::vector<Candidate> grid;
  for (const auto& k : kernels)
    for (double l : lambdas) grid.push_back({k, l});
  return grid;
}

std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross_validate: need at least 2 folds");
  if (n / folds < 2) throw std::invalid_argument("cross_validate: fold size below 2");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(mix_seed(seed));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> label(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    label[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  return label;
}

namespace {

Dataset subset(const Dataset& data, const std::vector<int>& labels, int fold, bool keep) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if ((labels[i] == fold) == keep) rows.push_back(static_cast<Index>(i));
  Dataset out(data.points(rows, Eigen::all), data.seed);
  out.transform = data.transform;
  return out;
}

}  // namespace

CrossValidationResult cross_validate(const Dataset& sample_p, const Dataset& sample_q,
                                     const std::vector<Candidate>& grid, int folds, std::uint64_t seed,
                                     const PriorSpec& prior, const FitOptions& options) {
  if (grid.empty()) throw std::invalid_argument("cross_validate: empty grid");
  const Index n = std::min(sample_p.size(), sample_q.size());
  const std::vector<int> labels = fold_assignment(n, folds, seed);
  Dataset p = sample_p;
  Dataset q = sample_q;
  p.points.conservativeResize(n, Eigen::NoChange);
  q.points.conservativeResize(n, Eigen::NoChange);

  // Consecutive candidates with the same kernel share a factorization.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (groups.empty() || !(grid[groups.back().first].kernel == grid[i].kernel)) groups.push_back({i, i + 1});
    else groups.back().second = i + 1;
  }

  const auto folds_u = static_cast<std::size_t>(folds);
  std::vector<double> losses(grid.size() * folds_u, 0.0);
  parallel_for(static_cast<Index>(groups.size() * folds_u), [&](Index task) {
    const auto g = static_cast<std::size_t>(task) / folds_u;
    const int fold = static_cast<int>(static_cast<std::size_t>(task) % folds_u);
    const Dataset train_p = subset(p, labels, fold, false);
    const Dataset train_q = subset(q, labels, fold, false);
    const Dataset val_p = subset(p, labels, fold, true);
    const Dataset val_q = subset(q, labels, fold, true);
    const FactorizedSample fs = factorize_sample(train_p, train_q, grid[groups[g].first].kernel, options);
    for (std::size_t c = groups[g].first; c < groups[g].second; ++c) {
      const KdmModel model = solve_model(fs, grid[c].lambda, prior);
      losses[c * folds_u + static_cast<std::size_t>(fold)] = validation_loss(model, val_p, val_q);
    }
  });

  CrossValidationResult result;
  result.mean_losses.resize(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    double s = 0.0;
    for (std::size_t f = 0; f < folds_u; ++f) s += losses[c * folds_u + f];
    result.mean_losses[c] = s / static_cast<double>(folds);
  }
  for (std::size_t c = 1; c < grid.size(); ++c)
    if (result.mean_losses[c] < result.mean_losses[result.best_index]) result.best_index = static_cast<Index>(c);
  result.best = grid[static_cast<std::size_t>(result.best_index)];
  return result;
}

}  // namespace kdm

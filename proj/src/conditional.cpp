#include <kdm/conditional.hpp>
#include <kdm/parallel.hpp>

#include <random>

namespace kdm {

void JointDataset::validate() const {
  if (x.rows() != y.rows()) throw std::invalid_argument("joint dataset: x and y row counts differ");
  if (x.rows() < 1 || x.cols() < 1 || y.cols() < 1) throw std::invalid_argument("joint dataset is empty");
  if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("joint dataset contains non-finite entries");
}

Matrix JointDataset::stacked() const {
  Matrix z(x.rows(), x.cols() + y.cols());
  z << x, y;
  return z;
}

std::string_view to_string(SplitScheme scheme) {
  return scheme == SplitScheme::ThreeSplit ? "three-split" : "shifted";
}

SplitScheme parse_split_scheme(std::string_view name) {
  if (name == "three-split" || name == "threesplit" || name == "three") return SplitScheme::ThreeSplit;
  if (name == "shifted" || name == "shift") return SplitScheme::Shifted;
  throw std::invalid_argument("unknown split scheme '" + std::string(name) + "'");
}

std::pair<Dataset, Dataset> split_joint_sample(const JointDataset& joint, SplitScheme scheme) {
  joint.validate();
  const Index rows = joint.size();
  const Index dx = joint.dim_x();
  const Index dy = joint.dim_y();
  Matrix zp;
  Matrix zq;
  if (scheme == SplitScheme::ThreeSplit) {
    if (rows % 3 != 0) throw std::invalid_argument("three-split scheme needs a row count divisible by 3");
    const Index n = rows / 3;
    zp.resize(n, dx + dy);
    zq.resize(n, dx + dy);
    for (Index i = 0; i < n; ++i) {
      // 1-based (x_{2i-1}, y_{2i}) is 0-based (x_{2i}, y_{2i+1})
      zp.row(i) << joint.x.row(2 * i), joint.y.row(2 * i + 1);
      zq.row(i) << joint.x.row(2 * n + i), joint.y.row(2 * n + i);
    }
  } else {
    if (rows < 2) throw std::invalid_argument("shifted scheme needs at least two rows");
    zp.resize(rows, dx + dy);
    zq.resize(rows, dx + dy);
    for (Index i = 0; i < rows; ++i) {
      zp.row(i) << joint.x.row(i), joint.y.row((i + 1) % rows);
      zq.row(i) << joint.x.row(i), joint.y.row(i);
    }
  }
  return {Dataset(std::move(zp)), Dataset(std::move(zq))};
}

Matrix default_y_grid(const JointDataset& joint, Index cap, std::uint64_t seed) {
  const Index n = joint.size();
  if (cap < 1) throw std::invalid_argument("y grid cap must be positive");
  if (n <= cap) return joint.y;
  // Algorithm R reservoir sampling, then restore row order.
  std::vector<Index> keep(static_cast<std::size_t>(cap));
  for (Index i = 0; i < cap; ++i) keep[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(mix_seed(seed));
  for (Index i = cap; i < n; ++i) {
    std::uniform_int_distribution<Index> pick(0, i);
    const Index j = pick(rng);
    if (j < cap) keep[static_cast<std::size_t>(j)] = i;
  }
  std::sort(keep.begin(), keep.end());
  return joint.y(keep, Eigen::all);
}

std::pair<Dataset, Dataset> prepare_samples(const JointDataset& joint, const ConditionalFitOptions& options) {
  auto [p, q] = split_joint_sample(joint, options.scheme);
  if (options.standardize) {
    const AffineTransform t = AffineTransform::zscore(joint.stacked());
    p.points = t.apply(p.points);
    q.points = t.apply(q.points);
    p.transform = t;
    q.transform = t;
  }
  return {std::move(p), std::move(q)};
}

ConditionalModel fit_conditional(const JointDataset& joint, const KernelSpec& kernel, double lambda,
                                 const ConditionalFitOptions& options, const PriorSpec& prior) {
  const auto [p, q] = prepare_samples(joint, options);
  ConditionalModel cm;
  cm.base = fit(p, q, kernel, lambda, prior, options.fit);
  cm.y_grid = default_y_grid(joint, options.y_grid_cap, options.seed);
  cm.scheme = options.scheme;
  cm.dim_x = joint.dim_x();
  return cm;
}

ConditionalWeights normalize_positive_part(const Vector& raw) {
  ConditionalWeights out;
  out.weights = raw.cwiseMax(0.0);
  const double total = out.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    out.weights = Vector::Constant(raw.size(), 1.0 / static_cast<double>(raw.size()));
    out.degenerate = true;
    return out;
  }
  out.weights /= total;
  return out;
}

ConditionalWeights conditional_weights(const ConditionalModel& model, const PointRef& x) {
  if (x.size() != model.dim_x) throw std::invalid_argument("conditional_weights: x dimension mismatch");
  if (model.y_grid.rows() == 0) throw std::invalid_argument("conditional_weights: empty y grid");
  const Index nbar = model.y_grid.rows();
  Matrix points(nbar, model.dim_x + model.dim_y());
  points.leftCols(model.dim_x) = x.replicate(nbar, 1);
  points.rightCols(model.dim_y()) = model.y_grid;
  return normalize_positive_part(eval_density_ratio(model.base, points, false));
}

double conditional_expectation(const ConditionalModel& model, const PointRef& x, const Vector& f_values) {
  if (f_values.size() != model.y_grid.rows())
    throw std::invalid_argument("conditional_expectation: f values must align with the y grid");
  return conditional_weights(model, x).weights.dot(f_values);
}

ConditionalMoments weighted_moments(const Matrix& points, const Vector& weights) {
  if (points.rows() != weights.size()) throw std::invalid_argument("weighted_moments: length mismatch");
  ConditionalMoments m;
  m.mean = points.transpose() * weights;
  const Matrix centered = points.rowwise() - m.mean.transpose();
  m.covariance = centered.transpose() * weights.asDiagonal() * centered;
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
  return m;
}

ConditionalMoments conditional_moments(const ConditionalModel& model, const PointRef& x) {
  const ConditionalWeights w = conditional_weights(model, x);
  ConditionalMoments m = weighted_moments(model.y_grid, w.weights);
  m.degenerate = w.degenerate;
  return m;
}

}  // namespace kdm

#include <kdm/studies.hpp>
#include <kdm/metrics.hpp>
#include <kdm/parallel.hpp>

#include <algorithm>
#include <atomic>
#include <mutex>

namespace kdm {

double ks_uniform(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("ks_uniform: no values");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

ReplicationOutcome independence_replication(const IndependenceConfig& config, int replication) {
  if (config.n < 2) throw std::invalid_argument("independence study: n must be >= 2");
  const std::uint64_t seed = stream_seed(config.seed, static_cast<std::uint64_t>(replication));
  ConditionalFitOptions split;
  split.scheme = SplitScheme::ThreeSplit;
  split.standardize = true;
  const JointDataset joint = sample_distribution(config.distribution, 3 * config.n, config.constant, seed);
  const auto [p, q] = prepare_samples(joint, split);
  const KdmModel model = fit(p, q, config.kernel, config.lambda, PriorSpec::one(), config.fit);
  const TestResult result = run_test(model, config.truncation, config.eta);

  ReplicationOutcome out;
  out.statistic = result.statistic;
  out.ell = result.ell;
  out.p_value = result.p_value;
  out.rank = model.rank();
  if (result.bound_check) out.bound_satisfied = result.bound_check->satisfied;
  return out;
}

IndependenceSummary run_independence_study(const IndependenceConfig& config, const std::function<void(int)>& progress) {
  if (config.replications < 1) throw std::invalid_argument("independence study: replications must be >= 1");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw std::invalid_argument("independence study: alpha in (0, 1)");
  IndependenceSummary s;
  s.config = config;
  s.outcomes.resize(static_cast<std::size_t>(config.replications));
  std::atomic<int> done{0};
  std::mutex report;
  parallel_for(config.replications, [&](Index r) {
    s.outcomes[static_cast<std::size_t>(r)] = independence_replication(config, static_cast<int>(r));
    const int finished = ++done;
    if (progress) {
      const std::lock_guard<std::mutex> lock(report);
      progress(finished);
    }
  });

  std::vector<double> pvals;
  int rejected = 0;
  int bound_ok = 0;
  for (const ReplicationOutcome& o : s.outcomes) {
    pvals.push_back(o.p_value);
    if (o.p_value < config.alpha) ++rejected;
    if (o.bound_satisfied.value_or(false)) ++bound_ok;
  }
  const double reps = static_cast<double>(config.replications);
  s.rejection_rate = rejected / reps;
  s.ks_distance = ks_uniform(pvals);
  if (config.eta) s.bound_rate = bound_ok / reps;
  return s;
}

double energy_score_pairwise(const Vector& y, const Matrix& xs, const Vector& weights, const Matrix& distances) {
  const Index m = xs.rows();
  if (weights.size() != m || distances.rows() != m || distances.cols() != m || xs.cols() != y.size())
    throw std::invalid_argument("energy_score_pairwise: dimension mismatch");
  const Vector to_y = (xs.rowwise() - y.transpose()).rowwise().norm();
  const double md = static_cast<double>(m);
  return weights.dot(to_y) / md - 0.5 * weights.dot(distances * weights) / (md * md);
}

MixtureRunOutcome mixture_run(const MixtureStudyConfig& config, int run) {
  if (config.n < 2 || config.n_test < 1) throw std::invalid_argument("mixture study: n >= 2 and n_test >= 1");
  const std::uint64_t seed = stream_seed(config.seed, static_cast<std::uint64_t>(run));
  MixtureConfig mc;
  mc.clusters = config.clusters.value_or(1 + run % 3);
  const MixtureParams params = draw_mixture_params(mc, stream_seed(seed, 0));
  const Index n = config.n;
  const JointDataset all = sample_mixture(params, mc.dim_x, 3 * n + config.n_test, stream_seed(seed, 1)).data;

  // Q takes rows 1..n; P pairs x from rows n+1..2n with y from rows 2n+1..3n.
  Matrix zq(n, 4);
  Matrix zp(n, 4);
  zq << all.x.topRows(n), all.y.topRows(n);
  zp << all.x.middleRows(n, n), all.y.middleRows(2 * n, n);
  Matrix train(3 * n, 4);
  train << all.x.topRows(3 * n), all.y.topRows(3 * n);
  const AffineTransform t = AffineTransform::zscore(train);
  Dataset p(t.apply(zp));
  Dataset q(t.apply(zq));
  p.transform = t;
  q.transform = t;

  std::vector<KernelSpec> kernels;
  for (double rho : config.rhos) kernels.push_back(KernelSpec::gaussian(rho));
  const std::vector<Candidate> grid = make_grid(kernels, config.lambdas);
  const CrossValidationResult cv =
      cross_validate(p, q, grid, config.folds, stream_seed(seed, 2), PriorSpec::one(), config.fit);

  ConditionalModel cm;
  cm.base = fit(p, q, cv.best.kernel, cv.best.lambda, PriorSpec::one(), config.fit);
  cm.dim_x = mc.dim_x;
  cm.y_grid = default_y_grid(JointDataset{all.x.topRows(n), all.y.topRows(n)}, config.grid_cap, stream_seed(seed, 3));

  const Index m = cm.y_grid.rows();
  Matrix distances(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) distances(i, j) = (cm.y_grid.row(i) - cm.y_grid.row(j)).norm();
  const Vector uniform = Vector::Ones(m);

  std::vector<double> base(static_cast<std::size_t>(config.n_test));
  std::vector<double> kdm(static_cast<std::size_t>(config.n_test));
  parallel_for(config.n_test, [&](Index k) {
    const Index row = 3 * n + k;
    const Vector y = all.y.row(row).transpose();
    const Vector w = conditional_weights(cm, all.x.row(row)).weights * static_cast<double>(m);
    kdm[static_cast<std::size_t>(k)] = energy_score_pairwise(y, cm.y_grid, w, distances);
    base[static_cast<std::size_t>(k)] = energy_score_pairwise(y, cm.y_grid, uniform, distances);
  });

  MixtureRunOutcome out;
  out.clusters = mc.clusters;
  out.differential = score_differential(base, kdm);
  out.selected = cv.best;
  out.rank = cm.base.rank();
  return out;
}

MixtureSummary run_mixture_study(const MixtureStudyConfig& config, const std::function<void(int)>& progress) {
  if (config.runs < 1) throw std::invalid_argument("mixture study: runs must be >= 1");
  MixtureSummary s;
  s.config = config;
  s.outcomes.resize(static_cast<std::size_t>(config.runs));
  // Runs are sequential; each run parallelizes its own cross-validation and scoring.
  std::vector<double> diffs;
  for (int r = 0; r < config.runs; ++r) {
    s.outcomes[static_cast<std::size_t>(r)] = mixture_run(config, r);
    diffs.push_back(s.outcomes[static_cast<std::size_t>(r)].differential);
    if (progress) progress(r + 1);
  }
  s.median_differential = median(diffs);
  return s;
}

}  // namespace kdm

#include "commands.hpp"

#include <kdm/conditional.hpp>
#include <kdm/estimator.hpp>
#include <kdm/hypothesis.hpp>
#include <kdm/io.hpp>
#include <kdm/metrics.hpp>
#include <kdm/parallel.hpp>
#include <kdm/simulate.hpp>
#include <kdm/studies.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>

namespace kdm::cli {

using nlohmann::json;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void log(const std::string& msg) { std::cerr << "kdm: " << msg << "\n"; }

void log_done(const Stopwatch& sw) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "done in %.2f s", sw.seconds());
  log(buf);
}

std::string command_path(const CLI::App* cmd) {
  std::string path = cmd->get_name();
  for (const CLI::App* p = cmd->get_parent(); p && p->get_parent(); p = p->get_parent()) path = p->get_name() + " " + path;
  return path;
}

json provenance(const RunContext& ctx, std::optional<std::uint64_t> seed) {
  return {{"command", command_path(ctx.command)},
          {"config", config_echo(ctx)},
          {"seed", seed ? json(*seed) : json(nullptr)},
          {"version", kVersion}};
}

void write_json(const std::string& path, const json& j, bool force) { io::write_text(path, j.dump(2) + "\n", force); }

// CSV artifacts carry their provenance in a JSON sidecar next to them.
void write_csv_artifact(const std::string& path, const std::vector<std::string>& header, const Matrix& data,
                        json sidecar, bool force) {
  const std::string side = path + ".json";
  io::ensure_writable(path, force);
  io::ensure_writable(side, force);
  io::write_text(path, io::format_csv(header, data), true);
  write_json(side, sidecar, true);
}

KernelSpec make_kernel(const KernelFlags& k, double rho) {
  KernelSpec spec;
  spec.family = parse_kernel_family(k.family);
  spec.rho = rho;
  spec.c = k.c;
  spec.q = k.degree;
  spec.validate();
  return spec;
}

std::vector<Candidate> make_candidates(const KernelFlags& k, const std::vector<double>& lambdas) {
  if (k.rho.empty() || lambdas.empty()) throw std::invalid_argument("kernel and lambda grids must be nonempty");
  std::vector<KernelSpec> kernels;
  if (parse_kernel_family(k.family) == KernelFamily::Polynomial) {
    kernels.push_back(make_kernel(k, 1.0));
  } else {
    for (double rho : k.rho) kernels.push_back(make_kernel(k, rho));
  }
  return make_grid(kernels, lambdas);
}

PriorSpec make_prior(const std::string& name) {
  switch (parse_prior_kind(name)) {
    case PriorKind::Zero: return PriorSpec::zero();
    case PriorKind::One: return PriorSpec::one();
    case PriorKind::Custom: break;
  }
  throw std::invalid_argument("custom priors are only available through the library API");
}

std::pair<Dataset, Dataset> load_samples(const FitFlags& f) {
  Dataset p = io::ingest_csv(f.p, f.pcols);
  Dataset q = io::ingest_csv(f.q, f.qcols);
  if (p.dim() != q.dim()) throw std::invalid_argument("P and Q samples have different column counts");
  if (f.standardize) {
    Matrix pooled(p.size() + q.size(), p.dim());
    pooled << p.points, q.points;
    const AffineTransform t = AffineTransform::zscore(pooled);
    p.points = t.apply(p.points);
    q.points = t.apply(q.points);
    p.transform = t;
    q.transform = t;
  }
  return {std::move(p), std::move(q)};
}

FitOptions fit_options(double epsilon_rel, int max_rank) {
  FitOptions o;
  o.epsilon_rel = epsilon_rel;
  o.max_rank = max_rank;
  return o;
}

json candidate_json(const Candidate& c) { return {{"kernel", io::to_json(c.kernel)}, {"lambda", c.lambda}}; }

json model_summary(const KdmModel& m) {
  return {{"n", m.n},
          {"rank", m.rank()},
          {"kernel", io::to_json(m.kernel)},
          {"lambda", m.lambda},
          {"prior", std::string(to_string(m.prior.kind))},
          {"epsilon", m.epsilon},
          {"residual_trace", m.residual_trace},
          {"rank_capped", m.rank_capped},
          {"kappa_inf", m.kappa_inf},
          {"h_norm", h_norm_coordinates(m)},
          {"warnings", m.warnings}};
}

void report_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) log("warning: " + w);
}

}  // namespace

json config_echo(const RunContext& ctx) {
  json echo = json::object();
  for (const CLI::Option* opt : ctx.command->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const std::vector<std::string>& r = opt->results();
      echo[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      echo[name] = opt->get_default_str();
    }
  }
  return echo;
}

void run_fit(const FitFlags& f, const RunContext& ctx) {
  const Stopwatch sw;
  io::ensure_writable(f.out, ctx.force);
  const auto [p, q] = load_samples(f);
  const KdmModel model = fit(p, q, make_kernel(f.kernel, f.kernel.rho.front()), f.lambda.front(), make_prior(f.prior),
                             fit_options(f.epsilon_rel, f.max_rank));
  report_warnings(model.warnings);
  json prov = provenance(ctx, std::nullopt);
  prov["summary"] = model_summary(model);
  io::save_model(f.out, model, ctx.force, prov);
  log("fitted rank " + std::to_string(model.rank()) + " model on n = " + std::to_string(model.n));
  log_done(sw);
}

void run_cv(const FitFlags& f, const RunContext& ctx) {
  const Stopwatch sw;
  io::ensure_writable(f.out, ctx.force);
  if (!f.model_out.empty()) io::ensure_writable(f.model_out, ctx.force);
  const auto [p, q] = load_samples(f);
  const std::vector<Candidate> grid = make_candidates(f.kernel, f.lambda);
  const PriorSpec prior = make_prior(f.prior);
  const FitOptions options = fit_options(f.epsilon_rel, f.max_rank);
  const CrossValidationResult cv = cross_validate(p, q, grid, f.folds, *f.seed, prior, options);

  json out = provenance(ctx, f.seed);
  json table = json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    json row = candidate_json(grid[i]);
    row["mean_loss"] = cv.mean_losses[i];
    table.push_back(std::move(row));
  }
  out["grid"] = std::move(table);
  out["best_index"] = cv.best_index;
  out["best"] = candidate_json(cv.best);
  if (!f.model_out.empty()) {
    const KdmModel model = fit(p, q, cv.best.kernel, cv.best.lambda, prior, options);
    report_warnings(model.warnings);
    json prov = provenance(ctx, f.seed);
    prov["summary"] = model_summary(model);
    io::save_model(f.model_out, model, ctx.force, prov);
    out["model"] = model_summary(model);
  }
  write_json(f.out, out, ctx.force);
  log("selected candidate " + std::to_string(cv.best_index) + " of " + std::to_string(grid.size()));
  log_done(sw);
}

void run_test(const TestFlags& f, const RunContext& ctx) {
  const Stopwatch sw;
  io::ensure_writable(f.out, ctx.force);
  const KdmModel model = io::load_model(f.model);
  const TruncationRule rule{parse_truncation_kind(f.truncation), f.t};
  const TestResult result = kdm::run_test(model, rule, f.eta);
  json out = provenance(ctx, std::nullopt);
  out["model"] = model_summary(model);
  out["result"] = io::to_json(result);
  write_json(f.out, out, ctx.force);
  char buf[128];
  std::snprintf(buf, sizeof buf, "T = %.6g with ell = %lld, p = %.6g", result.statistic,
                static_cast<long long>(result.ell), result.p_value);
  log(buf);
  log_done(sw);
}

void run_condexp(const CondexpFlags& f, const RunContext& ctx) {
  const Stopwatch sw;
  io::ensure_writable(f.out, ctx.force);
  io::ensure_writable(f.out + ".json", ctx.force);
  const JointDataset joint = io::ingest_joint_csv(f.joint, f.xcols, f.ycols);
  const io::CsvTable query = io::read_csv(f.query);
  const std::string qcols = f.query_cols.empty() ? f.xcols : f.query_cols;
  const Matrix qx = query.data(Eigen::all, io::resolve_columns(query.header, qcols));
  if (qx.cols() != joint.dim_x()) throw std::invalid_argument("query columns do not match the x dimension");

  ConditionalFitOptions options;
  options.scheme = parse_split_scheme(f.scheme);
  options.standardize = f.standardize;
  options.y_grid_cap = f.grid_cap;
  options.seed = stream_seed(*f.seed, 0);
  options.fit = fit_options(f.epsilon_rel, f.max_rank);

  const std::vector<Candidate> grid = make_candidates(f.kernel, f.lambda);
  Candidate chosen = grid.front();
  json cv_json = nullptr;
  if (grid.size() > 1) {
    const auto [p, q] = prepare_samples(joint, options);
    const CrossValidationResult cv = cross_validate(p, q, grid, f.folds, stream_seed(*f.seed, 1), PriorSpec::one(),
                                                    options.fit);
    chosen = cv.best;
    cv_json = {{"best_index", cv.best_index}, {"mean_losses", cv.mean_losses}};
  }
  const ConditionalModel cm = fit_conditional(joint, chosen.kernel, chosen.lambda, options);
  report_warnings(cm.base.warnings);

  const Index dy = cm.dim_y();
  Matrix out(qx.rows(), dy + dy * dy);
  std::vector<char> degenerate(static_cast<std::size_t>(qx.rows()), 0);
  parallel_for(qx.rows(), [&](Index i) {
    const ConditionalMoments m = conditional_moments(cm, qx.row(i));
    out.row(i).head(dy) = m.mean.transpose();
    for (Index a = 0; a < dy; ++a)
      for (Index b = 0; b < dy; ++b) out(i, dy + a * dy + b) = m.covariance(a, b);
    degenerate[static_cast<std::size_t>(i)] = m.degenerate;
  });

  std::vector<std::string> header;
  for (Index a = 0; a < dy; ++a) header.push_back("mean_" + std::to_string(a + 1));
  for (Index a = 0; a < dy; ++a)
    for (Index b = 0; b < dy; ++b) header.push_back("cov_" + std::to_string(a + 1) + "_" + std::to_string(b + 1));

  json side = provenance(ctx, f.seed);
  side["selected"] = candidate_json(chosen);
  side["cross_validation"] = cv_json;
  side["model"] = model_summary(cm.base);
  side["y_grid_size"] = cm.y_grid.rows();
  side["degenerate_queries"] = std::count(degenerate.begin(), degenerate.end(), 1);
  write_csv_artifact(f.out, header, out, side, ctx.force);
  log_done(sw);
}

void run_simulate(const SimulateFlags& f, const RunContext& ctx) {
  const Stopwatch sw;
  std::string name;
  for (char ch : f.dist) name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  JointDataset data;
  std::vector<std::string> header;
  if (name == "mixture") {
    MixtureConfig mc;
    mc.clusters = f.clusters;
    data = sample_gaussian_mixture(mc, f.n, *f.seed);
    header = {"x1", "x2", "y1", "y2"};
  } else {
    data = sample_distribution(parse_distribution(name), f.n, f.c, *f.seed);
    header = {"x", "y"};
  }
  write_csv_artifact(f.out, header, data.stacked(), provenance(ctx, f.seed), ctx.force);
  log_done(sw);
}

namespace {

std::vector<ForecastRecord> moment_records(const Matrix& pred, const Matrix& realized, const std::string& what) {
  const Index d = realized.cols();
  if (pred.rows() != realized.rows() || pred.cols() != d + d * d)
    throw std::invalid_argument(what + " must have one row per outcome with " + std::to_string(d + d * d) +
                                " columns (means, then the row-major covariance)");
  std::vector<ForecastRecord> out;
  for (Index i = 0; i < pred.rows(); ++i) {
    ForecastRecord r;
    r.realized = realized.row(i).transpose();
    r.predicted_mean = pred.row(i).head(d).transpose();
    r.predicted_cov = Eigen::Map<const RowMatrix>(pred.row(i).tail(d * d).eval().data(), d, d);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

void run_score(const ScoreFlags& f, const RunContext& ctx) {
  const Stopwatch sw;
  io::ensure_writable(f.out, ctx.force);
  const Matrix realized = io::read_csv(f.realized).data;
  const Matrix pred = io::read_csv(f.pred).data;
  const Matrix base = io::read_csv(f.baseline).data;
  const Index d = realized.cols();
  json out = provenance(ctx, std::nullopt);
  out["metric"] = f.metric;
  out["records"] = realized.rows();

  if (f.metric == "r2") {
    if (pred.rows() != realized.rows() || base.rows() != realized.rows() || pred.cols() < d || base.cols() < d)
      throw std::invalid_argument("r2: forecasts must align with the realized outcomes");
    std::vector<ForecastRecord> records;
    std::vector<Vector> baseline;
    for (Index i = 0; i < realized.rows(); ++i) {
      records.push_back({realized.row(i).transpose(), pred.row(i).head(d).transpose(), Matrix::Zero(d, d)});
      baseline.push_back(base.row(i).head(d).transpose());
    }
    out["value"] = r2_oos(records, baseline);
  } else if (f.metric == "r2-2" || f.metric == "ds") {
    const auto cand = moment_records(pred, realized, "--pred");
    const auto bl = moment_records(base, realized, "--baseline");
    if (f.metric == "r2-2") {
      out["value"] = r2_second_moment(cand, bl);
    } else {
      out["value"] = excess_scoring_loss(cand, bl);
    }
  } else if (f.metric == "energy") {
    if (f.ensemble.empty()) throw std::invalid_argument("energy: --ensemble is required");
    const Matrix ens = io::read_csv(f.ensemble).data;
    if (ens.cols() != d) throw std::invalid_argument("energy: ensemble and outcomes differ in dimension");
    if (pred.rows() != realized.rows() || base.rows() != realized.rows() || pred.cols() != ens.rows() ||
        base.cols() != ens.rows())
      throw std::invalid_argument("energy: weight files need one row per outcome and one column per ensemble member");
    std::vector<double> sc(static_cast<std::size_t>(realized.rows()));
    std::vector<double> sb(sc.size());
    parallel_for(realized.rows(), [&](Index i) {
      sc[static_cast<std::size_t>(i)] = energy_score(realized.row(i).transpose(), ens, pred.row(i).transpose());
      sb[static_cast<std::size_t>(i)] = energy_score(realized.row(i).transpose(), ens, base.row(i).transpose());
    });
    out["value"] = score_differential(sb, sc);
    out["candidate_scores"] = sc;
    out["baseline_scores"] = sb;
  } else {
    throw std::invalid_argument("unknown metric '" + f.metric + "' (energy | r2 | r2-2 | ds)");
  }
  write_json(f.out, out, ctx.force);
  log_done(sw);
}

void run_bench_independence(const BenchIndependenceFlags& f, const RunContext& ctx) {
  const Stopwatch sw;
  io::ensure_writable(f.out, ctx.force);
  std::vector<Distribution> dists;
  if (f.dists.empty()) {
    dists.assign(kAllDistributions.begin(), kAllDistributions.end());
  } else {
    for (const std::string& name : f.dists) dists.push_back(parse_distribution(name));
  }

  json cells = json::array();
  std::printf("%-20s %7s %10s %8s %8s\n", "distribution", "n", "rejection", "ks", "ell");
  for (Distribution d : dists) {
    for (long long n : f.n) {
      IndependenceConfig c;
      c.distribution = d;
      c.n = n;
      c.replications = f.reps;
      c.kernel = KernelSpec::gaussian(f.rho);
      c.lambda = f.lambda;
      c.fit.epsilon_rel = f.epsilon_rel;
      c.truncation = TruncationRule::relative(f.t);
      c.eta = f.eta;
      c.alpha = f.alpha;
      // Cell seeds depend only on (distribution, n), so subsets of a study reproduce it.
      c.seed = stream_seed(stream_seed(*f.seed, static_cast<std::uint64_t>(d)), static_cast<std::uint64_t>(n));
      const std::string label = std::string(to_string(d)) + " n=" + std::to_string(n);
      const int step = std::max(1, f.reps / 10);
      const IndependenceSummary s = run_independence_study(c, [&](int done) {
        if (done % step == 0 || done == f.reps)
          log(label + ": " + std::to_string(done) + "/" + std::to_string(f.reps) + " replications");
      });
      double mean_ell = 0.0;
      double mean_rank = 0.0;
      for (const ReplicationOutcome& o : s.outcomes) {
        mean_ell += static_cast<double>(o.ell);
        mean_rank += static_cast<double>(o.rank);
      }
      mean_ell /= f.reps;
      mean_rank /= f.reps;
      json cell = {{"distribution", to_string(d)},  {"n", n},
                   {"rejection_rate", s.rejection_rate}, {"ks_distance", s.ks_distance},
                   {"mean_ell", mean_ell},           {"mean_rank", mean_rank},
                   {"seed", c.seed}};
      cell["bound_rate"] = s.bound_rate ? json(*s.bound_rate) : json(nullptr);
      std::vector<double> pvals;
      for (const ReplicationOutcome& o : s.outcomes) pvals.push_back(o.p_value);
      cell["p_values"] = pvals;
      cells.push_back(std::move(cell));
      std::printf("%-20s %7lld %10.3f %8.3f %8.1f\n", std::string(to_string(d)).c_str(), n, s.rejection_rate,
                  s.ks_distance, mean_ell);
      std::fflush(stdout);
    }
  }
  json out = provenance(ctx, f.seed);
  out["cells"] = std::move(cells);
  write_json(f.out, out, ctx.force);
  log_done(sw);
}

void run_bench_mixture(const BenchMixtureFlags& f, const RunContext& ctx) {
  const Stopwatch sw;
  io::ensure_writable(f.out, ctx.force);
  MixtureStudyConfig c;
  c.runs = f.runs;
  c.clusters = f.clusters;
  c.n = f.n;
  c.n_test = f.n_test;
  c.grid_cap = f.grid_cap;
  c.fit.epsilon_rel = f.epsilon_rel;
  c.fit.max_rank = f.max_rank;
  c.folds = f.folds;
  c.seed = *f.seed;
  const MixtureSummary s = run_mixture_study(c, [&](int done) {
    log("mixture: " + std::to_string(done) + "/" + std::to_string(f.runs) + " runs");
  });

  json runs = json::array();
  std::map<int, std::vector<double>> by_cluster;
  for (const MixtureRunOutcome& o : s.outcomes) {
    runs.push_back({{"clusters", o.clusters},
                    {"differential", o.differential},
                    {"selected", candidate_json(o.selected)},
                    {"rank", o.rank}});
    by_cluster[o.clusters].push_back(o.differential);
  }
  json medians = json::object();
  std::printf("%-10s %6s %14s\n", "clusters", "runs", "median diff");
  for (const auto& [k, v] : by_cluster) {
    medians[std::to_string(k)] = median(v);
    std::printf("%-10d %6zu %14.6f\n", k, v.size(), median(v));
  }
  std::printf("%-10s %6d %14.6f\n", "all", f.runs, s.median_differential);
  json out = provenance(ctx, f.seed);
  out["runs"] = std::move(runs);
  out["median_differential"] = s.median_differential;
  out["median_by_clusters"] = std::move(medians);
  write_json(f.out, out, ctx.force);
  log_done(sw);
}

}  // namespace kdm::cli

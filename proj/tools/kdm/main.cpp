// kdm: command-line front end for kernel density machines.
//
// Exit codes: 0 success, 1 usage or input error, 2 numeric failure.

#include "commands.hpp"

#include <kdm/common.hpp>

#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  throw std::invalid_argument("config: unsupported value " + v.dump());
}

// Expands "--config file.json" into ordinary flags appended after the command
// line; keys already given on the command line are skipped so flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw std::invalid_argument("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (!path) return kept;

  std::ifstream in(*path);
  if (!in) throw std::invalid_argument("cannot open config '" + *path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config '" + *path + "': " + e.what());
  }
  if (!cfg.is_object()) throw std::invalid_argument("config must be a JSON object");

  auto given = [&](const std::string& flag) {
    for (const std::string& a : kept)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) kept.push_back(flag);
    } else if (value.is_array()) {
      kept.push_back(flag);
      for (const json& v : value) kept.push_back(scalar_text(v));
    } else if (!value.is_null()) {
      kept.push_back(flag);
      kept.push_back(scalar_text(value));
    }
  }
  return kept;
}

void add_kernel_flags(CLI::App* cmd, kdm::cli::KernelFlags& k, bool grid) {
  cmd->add_option("--kernel", k.family, "gaussian | laplace | polynomial");
  auto* rho = cmd->add_option("--rho", k.rho, grid ? "kernel scale(s); several values form a grid" : "kernel scale");
  if (!grid) rho->expected(1);
  cmd->add_option("--c", k.c, "polynomial offset");
  cmd->add_option("--degree", k.degree, "polynomial degree");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace kdm::cli;

  CLI::App app{"Kernel density machines: density ratios, independence tests, conditional distributions"};
  app.set_version_flag("--version", std::string(kdm::kVersion));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  bool force = false;
  app.add_flag("--force", force, "overwrite existing outputs");
  app.add_option("--config", "JSON file of flag values; command-line flags take precedence");

  FitFlags fit_flags;
  auto add_sample_flags = [](CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--p", f.p, "CSV sample from P")->required()->check(CLI::ExistingFile);
    cmd->add_option("--q", f.q, "CSV sample from Q")->required()->check(CLI::ExistingFile);
    cmd->add_option("--pcols", f.pcols, "columns of the P file (names, indices, a..b ranges)");
    cmd->add_option("--qcols", f.qcols, "columns of the Q file");
    cmd->add_flag("--standardize", f.standardize, "z-score columns on the pooled sample");
    cmd->add_option("--epsilon-rel", f.epsilon_rel, "pivoted Cholesky tolerance relative to trace K");
    cmd->add_option("--max-rank", f.max_rank, "rank cap of the factorization");
    cmd->add_option("--prior", f.prior, "zero | one");
  };
  auto* fit_cmd = app.add_subcommand("fit", "fit a density-ratio model");
  add_sample_flags(fit_cmd, fit_flags);
  add_kernel_flags(fit_cmd, fit_flags.kernel, false);
  fit_cmd->add_option("--lambda", fit_flags.lambda, "regularization")->expected(1);
  fit_cmd->add_option("--out", fit_flags.out, "model bundle path")->required();

  FitFlags cv_flags;
  auto* cv_cmd = app.add_subcommand("cv", "cross-validate kernel scale and lambda");
  add_sample_flags(cv_cmd, cv_flags);
  add_kernel_flags(cv_cmd, cv_flags.kernel, true);
  cv_cmd->add_option("--lambda", cv_flags.lambda, "lambda grid");
  cv_cmd->add_option("--folds", cv_flags.folds, "number of folds");
  cv_cmd->add_option("--seed", cv_flags.seed, "fold assignment seed")->required();
  cv_cmd->add_option("--out", cv_flags.out, "JSON result path")->required();
  cv_cmd->add_option("--model-out", cv_flags.model_out, "also fit the selected candidate and save it here");

  TestFlags test_flags;
  auto* test_cmd = app.add_subcommand("test", "chi-square test of P = Q on a fitted model");
  test_cmd->add_option("--model", test_flags.model, "model bundle")->required()->check(CLI::ExistingFile);
  test_cmd->add_option("--truncation", test_flags.truncation, "relative | explained");
  test_cmd->add_option("--t", test_flags.t, "truncation threshold");
  test_cmd->add_option("--eta", test_flags.eta, "confidence parameter of the finite-sample bound check");
  test_cmd->add_option("--out", test_flags.out, "JSON result path")->required();

  CondexpFlags ce_flags;
  auto* ce_cmd = app.add_subcommand("condexp", "conditional moments of Y given X at query points");
  ce_cmd->add_option("--joint", ce_flags.joint, "CSV joint sample")->required()->check(CLI::ExistingFile);
  ce_cmd->add_option("--xcols", ce_flags.xcols, "X columns")->required();
  ce_cmd->add_option("--ycols", ce_flags.ycols, "Y columns")->required();
  ce_cmd->add_option("--scheme", ce_flags.scheme, "shifted | three-split");
  ce_cmd->add_option("--query", ce_flags.query, "CSV of query x values")->required()->check(CLI::ExistingFile);
  ce_cmd->add_option("--query-cols", ce_flags.query_cols, "X columns of the query file (default: --xcols)");
  ce_cmd->add_flag("--standardize", ce_flags.standardize, "z-score the joint columns before fitting");
  add_kernel_flags(ce_cmd, ce_flags.kernel, true);
  ce_cmd->add_option("--lambda", ce_flags.lambda, "lambda (several values: cross-validate)");
  ce_cmd->add_option("--epsilon-rel", ce_flags.epsilon_rel, "pivoted Cholesky tolerance relative to trace K");
  ce_cmd->add_option("--max-rank", ce_flags.max_rank, "rank cap of the factorization");
  ce_cmd->add_option("--grid-cap", ce_flags.grid_cap, "maximum size of the auxiliary y grid");
  ce_cmd->add_option("--folds", ce_flags.folds, "folds when cross-validating");
  ce_cmd->add_option("--seed", ce_flags.seed, "seed for grid subsampling and folds")->required();
  ce_cmd->add_option("--out", ce_flags.out, "CSV of per-query mean and flattened covariance")->required();

  SimulateFlags sim_flags;
  auto* sim_cmd = app.add_subcommand("simulate", "draw a synthetic joint sample");
  sim_cmd->add_option("--dist", sim_flags.dist, "independent-clouds | w | diamond | parabola | two-parabola | "
                                                "circle | variance | log | mixture")->required();
  sim_cmd->add_option("--n", sim_flags.n, "rows")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--c", sim_flags.c, "distribution constant");
  sim_cmd->add_option("--clusters", sim_flags.clusters, "mixture clusters")->check(CLI::Range(1, 1000));
  sim_cmd->add_option("--seed", sim_flags.seed, "random seed")->required();
  sim_cmd->add_option("--out", sim_flags.out, "CSV path")->required();

  ScoreFlags score_flags;
  auto* score_cmd = app.add_subcommand("score", "score forecasts against realized outcomes");
  score_cmd->add_option("--metric", score_flags.metric, "energy | r2 | r2-2 | ds")->required();
  score_cmd->add_option("--pred", score_flags.pred, "candidate forecasts CSV")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--baseline", score_flags.baseline, "baseline forecasts CSV")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--realized", score_flags.realized, "realized outcomes CSV")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--ensemble", score_flags.ensemble, "ensemble members CSV (energy)")->check(CLI::ExistingFile);
  score_cmd->add_option("--out", score_flags.out, "JSON result path")->required();

  auto* bench_cmd = app.add_subcommand("bench", "Monte Carlo studies");
  bench_cmd->require_subcommand(1);
  BenchIndependenceFlags bi_flags;
  auto* bi_cmd = bench_cmd->add_subcommand("independence", "rejection rates of the independence test");
  bi_cmd->add_option("--dist", bi_flags.dists, "distributions (default: all)");
  bi_cmd->add_option("--n", bi_flags.n, "sample sizes");
  bi_cmd->add_option("--reps", bi_flags.reps, "replications per cell")->check(CLI::PositiveNumber);
  bi_cmd->add_option("--rho", bi_flags.rho, "Gaussian kernel scale on z-scored data");
  bi_cmd->add_option("--lambda", bi_flags.lambda, "regularization (bound check only)");
  bi_cmd->add_option("--epsilon-rel", bi_flags.epsilon_rel, "pivoted Cholesky tolerance relative to trace K");
  bi_cmd->add_option("--t", bi_flags.t, "relative truncation threshold");
  bi_cmd->add_option("--eta", bi_flags.eta, "also check the finite-sample bound at this eta");
  bi_cmd->add_option("--alpha", bi_flags.alpha, "test level");
  bi_cmd->add_option("--seed", bi_flags.seed, "master seed")->required();
  bi_cmd->add_option("--out", bi_flags.out, "JSON result path")->required();

  BenchMixtureFlags bm_flags;
  auto* bm_cmd = bench_cmd->add_subcommand("mixture", "energy-score differential on Gaussian mixtures");
  bm_cmd->add_option("--runs", bm_flags.runs, "simulation runs")->check(CLI::PositiveNumber);
  bm_cmd->add_option("--clusters", bm_flags.clusters, "fixed cluster count (default: cycle 1, 2, 3)");
  bm_cmd->add_option("--n", bm_flags.n, "training rows per block");
  bm_cmd->add_option("--n-test", bm_flags.n_test, "scored out-of-sample pairs");
  bm_cmd->add_option("--grid-cap", bm_flags.grid_cap, "maximum size of the auxiliary y grid");
  bm_cmd->add_option("--epsilon-rel", bm_flags.epsilon_rel, "pivoted Cholesky tolerance relative to trace K");
  bm_cmd->add_option("--max-rank", bm_flags.max_rank, "rank cap of the factorization");
  bm_cmd->add_option("--folds", bm_flags.folds, "cross-validation folds");
  bm_cmd->add_option("--seed", bm_flags.seed, "master seed")->required();
  bm_cmd->add_option("--out", bm_flags.out, "JSON result path")->required();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "kdm: " << e.what() << "\n";
    return 1;
  }

  try {
    RunContext ctx;
    ctx.force = force;
    auto run = [&](CLI::App* cmd, auto&& fn) {
      if (!cmd->parsed()) return false;
      ctx.command = cmd;
      fn();
      return true;
    };
    run(fit_cmd, [&] { run_fit(fit_flags, ctx); }) || run(cv_cmd, [&] { run_cv(cv_flags, ctx); }) ||
        run(test_cmd, [&] { run_test(test_flags, ctx); }) || run(ce_cmd, [&] { run_condexp(ce_flags, ctx); }) ||
        run(sim_cmd, [&] { run_simulate(sim_flags, ctx); }) || run(score_cmd, [&] { run_score(score_flags, ctx); }) ||
        run(bi_cmd, [&] { run_bench_independence(bi_flags, ctx); }) ||
        run(bm_cmd, [&] { run_bench_mixture(bm_flags, ctx); });
  } catch (const kdm::NumericError& e) {
    std::cerr << "kdm: numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "kdm: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

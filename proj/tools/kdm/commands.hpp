#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kdm::cli {

struct KernelFlags {
  std::string family = "gaussian";
  std::vector<double> rho = {1.0};
  double c = 0.0;
  int degree = 1;
};

struct FitFlags {
  std::string p;
  std::string q;
  std::string pcols;
  std::string qcols;
  bool standardize = false;
  KernelFlags kernel;
  std::vector<double> lambda = {1e-3};
  double epsilon_rel = 1e-6;
  int max_rank = 2000;
  std::string prior = "one";
  int folds = 5;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model_out;
};

struct TestFlags {
  std::string model;
  std::string truncation = "relative";
  double t = 1e-9;
  std::optional<double> eta;
  std::string out;
};

struct CondexpFlags {
  std::string joint;
  std::string xcols;
  std::string ycols;
  std::string scheme = "shifted";
  std::string query;
  std::string query_cols;
  bool standardize = false;
  KernelFlags kernel;
  std::vector<double> lambda = {1e-3};
  double epsilon_rel = 1e-6;
  int max_rank = 2000;
  int grid_cap = 2000;
  int folds = 5;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct SimulateFlags {
  std::string dist;
  long long n = 0;
  std::optional<double> c;
  int clusters = 1;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct ScoreFlags {
  std::string metric;
  std::string pred;
  std::string baseline;
  std::string realized;
  std::string ensemble;
  std::string out;
};

struct BenchIndependenceFlags {
  std::vector<std::string> dists;
  std::vector<long long> n = {500, 1500};
  int reps = 100;
  double rho = 4.0;
  double lambda = 1e-2;
  double epsilon_rel = 1e-6;
  double t = 1e-9;
  std::optional<double> eta;
  double alpha = 0.05;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct BenchMixtureFlags {
  int runs = 100;
  std::optional<int> clusters;
  long long n = 1000;
  long long n_test = 500;
  int grid_cap = 1000;
  double epsilon_rel = 1e-4;
  int max_rank = 400;
  int folds = 5;
  std::optional<std::uint64_t> seed;
  std::string out;
};

/// Shared run context: the invoked subcommand, for the config echo, and the overwrite flag.
struct RunContext {
  const CLI::App* command = nullptr;
  bool force = false;
};

nlohmann::json config_echo(const RunContext& ctx);

void run_fit(const FitFlags& f, const RunContext& ctx);
void run_cv(const FitFlags& f, const RunContext& ctx);
void run_test(const TestFlags& f, const RunContext& ctx);
void run_condexp(const CondexpFlags& f, const RunContext& ctx);
void run_simulate(const SimulateFlags& f, const RunContext& ctx);
void run_score(const ScoreFlags& f, const RunContext& ctx);
void run_bench_independence(const BenchIndependenceFlags& f, const RunContext& ctx);
void run_bench_mixture(const BenchMixtureFlags& f, const RunContext& ctx);

}  // namespace kdm::cli

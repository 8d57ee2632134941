#pragma once

#include <kdm/common.hpp>
#include <kdm/conditional.hpp>
#include <kdm/estimator.hpp>
#include <kdm/hypothesis.hpp>
#include <kdm/simulate.hpp>

#include <functional>
#include <optional>
#include <vector>

namespace kdm {

/// Monte Carlo independence study for one distribution and sample size.
///
/// Each replication draws 3n rows, z-scores the columns, splits them with the
/// three-split scheme and tests the fitted model. The statistic does not
/// depend on lambda; lambda only enters the optional bound check.
struct IndependenceConfig {
  Distribution distribution = Distribution::IndependentClouds;
  Index n = 500;
  int replications = 100;
  std::optional<double> constant;
  KernelSpec kernel = KernelSpec::gaussian(1.0);
  double lambda = 1e-2;
  FitOptions fit;
  TruncationRule truncation;
  std::optional<double> eta;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

struct ReplicationOutcome {
  double statistic = 0.0;
  Index ell = 0;
  double p_value = 1.0;
  Index rank = 0;
  std::optional<bool> bound_satisfied;
};

struct IndependenceSummary {
  IndependenceConfig config;
  std::vector<ReplicationOutcome> outcomes;
  double rejection_rate = 0.0;
  double ks_distance = 0.0;  // p-values against U(0, 1)
  std::optional<double> bound_rate;
};

ReplicationOutcome independence_replication(const IndependenceConfig& config, int replication);

/// Runs every replication (in parallel) and summarizes. `progress` is called
/// once per finished replication with the number finished so far.
IndependenceSummary run_independence_study(const IndependenceConfig& config,
                                           const std::function<void(int)>& progress = {});

/// Kolmogorov-Smirnov distance of a sample to the uniform distribution on [0, 1].
double ks_uniform(std::vector<double> values);

/// Simulation runs of the mixture study. Run i uses 1 + (i mod 3) clusters
/// unless `clusters` is fixed.
struct MixtureStudyConfig {
  int runs = 100;
  std::optional<int> clusters;
  Index n = 1000;       // training rows per block (3n drawn)
  Index n_test = 500;   // out-of-sample (x, y) pairs scored
  Index grid_cap = 1000;
  std::vector<double> rhos = {0.5, 1.0, 2.0, 4.0};
  std::vector<double> lambdas = {1e-4, 1e-3, 1e-2};
  int folds = 5;
  FitOptions fit;
  std::uint64_t seed = 0;
};

struct MixtureRunOutcome {
  int clusters = 1;
  double differential = 0.0;  // baseline minus KDM, mean over test points
  Candidate selected;
  Index rank = 0;
};

MixtureRunOutcome mixture_run(const MixtureStudyConfig& config, int run);

struct MixtureSummary {
  MixtureStudyConfig config;
  std::vector<MixtureRunOutcome> outcomes;
  double median_differential = 0.0;
};

MixtureSummary run_mixture_study(const MixtureStudyConfig& config, const std::function<void(int)>& progress = {});

/// Energy score with a precomputed ensemble distance matrix D(i, j) = |x_i - x_j|.
double energy_score_pairwise(const Vector& y, const Matrix& xs, const Vector& weights, const Matrix& distances);

double median(std::vector<double> values);

}  // namespace kdm

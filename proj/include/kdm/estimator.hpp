#pragma once

#include <kdm/common.hpp>
#include <kdm/kernels.hpp>
#include <kdm/lowrank.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kdm {

enum class PriorKind { Zero, One, Custom };

std::string_view to_string(PriorKind kind);
PriorKind parse_prior_kind(std::string_view name);

/// Prior density ratio p_star added to the RKHS component, with its sup bound pi_inf.
struct PriorSpec {
  PriorKind kind = PriorKind::One;
  std::function<double(const PointRef&)> custom;
  double pi_inf = 1.0;

  static PriorSpec zero() { return {PriorKind::Zero, {}, 0.0}; }
  static PriorSpec one() { return {PriorKind::One, {}, 1.0}; }
  static PriorSpec from_function(std::function<double(const PointRef&)> f, double pi_inf);

  double operator()(const PointRef& z) const;
  /// Prior values at every row of `points`.
  Vector evaluate(const Matrix& points) const;
};

/// Fitted low-rank density-ratio model  g(z) = p_star(z) + sum_j beta_j k(z, z_{pi_j}).
///
/// Points stored here (pivot points, and the P-sample prior values) live in
/// the transformed space when `transform` is set; query points are mapped
/// through it on evaluation.
struct KdmModel {
  KernelSpec kernel;
  double lambda = 0.0;
  PriorSpec prior;
  Index n = 0;
  Matrix pivot_points;
  std::vector<Index> pivots;  // indices into the stacked (P; Q) sample
  Vector beta;                // coefficients on k(., z_pivot)
  Vector coordinates;         // w = (L_P^T L_P + n lambda)^{-1} (L_Q^T 1 - L_P^T p_star)
  Matrix L_P;
  Matrix L_Q;
  Matrix R;
  Vector p_star;              // prior at the P-sample points
  double epsilon = 0.0;       // absolute trace tolerance used
  double residual_trace = 0.0;
  bool rank_capped = false;
  double kappa_inf = 1.0;
  bool kappa_empirical = false;
  bool prior_bound_violated = false;
  std::optional<AffineTransform> transform;
  std::vector<std::string> warnings;

  Index rank() const { return beta.size(); }
  Index dim() const { return pivot_points.cols(); }
};

struct FitOptions {
  double epsilon_rel = 1e-6;
  /// Overrides epsilon_rel with an absolute trace tolerance when set.
  std::optional<double> epsilon_abs;
  PivotStrategy strategy = PivotStrategy::Greedy;
  Index max_rank = 2000;
  double omp_quantile = 0.9;
  /// Target values f(z) on the stacked sample for OMP pivoting.
  Vector omp_target;
};

/// Factorization of the stacked-sample kernel matrix; reusable across lambda values.
struct FactorizedSample {
  KernelSpec kernel;
  Index n = 0;
  Matrix stacked;  // (2n x d), rows 0..n-1 from P, n..2n-1 from Q
  CholeskyFactors factors;
  std::optional<AffineTransform> transform;
  std::vector<std::string> warnings;
};

FactorizedSample factorize_sample(const Dataset& sample_p, const Dataset& sample_q, const KernelSpec& kernel,
                                  const FitOptions& options = {});

/// L_Q^T 1 - L_P^T p_star, accumulated row by row in sample order so that
/// identical P and Q samples cancel exactly.
Vector moment_difference(const Matrix& L_P, const Matrix& L_Q, const Vector& p_star);

/// Solves the m x m ridge system on a factorized sample.
KdmModel solve_model(const FactorizedSample& sample, double lambda, const PriorSpec& prior);

KdmModel fit(const Dataset& sample_p, const Dataset& sample_q, const KernelSpec& kernel, double lambda,
             const PriorSpec& prior = PriorSpec::one(), const FitOptions& options = {});

/// Full-rank representer solution over all 2n sample points.
struct FullRankFit {
  KernelSpec kernel;
  Index n = 0;
  Matrix points;  // stacked (P; Q)
  Vector coefficients;
  std::optional<AffineTransform> transform;
};

inline constexpr Index kFullRankMaxPoints = 4000;

FullRankFit fit_full(const Dataset& sample_p, const Dataset& sample_q, const KernelSpec& kernel, double lambda,
                     const PriorSpec& prior = PriorSpec::one());

double eval_h(const KdmModel& model, const PointRef& z);
Vector eval_h(const KdmModel& model, const Matrix& points);
double eval_h(const FullRankFit& fit, const PointRef& z);
Vector eval_h(const FullRankFit& fit, const Matrix& points);

double eval_density_ratio(const KdmModel& model, const PointRef& z, bool clip = false);
Vector eval_density_ratio(const KdmModel& model, const Matrix& points, bool clip = false);

/// |h|_H as sqrt(beta^T K_{pivots,pivots} beta).
double h_norm(const KdmModel& model);
/// The same norm as the Euclidean length of the orthonormal-basis coordinates.
double h_norm_coordinates(const KdmModel& model);

/// Validation loss with both sums averaged over their validation sample sizes.
double validation_loss(const KdmModel& model, const Dataset& val_p, const Dataset& val_q);

struct Candidate {
  KernelSpec kernel;
  double lambda = 1.0;
};

struct CrossValidationResult {
  Index best_index = 0;
  Candidate best;
  std::vector<double> mean_losses;  // one per grid candidate
};

/// Builds the grid of every (kernel, lambda) pair, kernels outermost.
std::vector<Candidate> make_grid(const std::vector<KernelSpec>& kernels, const std::vector<double>& lambdas);

/// k-fold cross-validation with the i-th P fold paired to the i-th Q fold.
/// Candidates sharing a kernel reuse one factorization per fold.
CrossValidationResult cross_validate(const Dataset& sample_p, const Dataset& sample_q,
                                     const std::vector<Candidate>& grid, int folds, std::uint64_t seed,
                                     const PriorSpec& prior = PriorSpec::one(), const FitOptions& options = {});

/// Deterministic fold label (0..folds-1) for each of n rows.
std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed);

}  // namespace kdm

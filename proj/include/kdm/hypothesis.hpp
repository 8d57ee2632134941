#pragma once

#include <kdm/common.hpp>
#include <kdm/estimator.hpp>

#include <optional>
#include <string_view>

namespace kdm {

/// Rule for the number of retained eigen-directions of the covariance.
///   Relative:           ell = max{i : w_i >= t w_1}
///   ExplainedVariation: ell = min{i : w_1 + ... + w_i >= t (w_1 + ... + w_m)}
struct TruncationRule {
  enum class Kind { Relative, ExplainedVariation };
  Kind kind = Kind::Relative;
  double t = 1e-9;

  static TruncationRule relative(double t) { return {Kind::Relative, t}; }
  static TruncationRule explained_variation(double t) { return {Kind::ExplainedVariation, t}; }
};

std::string_view to_string(TruncationRule::Kind kind);
TruncationRule::Kind parse_truncation_kind(std::string_view name);

struct BoundCoefficients {
  double c_fs = 0.0;
  double c_ae = 0.0;
  double rhs = 0.0;  // (c_fs + c_ae) / (lambda sqrt(n))
};

struct BoundCheck {
  double eta = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
};

struct TestResult {
  double statistic = 0.0;
  Index ell = 0;
  Vector eigenvalues;  // nonincreasing
  double p_value = 1.0;
  Vector v_lambda;
  TruncationRule truncation;
  std::optional<BoundCheck> bound_check;
};

/// v = n^{-1/2} (L_Q^T 1 - L_P^T p_star).
Vector sample_variable(const KdmModel& model);

/// Sample covariance of v under the null, symmetrized after assembly.
Matrix covariance_matrix(const KdmModel& model);

/// Upper tail of the chi-square distribution, Q(dof/2, x/2).
double chi_square_upper_tail(double x, int dof);

/// Finite-sample coefficients C_FS(eta, s), C_AE(epsilon, lambda) and the total bound.
BoundCoefficients finite_sample_bound(double eta, double lambda, Index n, double epsilon, double kappa_inf,
                                      double pi_inf, double s);

/// Number of retained directions for eigenvalues sorted nonincreasing.
Index select_ell(const Vector& eigenvalues, const TruncationRule& rule);

TestResult run_test(const KdmModel& model, const TruncationRule& rule = {}, std::optional<double> eta = std::nullopt);

}  // namespace kdm

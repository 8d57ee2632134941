#include <kdm/hypothesis.hpp>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>

namespace kdm {

std::string_view to_string(TruncationRule::Kind kind) {
  return kind == TruncationRule::Kind::Relative ? "relative" : "explained";
}

TruncationRule::Kind parse_truncation_kind(std::string_view name) {
  if (name == "relative") return TruncationRule::Kind::Relative;
  if (name == "explained" || name == "explained-variation") return TruncationRule::Kind::ExplainedVariation;
  throw std::invalid_argument("unknown truncation rule '" + std::string(name) + "'");
}

namespace {

void require_blocks(const KdmModel& model) {
  if (model.n <= 0 || model.L_P.rows() != model.n || model.L_Q.rows() != model.n ||
      model.L_P.cols() != model.L_Q.cols() || model.p_star.size() != model.n)
    throw std::invalid_argument("model is missing its factor blocks");
}

}  // namespace

Vector sample_variable(const KdmModel& model) {
  require_blocks(model);
  const double n = static_cast<double>(model.n);
  return moment_difference(model.L_P, model.L_Q, model.p_star) / std::sqrt(n);
}

Matrix covariance_matrix(const KdmModel& model) {
  require_blocks(model);
  const double n = static_cast<double>(model.n);
  const Vector sum_q = model.L_Q.colwise().sum().transpose();
  const Vector sum_p = model.L_P.colwise().sum().transpose();
  const Matrix weighted_p = model.p_star.asDiagonal() * model.L_P;
  Matrix sigma = model.L_Q.transpose() * model.L_Q / n - sum_q * sum_q.transpose() / (n * n) +
                 weighted_p.transpose() * weighted_p / n - sum_p * sum_p.transpose() / (n * n);
  return 0.5 * (sigma + sigma.transpose());
}

double chi_square_upper_tail(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi_square_upper_tail: dof must be >= 1");
  if (!(x >= 0.0)) throw std::invalid_argument("chi_square_upper_tail: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

BoundCoefficients finite_sample_bound(double eta, double lambda, Index n, double epsilon, double kappa_inf,
                                      double pi_inf, double s) {
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("finite_sample_bound: eta must lie in (0, 1)");
  if (!(lambda > 0.0) || n < 1 || !(epsilon >= 0.0) || !(kappa_inf >= 0.0) || !(pi_inf >= 0.0) || !(s >= 0.0))
    throw std::invalid_argument("finite_sample_bound: argument out of range");
  BoundCoefficients b;
  b.c_fs = 2.0 * std::sqrt(2.0 * std::log(2.0 / eta) * kappa_inf) * (1.0 + pi_inf + s * std::sqrt(kappa_inf));
  b.c_ae = std::sqrt(epsilon) * (1.0 + std::sqrt(kappa_inf / lambda)) * (pi_inf + 1.0);
  b.rhs = (b.c_fs + b.c_ae) / (lambda * std::sqrt(static_cast<double>(n)));
  return b;
}

Index select_ell(const Vector& w, const TruncationRule& rule) {
  if (!(rule.t > 0.0 && rule.t < 1.0)) throw std::invalid_argument("truncation threshold t must lie in (0, 1)");
  if (w.size() == 0 || !(w(0) > 0.0)) return 0;
  const double floor = 1e-12 * w(0);
  Index positive = 0;
  while (positive < w.size() && w(positive) > floor) ++positive;

  if (rule.kind == TruncationRule::Kind::Relative) {
    Index ell = 0;
    while (ell < positive && w(ell) >= rule.t * w(0)) ++ell;
    return ell;
  }
  const double total = w.cwiseMax(0.0).sum();
  double cumulative = 0.0;
  for (Index i = 0; i < positive; ++i) {
    cumulative += w(i);
    if (cumulative >= rule.t * total) return i + 1;
  }
  return positive;
}

TestResult run_test(const KdmModel& model, const TruncationRule& rule, std::optional<double> eta) {
  TestResult r;
  r.truncation = rule;
  r.v_lambda = sample_variable(model);
  const Index m = r.v_lambda.size();
  if (m > 0) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_matrix(model));
    if (eig.info() != Eigen::Success) throw NumericError("run_test: eigendecomposition failed");
    r.eigenvalues = eig.eigenvalues().reverse();
    r.ell = select_ell(r.eigenvalues, rule);
    const Matrix directions = eig.eigenvectors().rowwise().reverse();
    for (Index i = 0; i < r.ell; ++i) {
      const double proj = directions.col(i).dot(r.v_lambda);
      r.statistic += proj * proj / r.eigenvalues(i);
    }
  }
  r.p_value = r.ell > 0 ? chi_square_upper_tail(r.statistic, static_cast<int>(r.ell)) : 1.0;
  if (r.ell == 0) r.statistic = 0.0;

  if (eta) {
    BoundCheck bc;
    bc.eta = *eta;
    bc.lhs = h_norm(model);
    bc.rhs = finite_sample_bound(*eta, model.lambda, model.n, model.epsilon, model.kappa_inf, model.prior.pi_inf, 0.0)
                 .rhs;
    bc.satisfied = bc.lhs <= bc.rhs;
    r.bound_check = bc;
  }
  return r;
}

}  // namespace kdm

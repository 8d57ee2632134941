#pragma once

#include <kdm/common.hpp>
#include <kdm/kernels.hpp>

#include <span>
#include <vector>

namespace kdm {

/// Column access to a symmetric PSD matrix without materializing it.
/// Repeated queries for the same column must return identical values.
class ColumnOracle {
 public:
  virtual ~ColumnOracle() = default;
  virtual Index size() const = 0;
  virtual Vector diagonal() const = 0;
  virtual void column(Index j, Eigen::Ref<Vector> out) const = 0;
};

/// Oracle over an explicit matrix (test scale).
class MatrixColumnOracle final : public ColumnOracle {
 public:
  explicit MatrixColumnOracle(Matrix K);
  Index size() const override { return K_.rows(); }
  Vector diagonal() const override { return K_.diagonal(); }
  void column(Index j, Eigen::Ref<Vector> out) const override { out = K_.col(j); }
  const Matrix& matrix() const { return K_; }

 private:
  Matrix K_;
};

/// Oracle over the kernel matrix K_ij = k(z_i, z_j) of a point set.
class KernelColumnOracle final : public ColumnOracle {
 public:
  KernelColumnOracle(KernelSpec spec, const Matrix& points);
  Index size() const override { return points_.rows(); }
  Vector diagonal() const override;
  void column(Index j, Eigen::Ref<Vector> out) const override;

 private:
  KernelSpec spec_;
  RowMatrix points_;
  Vector sq_norms_;
};

enum class PivotStrategy { Greedy, OrthogonalMatchingPursuit };

struct CholeskyOptions {
  double epsilon = 0.0;                      // absolute trace tolerance
  PivotStrategy strategy = PivotStrategy::Greedy;
  Index max_rank = 2000;                     // effective cap is min(size, max_rank)
  Vector omp_target;                         // f(z) at every point, OMP only
  double omp_quantile = 0.9;
};

/// Output of the pivoted incomplete Cholesky decomposition.
///
/// L is (N x m) with K_{:,pivots} R = L and R^T L_{pivots,:} = I_m, and
/// K - L L^T is PSD with trace `residual_trace` <= epsilon.
struct CholeskyFactors {
  std::vector<Index> pivots;
  Matrix L;
  Matrix R;
  double residual_trace = 0.0;
  double epsilon = 0.0;
  bool rank_capped = false;
  // Residual trace after each step (index 0 is trace K).
  std::vector<double> trace_history;

  Index rank() const { return static_cast<Index>(pivots.size()); }
};

/// Index of the largest entry of d among non-excluded indices (ties: smallest index).
/// Throws std::invalid_argument when no candidate has d_j > 0.
Index greedy_pivot(const Vector& d, std::span<const Index> excluded);

/// Orthogonal matching pursuit pivot: maximizes (f_j - w_j)^2 / d_j over
/// candidates whose residual diagonal reaches the `quantile` of the nonzero
/// diagonal entries. Falls back to greedy_pivot when every score is zero.
Index omp_pivot(const Vector& d, const Vector& target, const Vector& w_running, double quantile,
                std::span<const Index> excluded = {});

CholeskyFactors pivoted_cholesky(const ColumnOracle& oracle, const CholeskyOptions& options = {});

/// epsilon_rel * trace(K).
double relative_tolerance(const ColumnOracle& oracle, double epsilon_rel);

/// Frobenius residuals of the factor identities, plus spectral checks on K - L L^T.
struct FactorReport {
  double kpi_r_minus_l = 0.0;        // |K_{:,P} R - L|_F
  double rt_lpi_minus_identity = 0.0; // |R^T L_{P,:} - I|_F
  double rrt_minus_inverse = 0.0;    // |R R^T - K_{P,P}^{-1}|_F
  double llt_minus_nystrom = 0.0;    // |L L^T - K_{:,P} K_{P,P}^{-1} K_{P,:}|_F
  double residual_min_eigenvalue = 0.0;
  double residual_trace = 0.0;
  // Reference norms for relative errors.
  double norm_l = 0.0;
  double norm_identity = 0.0;
  double norm_inverse = 0.0;
  double norm_nystrom = 0.0;
  double norm_k = 0.0;
  double trace_k = 0.0;
};

FactorReport verify_factors(const Matrix& K, const CholeskyFactors& factors);

}  // namespace kdm

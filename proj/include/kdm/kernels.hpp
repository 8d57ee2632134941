#pragma once

#include <kdm/common.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace kdm {

enum class KernelFamily { Gaussian, Laplace, Polynomial };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

/// Reproducing kernel and its hyperparameters.
///
/// `rho` is the Gaussian length-scale in squared-distance units,
///     k(z, z') = exp(-|z - z'|^2 / (2 rho)),
/// or the Laplace inverse length-scale,
///     k(z, z') = exp(-rho |z - z'|).
/// `c` and `q` parameterize the polynomial kernel (<z, z'> + c)^q.
struct KernelSpec {
  KernelFamily family = KernelFamily::Gaussian;
  double rho = 1.0;
  double c = 0.0;
  int q = 1;

  static KernelSpec gaussian(double rho);
  static KernelSpec laplace(double rho);
  static KernelSpec polynomial(double c, int q);

  /// Throws std::invalid_argument when the active family's parameters are out of range.
  void validate() const;

  bool operator==(const KernelSpec&) const = default;
};

/// Per-column affine map x -> (x - shift) / scale applied before kernel evaluation.
struct AffineTransform {
  Vector shift;
  Vector scale;

  /// z-scoring transform of the columns of `points` (sample standard deviation;
  /// constant columns keep scale 1).
  static AffineTransform zscore(const Matrix& points);

  Matrix apply(const Matrix& points) const;
  Eigen::RowVectorXd apply(const PointRef& point) const;
  Matrix invert(const Matrix& points) const;
  Index dim() const { return shift.size(); }

  bool operator==(const AffineTransform& other) const {
    return shift.size() == other.shift.size() && scale.size() == other.scale.size() &&
           shift == other.shift && scale == other.scale;
  }
};

/// n x d matrix of sample points (one point per row).
struct Dataset {
  Matrix points;
  std::optional<std::uint64_t> seed;
  /// Transform already applied to `points`, when the data was standardized at ingestion.
  std::optional<AffineTransform> transform;

  Dataset() = default;
  explicit Dataset(Matrix pts, std::optional<std::uint64_t> s = std::nullopt)
      : points(std::move(pts)), seed(s) {}

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }

  /// Throws std::invalid_argument on empty data or non-finite entries.
  void validate() const;
};

double eval_kernel(const KernelSpec& spec, const PointRef& z1, const PointRef& z2);

/// K(i, j) = eval_kernel(spec, rows_i, cols_j), bit-identical to the pointwise call.
Matrix cross_kernel_matrix(const KernelSpec& spec, const Matrix& rows, const Matrix& cols);
Matrix cross_kernel_matrix(const KernelSpec& spec, const Dataset& rows, const Dataset& cols);

struct KernelSup {
  double value = 1.0;
  // Set for the polynomial kernel: the value is a max over data, not a true supremum.
  bool empirical = false;
};

KernelSup kernel_sup(const KernelSpec& spec, const Dataset* data = nullptr);

namespace detail {

// Shared scalar core so that matrix builders reproduce eval_kernel exactly.
double dot(const double* a, const double* b, Index d);
double kernel_from_parts(const KernelSpec& spec, double sq_a, double sq_b, double inner);

}  // namespace detail

}  // namespace kdm

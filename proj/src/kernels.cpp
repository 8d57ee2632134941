#include <kdm/kernels.hpp>
#include <kdm/parallel.hpp>

#include <algorithm>
#include <cmath>

namespace kdm {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Laplace: return "laplace";
    case KernelFamily::Polynomial: return "polynomial";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian" || name == "gauss") return KernelFamily::Gaussian;
  if (name == "laplace") return KernelFamily::Laplace;
  if (name == "polynomial" || name == "poly") return KernelFamily::Polynomial;
  throw std::invalid_argument("unknown kernel family '" + std::string(name) + "'");
}

KernelSpec KernelSpec::gaussian(double rho) {
  KernelSpec s;
  s.family = KernelFamily::Gaussian;
  s.rho = rho;
  s.validate();
  return s;
}

KernelSpec KernelSpec::laplace(double rho) {
  KernelSpec s;
  s.family = KernelFamily::Laplace;
  s.rho = rho;
  s.validate();
  return s;
}

KernelSpec KernelSpec::polynomial(double c, int q) {
  KernelSpec s;
  s.family = KernelFamily::Polynomial;
  s.c = c;
  s.q = q;
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  switch (family) {
    case KernelFamily::Gaussian:
      if (!(rho > 0.0) || !std::isfinite(rho))
        throw std::invalid_argument("gaussian kernel requires rho > 0");
      break;
    case KernelFamily::Laplace:
      if (!(rho >= 0.0) || !std::isfinite(rho))
        throw std::invalid_argument("laplace kernel requires rho >= 0");
      break;
    case KernelFamily::Polynomial:
      if (!(c >= 0.0) || !std::isfinite(c))
        throw std::invalid_argument("polynomial kernel requires c >= 0");
      if (q < 1) throw std::invalid_argument("polynomial kernel requires q >= 1");
      break;
  }
}

AffineTransform AffineTransform::zscore(const Matrix& points) {
  if (points.rows() < 2) throw std::invalid_argument("standardization needs at least two rows");
  AffineTransform t;
  t.shift = points.colwise().mean().transpose();
  t.scale.resize(points.cols());
  for (Index j = 0; j < points.cols(); ++j) {
    const double var =
        (points.col(j).array() - t.shift(j)).square().sum() / static_cast<double>(points.rows() - 1);
    t.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return t;
}

Matrix AffineTransform::apply(const Matrix& points) const {
  if (points.cols() != dim()) throw std::invalid_argument("transform dimension mismatch");
  return (points.rowwise() - shift.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix AffineTransform::invert(const Matrix& points) const {
  if (points.cols() != dim()) throw std::invalid_argument("transform dimension mismatch");
  return (points.array().rowwise() * scale.transpose().array()).rowwise() + shift.transpose().array();
}

Eigen::RowVectorXd AffineTransform::apply(const PointRef& point) const {
  if (point.size() != dim()) throw std::invalid_argument("transform dimension mismatch");
  return (point - shift.transpose()).array() / scale.transpose().array();
}

void Dataset::validate() const {
  if (points.rows() < 1 || points.cols() < 1) throw std::invalid_argument("dataset is empty");
  if (!points.allFinite()) throw std::invalid_argument("dataset contains non-finite entries");
}

namespace detail {

double dot(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index k = 0; k < d; ++k) s += a[k] * b[k];
  return s;
}

double kernel_from_parts(const KernelSpec& spec, double sq_a, double sq_b, double inner) {
  switch (spec.family) {
    case KernelFamily::Gaussian: {
      const double dist2 = std::max(0.0, sq_a + sq_b - 2.0 * inner);
      return std::exp(-dist2 / (2.0 * spec.rho));
    }
    case KernelFamily::Laplace: {
      const double dist2 = std::max(0.0, sq_a + sq_b - 2.0 * inner);
      return std::exp(-spec.rho * std::sqrt(dist2));
    }
    case KernelFamily::Polynomial:
      return std::pow(inner + spec.c, spec.q);
  }
  return 0.0;
}

}  // namespace detail

double eval_kernel(const KernelSpec& spec, const PointRef& z1, const PointRef& z2) {
  if (z1.size() != z2.size()) throw std::invalid_argument("eval_kernel: dimension mismatch");
  if (!z1.allFinite() || !z2.allFinite()) throw std::invalid_argument("eval_kernel: non-finite input");
  const Eigen::RowVectorXd a = z1;
  const Eigen::RowVectorXd b = z2;
  const Index d = a.size();
  return detail::kernel_from_parts(spec, detail::dot(a.data(), a.data(), d),
                                   detail::dot(b.data(), b.data(), d),
                                   detail::dot(a.data(), b.data(), d));
}

Matrix cross_kernel_matrix(const KernelSpec& spec, const Matrix& rows, const Matrix& cols) {
  if (rows.cols() != cols.cols()) throw std::invalid_argument("cross_kernel_matrix: dimension mismatch");
  const Index d = rows.cols();
  const RowMatrix a = rows;
  const RowMatrix b = cols;
  Vector sq_b(b.rows());
  for (Index j = 0; j < b.rows(); ++j) sq_b(j) = detail::dot(b.row(j).data(), b.row(j).data(), d);
  Matrix out(a.rows(), b.rows());
  parallel_for(a.rows(), [&](Index i) {
    const double* ai = a.row(i).data();
    const double sq_a = detail::dot(ai, ai, d);
    for (Index j = 0; j < b.rows(); ++j)
      out(i, j) = detail::kernel_from_parts(spec, sq_a, sq_b(j), detail::dot(ai, b.row(j).data(), d));
  });
  return out;
}

Matrix cross_kernel_matrix(const KernelSpec& spec, const Dataset& rows, const Dataset& cols) {
  return cross_kernel_matrix(spec, rows.points, cols.points);
}

KernelSup kernel_sup(const KernelSpec& spec, const Dataset* data) {
  if (spec.family != KernelFamily::Polynomial) return {1.0, false};
  if (data == nullptr || data->size() == 0)
    throw std::invalid_argument("kernel_sup: polynomial kernel is unbounded, data required");
  double best = 0.0;
  for (Index i = 0; i < data->size(); ++i)
    best = std::max(best, eval_kernel(spec, data->points.row(i), data->points.row(i)));
  return {best, true};
}

}  // namespace kdm

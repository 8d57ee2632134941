#pragma once

#include <kdm/common.hpp>
#include <kdm/kernels.hpp>

#include <random>

namespace kdm::testing {

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

inline Matrix uniform_matrix(Index rows, Index cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// Independent reference implementation of the kernel formulas, direct distances.
inline double reference_kernel(const KernelSpec& s, const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  switch (s.family) {
    case KernelFamily::Gaussian: return std::exp(-(a - b).squaredNorm() / (2.0 * s.rho));
    case KernelFamily::Laplace: return std::exp(-s.rho * (a - b).norm());
    case KernelFamily::Polynomial: return std::pow(a.dot(b) + s.c, s.q);
  }
  return 0.0;
}

inline Matrix reference_gram(const KernelSpec& s, const Matrix& x, const Matrix& y) {
  Matrix k(x.rows(), y.rows());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < y.rows(); ++j) k(i, j) = reference_kernel(s, x.row(i), y.row(j));
  return k;
}

inline double min_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

}  // namespace kdm::testing

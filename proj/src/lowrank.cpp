#include <kdm/lowrank.hpp>
#include <kdm/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace kdm {

MatrixColumnOracle::MatrixColumnOracle(Matrix K) : K_(std::move(K)) {
  if (K_.rows() != K_.cols()) throw std::invalid_argument("MatrixColumnOracle: matrix must be square");
}

KernelColumnOracle::KernelColumnOracle(KernelSpec spec, const Matrix& points)
    : spec_(std::move(spec)), points_(points) {
  spec_.validate();
  sq_norms_.resize(points_.rows());
  for (Index i = 0; i < points_.rows(); ++i)
    sq_norms_(i) = detail::dot(points_.row(i).data(), points_.row(i).data(), points_.cols());
}

Vector KernelColumnOracle::diagonal() const {
  Vector diag(points_.rows());
  for (Index i = 0; i < points_.rows(); ++i)
    diag(i) = detail::kernel_from_parts(spec_, sq_norms_(i), sq_norms_(i), sq_norms_(i));
  return diag;
}

void KernelColumnOracle::column(Index j, Eigen::Ref<Vector> out) const {
  const Index d = points_.cols();
  const double* zj = points_.row(j).data();
  for (Index i = 0; i < points_.rows(); ++i)
    out(i) = detail::kernel_from_parts(spec_, sq_norms_(i), sq_norms_(j),
                                       detail::dot(points_.row(i).data(), zj, d));
}

namespace {

Index greedy_pivot_flags(const Vector& d, const std::vector<char>& excluded) {
  Index best = -1;
  double best_value = 0.0;
  for (Index j = 0; j < d.size(); ++j) {
    if (excluded[static_cast<std::size_t>(j)]) continue;
    if (d(j) > best_value) {
      best_value = d(j);
      best = j;
    }
  }
  if (best < 0) throw std::invalid_argument("greedy_pivot: no candidate with positive residual diagonal");
  return best;
}

std::vector<char> exclusion_flags(Index size, std::span<const Index> excluded) {
  std::vector<char> flags(static_cast<std::size_t>(size), 0);
  for (Index j : excluded) {
    if (j < 0 || j >= size) throw std::invalid_argument("pivot exclusion index out of range");
    flags[static_cast<std::size_t>(j)] = 1;
  }
  return flags;
}

// Linear-interpolation quantile of the nonzero, non-excluded entries.
double nonzero_quantile(const Vector& d, const std::vector<char>& excluded, double q) {
  std::vector<double> values;
  for (Index j = 0; j < d.size(); ++j)
    if (!excluded[static_cast<std::size_t>(j)] && d(j) > 0.0) values.push_back(d(j));
  if (values.empty()) throw std::invalid_argument("omp_pivot: no candidate with positive residual diagonal");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Index omp_pivot_flags(const Vector& d, const Vector& target, const Vector& w, double quantile,
                      const std::vector<char>& excluded) {
  const double eta = nonzero_quantile(d, excluded, quantile);
  Index best = -1;
  double best_score = 0.0;
  for (Index j = 0; j < d.size(); ++j) {
    if (excluded[static_cast<std::size_t>(j)] || !(d(j) > 0.0) || d(j) < eta) continue;
    const double r = target(j) - w(j);
    const double score = r * r / d(j);
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  if (best < 0) return greedy_pivot_flags(d, excluded);
  return best;
}

}  // namespace

Index greedy_pivot(const Vector& d, std::span<const Index> excluded) {
  return greedy_pivot_flags(d, exclusion_flags(d.size(), excluded));
}

Index omp_pivot(const Vector& d, const Vector& target, const Vector& w_running, double quantile,
                std::span<const Index> excluded) {
  if (target.size() != d.size() || w_running.size() != d.size())
    throw std::invalid_argument("omp_pivot: length mismatch");
  if (!(quantile >= 0.0 && quantile < 1.0)) throw std::invalid_argument("omp_pivot: quantile must lie in [0, 1)");
  return omp_pivot_flags(d, target, w_running, quantile, exclusion_flags(d.size(), excluded));
}

double relative_tolerance(const ColumnOracle& oracle, double epsilon_rel) {
  if (!(epsilon_rel >= 0.0)) throw std::invalid_argument("relative tolerance must be nonnegative");
  return epsilon_rel * std::max(0.0, oracle.diagonal().sum());
}

CholeskyFactors pivoted_cholesky(const ColumnOracle& oracle, const CholeskyOptions& options) {
  if (!(options.epsilon >= 0.0)) throw std::invalid_argument("pivoted_cholesky: epsilon must be >= 0");
  const Index n = oracle.size();
  const bool omp = options.strategy == PivotStrategy::OrthogonalMatchingPursuit;
  if (omp && options.omp_target.size() != n)
    throw std::invalid_argument("pivoted_cholesky: OMP target must have one value per point");

  CholeskyFactors out;
  out.epsilon = options.epsilon;

  Vector d = oracle.diagonal();
  const double dmax = n > 0 ? std::max(0.0, d.maxCoeff()) : 0.0;
  if (n > 0 && d.minCoeff() < -1e-12 * std::max(1.0, dmax))
    throw NumericError("pivoted_cholesky: negative diagonal entry, matrix is not PSD");
  const double floor = 1e-12 * dmax;
  const double breach = -1e-8 * std::max(1.0, dmax);
  d = (d.array() < floor).select(0.0, d);

  const Index cap = std::min(n, std::max<Index>(0, options.max_rank));
  Index capacity = std::min<Index>(cap, 64);
  Matrix L(n, capacity);
  Matrix R(capacity, capacity);
  std::vector<char> is_pivot(static_cast<std::size_t>(n), 0);
  Vector w_running = Vector::Zero(omp ? n : 0);
  Vector column(n);
  Vector ell(n);

  double trace = d.sum();
  out.trace_history.push_back(trace);
  Index i = 0;
  while (trace > options.epsilon) {
    if (!(d.maxCoeff() > 0.0)) break;
    if (i == cap) {
      out.rank_capped = true;
      break;
    }
    if (i == capacity) {
      capacity = std::min(cap, 2 * capacity);
      L.conservativeResize(Eigen::NoChange, capacity);
      R.conservativeResize(capacity, capacity);
    }

    // step 1-2: pivot selection
    const Index p = omp ? omp_pivot_flags(d, options.omp_target, w_running, options.omp_quantile, is_pivot)
                        : greedy_pivot_flags(d, is_pivot);
    const double dp = d(p);
    if (!(dp > 0.0)) throw NumericError("pivoted_cholesky: nonpositive residual diagonal at pivot");
    const double s = 1.0 / std::sqrt(dp);

    // step 3: l = dp^{-1/2} (K_{:,p} - L L_{p,:}^T)
    oracle.column(p, column);
    const Eigen::RowVectorXd lp = L.row(p).head(i);
    // Column-by-column updates keep each entry a function of its own row only,
    // so identical points get bit-identical rows of L.
    ell.noalias() = column;
    for (Index k = 0; k < i; ++k) ell.noalias() -= L.col(k) * lp(k);
    ell *= s;

    // step 4: b = dp^{-1/2} (e_p - B L_{p,:}^T); B is nonzero only on pivot rows.
    R.row(i).head(i).setZero();
    if (i > 0) R.col(i).head(i).noalias() = -s * (R.topLeftCorner(i, i) * lp.transpose());
    R(i, i) = s;

    // step 5-6
    L.col(i) = ell;
    d.array() -= ell.array().square();
    d(p) = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (d(j) < breach)
        throw NumericError("pivoted_cholesky: residual diagonal became negative, matrix is not PSD");
      if (d(j) < floor) d(j) = 0.0;
    }

    if (omp) {
      const double coef = s * (options.omp_target(p) - w_running(p));
      w_running.noalias() += coef * ell;
    }

    out.pivots.push_back(p);
    is_pivot[static_cast<std::size_t>(p)] = 1;
    ++i;
    trace = d.sum();
    out.trace_history.push_back(trace);
  }

  out.L = L.leftCols(i);
  out.R = R.topLeftCorner(i, i);
  out.residual_trace = trace;
  return out;
}

FactorReport verify_factors(const Matrix& K, const CholeskyFactors& f) {
  if (K.rows() != K.cols() || K.rows() != f.L.rows())
    throw std::invalid_argument("verify_factors: shape mismatch");
  const Index n = K.rows();
  const Index m = f.rank();
  FactorReport r;
  r.norm_k = K.norm();
  r.trace_k = K.trace();
  Matrix residual = K - f.L * f.L.transpose();
  residual = 0.5 * (residual + residual.transpose()).eval();
  r.residual_trace = residual.trace();
  r.residual_min_eigenvalue =
      n > 0 ? Eigen::SelfAdjointEigenSolver<Matrix>(residual, Eigen::EigenvaluesOnly).eigenvalues()(0) : 0.0;
  r.norm_l = f.L.norm();
  r.norm_identity = std::sqrt(static_cast<double>(m));
  if (m == 0) return r;

  Matrix k_cols(n, m);
  Matrix k_pp(m, m);
  Matrix l_pp(m, m);
  for (Index c = 0; c < m; ++c) {
    const Index pc = f.pivots[static_cast<std::size_t>(c)];
    k_cols.col(c) = K.col(pc);
    l_pp.row(c) = f.L.row(pc);
  }
  for (Index c = 0; c < m; ++c) k_pp.row(c) = k_cols.row(f.pivots[static_cast<std::size_t>(c)]);

  r.kpi_r_minus_l = (k_cols * f.R - f.L).norm();
  r.rt_lpi_minus_identity = (f.R.transpose() * l_pp - Matrix::Identity(m, m)).norm();

  const Eigen::LDLT<Matrix> ldlt(k_pp);
  const Matrix inverse = ldlt.solve(Matrix::Identity(m, m));
  r.norm_inverse = inverse.norm();
  r.rrt_minus_inverse = (f.R * f.R.transpose() - inverse).norm();

  const Matrix nystrom = k_cols * ldlt.solve(k_cols.transpose());
  r.norm_nystrom = nystrom.norm();
  r.llt_minus_nystrom = (f.L * f.L.transpose() - nystrom).norm();
  return r;
}

}  // namespace kdm

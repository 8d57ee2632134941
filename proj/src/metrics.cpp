#include <kdm/metrics.hpp>

#include <cmath>

namespace kdm {

void ForecastRecord::validate() const {
  const Index d = realized.size();
  if (d == 0 || predicted_mean.size() != d || predicted_cov.rows() != d || predicted_cov.cols() != d)
    throw std::invalid_argument("forecast record: dimensions disagree");
  if (!realized.allFinite() || !predicted_mean.allFinite() || !predicted_cov.allFinite())
    throw std::invalid_argument("forecast record: non-finite entries");
}

double energy_score(const Vector& y, const Matrix& xs, const Vector& weights) {
  const Index m = xs.rows();
  if (m == 0) throw std::invalid_argument("energy_score: empty ensemble");
  if (weights.size() != m) throw std::invalid_argument("energy_score: weights must have one entry per member");
  if (xs.cols() != y.size()) throw std::invalid_argument("energy_score: dimension mismatch");
  if (!weights.allFinite() || !xs.allFinite() || !y.allFinite())
    throw std::invalid_argument("energy_score: non-finite input");

  double first = 0.0;
  for (Index i = 0; i < m; ++i) first += weights(i) * (y.transpose() - xs.row(i)).norm();
  double second = 0.0;
  for (Index i = 0; i < m; ++i) {
    if (weights(i) == 0.0) continue;
    for (Index j = i + 1; j < m; ++j) second += weights(i) * weights(j) * (xs.row(i) - xs.row(j)).norm();
  }
  const double md = static_cast<double>(m);
  // The double sum is symmetric with a zero diagonal.
  return first / md - second / (md * md);
}

double score_differential(const std::vector<double>& baseline, const std::vector<double>& candidate) {
  if (baseline.size() != candidate.size()) throw std::invalid_argument("score_differential: misaligned scores");
  if (baseline.empty()) throw std::invalid_argument("score_differential: no scores");
  double total = 0.0;
  for (std::size_t i = 0; i < baseline.size(); ++i) total += baseline[i] - candidate[i];
  return total / static_cast<double>(baseline.size());
}

double r2_oos(const std::vector<ForecastRecord>& records, const std::vector<Vector>& baseline_means) {
  if (records.empty()) throw std::invalid_argument("r2_oos: no records");
  if (records.size() != baseline_means.size()) throw std::invalid_argument("r2_oos: misaligned baseline");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < records.size(); ++t) {
    const ForecastRecord& r = records[t];
    if (r.realized.size() != r.predicted_mean.size() || baseline_means[t].size() != r.realized.size())
      throw std::invalid_argument("r2_oos: dimension mismatch");
    num += (r.realized - r.predicted_mean).squaredNorm();
    den += (r.realized - baseline_means[t]).squaredNorm();
  }
  if (!(den > 0.0)) throw std::invalid_argument("r2_oos: baseline errors are all zero");
  return 1.0 - num / den;
}

double r2_second_moment(const std::vector<ForecastRecord>& records, const std::vector<ForecastRecord>& baseline) {
  if (records.empty()) throw std::invalid_argument("r2_second_moment: no records");
  if (records.size() != baseline.size()) throw std::invalid_argument("r2_second_moment: misaligned baseline");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < records.size(); ++t) {
    records[t].validate();
    baseline[t].validate();
    if (records[t].realized != baseline[t].realized)
      throw std::invalid_argument("r2_second_moment: records disagree on the realized outcome");
    const Vector& y = records[t].realized;
    const Matrix outer = y * y.transpose();
    const auto moment = [](const ForecastRecord& r) {
      return Matrix(r.predicted_cov + r.predicted_mean * r.predicted_mean.transpose());
    };
    num += (outer - moment(records[t])).squaredNorm();
    den += (outer - moment(baseline[t])).squaredNorm();
  }
  if (!(den > 0.0)) throw std::invalid_argument("r2_second_moment: baseline errors are all zero");
  return 1.0 - num / den;
}

double dawid_sebastiani(const Vector& x, const Vector& mu, const Matrix& sigma) {
  const Index d = x.size();
  if (d == 0 || mu.size() != d || sigma.rows() != d || sigma.cols() != d)
    throw std::invalid_argument("dawid_sebastiani: dimension mismatch");
  if (!x.allFinite() || !mu.allFinite() || !sigma.allFinite())
    throw std::invalid_argument("dawid_sebastiani: non-finite input");

  Matrix s = 0.5 * (sigma + sigma.transpose());
  const double trace = s.trace();
  if (!(trace > 0.0)) throw NumericError("dawid_sebastiani: covariance has nonpositive trace");
  const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(s, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (!(min_eig > 1e-10 * trace)) s.diagonal().array() += 1e-8 * trace / static_cast<double>(d);

  const Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw NumericError("dawid_sebastiani: covariance is not positive definite");
  const Matrix& lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  const Vector white = llt.matrixL().solve(x - mu);
  return log_det + white.squaredNorm();
}

double excess_scoring_loss(const std::vector<ForecastRecord>& candidate, const std::vector<ForecastRecord>& baseline) {
  if (candidate.empty()) throw std::invalid_argument("excess_scoring_loss: no records");
  if (candidate.size() != baseline.size()) throw std::invalid_argument("excess_scoring_loss: misaligned records");
  double total = 0.0;
  for (std::size_t t = 0; t < candidate.size(); ++t) {
    candidate[t].validate();
    baseline[t].validate();
    if (candidate[t].realized != baseline[t].realized)
      throw std::invalid_argument("excess_scoring_loss: records disagree on the realized outcome");
    total += dawid_sebastiani(baseline[t].realized, baseline[t].predicted_mean, baseline[t].predicted_cov) -
             dawid_sebastiani(candidate[t].realized, candidate[t].predicted_mean, candidate[t].predicted_cov);
  }
  return total / static_cast<double>(candidate.size());
}

}  // namespace kdm

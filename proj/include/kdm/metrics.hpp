#pragma once

#include <kdm/common.hpp>

#include <vector>

namespace kdm {

/// One out-of-sample forecast: realized outcome and predicted first two moments.
struct ForecastRecord {
  Vector realized;
  Vector predicted_mean;
  Matrix predicted_cov;

  void validate() const;
};

/// Weighted energy score of the ensemble `xs` (rows) at outcome y:
///   (1/m) sum_i w_i |y - x_i| - (1/(2 m^2)) sum_{i,j} w_i w_j |x_i - x_j|.
double energy_score(const Vector& y, const Matrix& xs, const Vector& weights);

/// Mean of baseline minus candidate scores; positive favors the candidate.
double score_differential(const std::vector<double>& baseline, const std::vector<double>& candidate);

/// 1 - sum |y - mu|^2 / sum |y - mu_baseline|^2.
double r2_oos(const std::vector<ForecastRecord>& records, const std::vector<Vector>& baseline_means);

/// Out-of-sample R^2 of the predicted second moments Sigma + mu mu^T against y y^T (Frobenius).
double r2_second_moment(const std::vector<ForecastRecord>& records, const std::vector<ForecastRecord>& baseline);

/// log det Sigma + (x - mu)^T Sigma^{-1} (x - mu). Sigma is ridge-regularized by
/// 1e-8 trace(Sigma)/d when its Cholesky factorization fails.
double dawid_sebastiani(const Vector& x, const Vector& mu, const Matrix& sigma);

/// Mean Dawid-Sebastiani score of the baseline minus that of the candidate.
double excess_scoring_loss(const std::vector<ForecastRecord>& candidate, const std::vector<ForecastRecord>& baseline);

}  // namespace kdm

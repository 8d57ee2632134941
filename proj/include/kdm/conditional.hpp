#pragma once

#include <kdm/common.hpp>
#include <kdm/estimator.hpp>

#include <string_view>
#include <utility>

namespace kdm {

/// Row-aligned realizations (x_i, y_i) of a pair of random vectors.
struct JointDataset {
  Matrix x;
  Matrix y;

  Index size() const { return x.rows(); }
  Index dim_x() const { return x.cols(); }
  Index dim_y() const { return y.cols(); }
  void validate() const;
  /// Rows as points (x_i, y_i) of the product space.
  Matrix stacked() const;
};

/// How a single joint sample becomes samples of P = P_X (x) P_Y and Q = P_(X,Y).
///   ThreeSplit: 3n rows; z_P,i = (x_{2i-1}, y_{2i}), z_Q,i = (x_{2n+i}, y_{2n+i}).
///   Shifted:    n rows;  z_P,i = (x_i, y_{i+1}) with y_{n+1} = y_1, z_Q,i = (x_i, y_i).
/// The shifted scheme uses every row but its P and Q points are mutually dependent.
enum class SplitScheme { ThreeSplit, Shifted };

std::string_view to_string(SplitScheme scheme);
SplitScheme parse_split_scheme(std::string_view name);

std::pair<Dataset, Dataset> split_joint_sample(const JointDataset& joint, SplitScheme scheme);

struct ConditionalModel {
  KdmModel base;
  Matrix y_grid;  // auxiliary sample of P_Y, raw space
  SplitScheme scheme = SplitScheme::Shifted;
  Index dim_x = 0;

  Index dim_y() const { return y_grid.cols(); }
};

/// Default auxiliary grid: the y rows of the joint sample, reservoir-subsampled
/// down to at most `cap` rows.
Matrix default_y_grid(const JointDataset& joint, Index cap, std::uint64_t seed);

struct ConditionalFitOptions {
  SplitScheme scheme = SplitScheme::Shifted;
  bool standardize = false;
  Index y_grid_cap = 2000;
  std::uint64_t seed = 0;
  FitOptions fit;
};

/// Split samples, standardized with a transform estimated on the whole joint sample when requested.
std::pair<Dataset, Dataset> prepare_samples(const JointDataset& joint, const ConditionalFitOptions& options);

/// Splits, optionally standardizes, fits the base model and attaches the y grid.
ConditionalModel fit_conditional(const JointDataset& joint, const KernelSpec& kernel, double lambda,
                                 const ConditionalFitOptions& options = {},
                                 const PriorSpec& prior = PriorSpec::one());

struct ConditionalWeights {
  Vector weights;
  bool degenerate = false;  // every clipped ratio was zero; weights fell back to uniform
};

ConditionalWeights conditional_weights(const ConditionalModel& model, const PointRef& x);

/// Weights from raw ratio values: positive part, normalized (uniform when all clip to zero).
ConditionalWeights normalize_positive_part(const Vector& raw);

double conditional_expectation(const ConditionalModel& model, const PointRef& x, const Vector& f_values);

struct ConditionalMoments {
  Vector mean;
  Matrix covariance;
  bool degenerate = false;
};

ConditionalMoments conditional_moments(const ConditionalModel& model, const PointRef& x);
ConditionalMoments weighted_moments(const Matrix& points, const Vector& weights);

}  // namespace kdm

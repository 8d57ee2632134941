#pragma once

#include <kdm/common.hpp>
#include <kdm/conditional.hpp>

#include <array>
#include <optional>
#include <string_view>
#include <vector>

namespace kdm {

/// Bivariate test distributions for the independence study. Only
/// IndependentClouds has X and Y independent.
enum class Distribution { IndependentClouds, W, Diamond, Parabola, TwoParabola, Circle, Variance, Log };

inline constexpr std::array<Distribution, 8> kAllDistributions = {
    Distribution::IndependentClouds, Distribution::W,      Distribution::Diamond,  Distribution::Parabola,
    Distribution::TwoParabola,       Distribution::Circle, Distribution::Variance, Distribution::Log};

std::string_view to_string(Distribution d);
Distribution parse_distribution(std::string_view name);

/// Constant used when none is given: 4.2 for Circle, 0.5 for Diamond, 1 otherwise.
double default_constant(Distribution d);

/// n draws of (X, Y). `c` defaults to default_constant(d).
JointDataset sample_distribution(Distribution d, Index n, std::optional<double> c, std::uint64_t seed);

/// Random correlation matrix: G = A A^T with standard normal A, rescaled to unit diagonal.
Matrix random_correlation(Index dim, std::uint64_t seed);

struct MixtureConfig {
  int clusters = 1;
  Index dim_x = 2;
  Index dim_y = 2;
  double mean_range = 0.2;  // means ~ U(-mean_range, mean_range)
};

struct MixtureParams {
  std::vector<Vector> means;         // one (dim_x + dim_y)-vector per cluster
  std::vector<Matrix> correlations;  // unit-variance covariance per cluster
  Vector weights;                    // Dirichlet(1, ..., 1)
};

MixtureParams draw_mixture_params(const MixtureConfig& config, std::uint64_t seed);

struct MixtureSample {
  JointDataset data;
  std::vector<int> labels;
};

MixtureSample sample_mixture(const MixtureParams& params, Index dim_x, Index n, std::uint64_t seed);

/// Component index for a uniform draw u: the smallest j with w_1 + ... + w_j >= u.
int select_component(const Vector& weights, double u);

/// Draws the parameters and n rows in one call.
JointDataset sample_gaussian_mixture(const MixtureConfig& config, Index n, std::uint64_t seed);

}  // namespace kdm

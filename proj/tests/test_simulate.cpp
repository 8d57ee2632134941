#include <doctest.h>

#include <kdm/simulate.hpp>

#include "support.hpp"

using namespace kdm;
using kdm::testing::min_eigenvalue;

namespace {

double correlation(const Vector& a, const Vector& b) {
  const Eigen::ArrayXd ca = a.array() - a.mean();
  const Eigen::ArrayXd cb = b.array() - b.mean();
  return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

}  // namespace

TEST_CASE("names round-trip") {
  for (Distribution d : kAllDistributions) CHECK(parse_distribution(to_string(d)) == d);
  CHECK(parse_distribution("Two_Parabola") == Distribution::TwoParabola);
  CHECK(parse_distribution("clouds") == Distribution::IndependentClouds);
  CHECK_THROWS_AS(parse_distribution("spiral"), std::invalid_argument);
  CHECK(default_constant(Distribution::Circle) == 4.2);
  CHECK(default_constant(Distribution::Diamond) == 0.5);
  CHECK(default_constant(Distribution::Log) == 1.0);
}

TEST_CASE("generators are reproducible and seed-sensitive") {
  for (Distribution d : kAllDistributions) {
    const JointDataset a = sample_distribution(d, 200, std::nullopt, 42);
    const JointDataset b = sample_distribution(d, 200, std::nullopt, 42);
    const JointDataset c = sample_distribution(d, 200, std::nullopt, 43);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.x != c.x);
    CHECK(a.dim_x() == 1);
    CHECK(a.dim_y() == 1);
    CHECK(a.x.allFinite());
    CHECK(a.y.allFinite());
  }
  CHECK_THROWS_AS(sample_distribution(Distribution::Diamond, 10, 1.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_distribution(Distribution::W, 0, std::nullopt, 1), std::invalid_argument);
}

TEST_CASE("independent clouds are uncorrelated") {
  const JointDataset j = sample_distribution(Distribution::IndependentClouds, 100000, std::nullopt, 1);
  CHECK(std::abs(correlation(j.x.col(0), j.y.col(0))) <= 0.02);
}

TEST_CASE("variance channel: uncorrelated yet dependent") {
  const JointDataset j = sample_distribution(Distribution::Variance, 100000, 1.0, 2);
  CHECK(std::abs(correlation(j.x.col(0), j.y.col(0))) <= 0.02);
  const Vector x2 = j.x.col(0).array().square();
  const Vector y2 = j.y.col(0).array().square();
  CHECK(correlation(x2, y2) > 0.05);
}

TEST_CASE("circle concentrates near its ellipse") {
  const double c = 4.2;
  const JointDataset j = sample_distribution(Distribution::Circle, 10000, c, 3);
  const double mean = ((j.x.col(0).array() / c).square() + (j.y.col(0).array() / 4.2).square()).mean();
  CHECK(std::abs(mean - (1.0 + 1.0 / (c * c) + 1.0 / (4.2 * 4.2))) <= 0.15);
}

TEST_CASE("dependent generators show their signature moment") {
  const Index n = 100000;
  // Parabola-type dependence shows up in the correlation of Y with X^2.
  for (Distribution d : {Distribution::Parabola, Distribution::W, Distribution::Log}) {
    const JointDataset j = sample_distribution(d, n, std::nullopt, 4);
    const Vector x2 = j.x.col(0).array().square();
    CHECK(std::abs(correlation(x2, j.y.col(0))) > 0.05);
  }
}

TEST_CASE("random correlation matrices") {
  CHECK(random_correlation(1, 5) == Matrix::Ones(1, 1));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix c = random_correlation(4, seed);
    CHECK((c - c.transpose()).norm() == 0.0);
    CHECK((c.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(min_eigenvalue(c) >= -1e-10);
    CHECK(c.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("component selection by inverse CDF") {
  Vector w(3);
  w << 0.2, 0.5, 0.3;
  CHECK(select_component(w, 0.0) == 0);
  CHECK(select_component(w, 0.2) == 0);
  CHECK(select_component(w, 0.2000001) == 1);
  CHECK(select_component(w, 0.7) == 1);
  CHECK(select_component(w, 0.99) == 2);
  CHECK(select_component(w, 1.0) == 2);
}

TEST_CASE("mixture parameters and frequencies") {
  MixtureConfig config;
  config.clusters = 3;
  const MixtureParams params = draw_mixture_params(config, 7);
  REQUIRE(params.means.size() == 3);
  CHECK(std::abs(params.weights.sum() - 1.0) <= 1e-12);
  CHECK(params.weights.minCoeff() >= 0.0);
  for (const Vector& mu : params.means) {
    CHECK(mu.size() == 4);
    CHECK(mu.cwiseAbs().maxCoeff() < 0.2);
  }
  const MixtureSample s = sample_mixture(params, 2, 100000, 8);
  CHECK(s.data.dim_x() == 2);
  CHECK(s.data.dim_y() == 2);
  Vector freq = Vector::Zero(3);
  for (int label : s.labels) freq(label) += 1.0;
  freq /= 100000.0;
  CHECK((freq - params.weights).cwiseAbs().maxCoeff() <= 0.03);
}

TEST_CASE("single standard cluster has centered unit marginals") {
  MixtureParams params;
  params.means = {Vector::Zero(4)};
  params.correlations = {Matrix::Identity(4, 4)};
  params.weights = Vector::Ones(1);
  const Index n = 20000;
  const MixtureSample s = sample_mixture(params, 2, n, 9);
  Matrix all(n, 4);
  all << s.data.x, s.data.y;
  const double tol = 3.0 / std::sqrt(static_cast<double>(n));
  for (Index c = 0; c < 4; ++c) {
    CHECK(std::abs(all.col(c).mean()) <= tol);
    const double var = (all.col(c).array() - all.col(c).mean()).square().mean();
    CHECK(std::abs(var - 1.0) <= 0.05);
  }
}

TEST_CASE("mixture draws are reproducible") {
  MixtureConfig config;
  config.clusters = 2;
  const JointDataset a = sample_gaussian_mixture(config, 500, 11);
  const JointDataset b = sample_gaussian_mixture(config, 500, 11);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
}

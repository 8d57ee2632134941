#include <doctest.h>

#include <kdm/metrics.hpp>

#include "support.hpp"

using namespace kdm;
using kdm::testing::gaussian_matrix;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector r(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

ForecastRecord record(const Vector& y, const Vector& mu, const Matrix& sigma) { return {y, mu, sigma}; }

// Direct double sum over all ordered pairs.
double energy_reference(const Vector& y, const Matrix& xs, const Vector& w) {
  const double m = static_cast<double>(xs.rows());
  double first = 0.0, second = 0.0;
  for (Index i = 0; i < xs.rows(); ++i) {
    first += w(i) * (y.transpose() - xs.row(i)).norm();
    for (Index j = 0; j < xs.rows(); ++j) second += w(i) * w(j) * (xs.row(i) - xs.row(j)).norm();
  }
  return first / m - second / (2.0 * m * m);
}

}  // namespace

TEST_CASE("energy score examples") {
  Matrix one(1, 2);
  one << 3.0, 4.0;
  CHECK(energy_score(Vector::Zero(2), one, Vector::Ones(1)) == 5.0);

  Matrix same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  CHECK(energy_score(vec({1, 2}), same, vec({0.3, 2.0, 1.1})) == 0.0);

  Matrix two(2, 1);
  two << 1.0, -1.0;
  CHECK(energy_score(vec({0.0}), two, Vector::Ones(2)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(energy_score(vec({0.0}), two, Vector::Ones(3)), std::invalid_argument);
}

TEST_CASE("property: energy score agrees with the double-sum reference") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 10; ++t) {
    const Matrix xs = gaussian_matrix(5 + t, 3, rng);
    const Vector y = gaussian_matrix(3, 1, rng).col(0);
    Vector w(xs.rows());
    for (Index i = 0; i < w.size(); ++i) w(i) = u(rng);
    CHECK(energy_score(y, xs, w) == doctest::Approx(energy_reference(y, xs, w)).epsilon(1e-12));
  }
}

TEST_CASE("property: energy score is translation invariant") {
  Matrix xs(3, 2);
  xs << 0.0, 1.0, 2.0, -1.0, 0.5, 0.5;
  const Vector y = vec({1.0, 0.0});
  const Vector shift = vec({8.0, -4.0});
  const Matrix moved = xs.rowwise() + shift.transpose();
  CHECK(energy_score(y + shift, moved, Vector::Ones(3)) == energy_score(y, xs, Vector::Ones(3)));
}

TEST_CASE("score differential") {
  CHECK(score_differential({1.2}, {0.7}) == doctest::Approx(0.5));
  CHECK(score_differential({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK_THROWS_AS(score_differential({1.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(score_differential({}, {}), std::invalid_argument);
}

TEST_CASE("out-of-sample R2") {
  const Matrix i2 = Matrix::Identity(2, 2);
  std::vector<ForecastRecord> recs = {record(vec({1, 2}), vec({0, 0}), i2), record(vec({-1, 3}), vec({1, 1}), i2)};
  const std::vector<Vector> base = {vec({0, 0}), vec({1, 1})};
  CHECK(r2_oos(recs, base) == 0.0);

  std::vector<ForecastRecord> exact = recs;
  for (ForecastRecord& r : exact) r.predicted_mean = r.realized;
  CHECK(r2_oos(exact, base) == 1.0);

  // errors half the baseline's
  std::vector<ForecastRecord> half = recs;
  for (std::size_t i = 0; i < half.size(); ++i) half[i].predicted_mean = 0.5 * (half[i].realized + base[i]);
  CHECK(r2_oos(half, base) == doctest::Approx(0.75).epsilon(1e-14));

  std::vector<Vector> perfect_base = {recs[0].realized, recs[1].realized};
  CHECK_THROWS_AS(r2_oos(recs, perfect_base), std::invalid_argument);
}

TEST_CASE("property: out-of-sample R2 never exceeds one") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<ForecastRecord> recs;
    std::vector<Vector> base;
    for (int i = 0; i < 5; ++i) {
      recs.push_back(record(gaussian_matrix(2, 1, rng).col(0), gaussian_matrix(2, 1, rng).col(0), Matrix::Identity(2, 2)));
      base.push_back(gaussian_matrix(2, 1, rng).col(0));
    }
    CHECK(r2_oos(recs, base) <= 1.0);
  }
}

TEST_CASE("second-moment R2") {
  const ForecastRecord kdm = record(vec({2.0}), vec({0.0}), Matrix::Constant(1, 1, 4.0));
  const ForecastRecord base = record(vec({2.0}), vec({0.0}), Matrix::Constant(1, 1, 1.0));
  CHECK(r2_second_moment({kdm}, {base}) == 1.0);
  CHECK(r2_second_moment({base}, {base}) == 0.0);
}

TEST_CASE("Dawid-Sebastiani score") {
  CHECK(dawid_sebastiani(vec({1, 2, 3}), vec({1, 2, 3}), Matrix::Identity(3, 3)) == 0.0);
  CHECK(dawid_sebastiani(vec({1.0}), vec({0.0}), Matrix::Identity(1, 1)) == 1.0);
  CHECK(dawid_sebastiani(vec({1, 1}), vec({0, 0}), 2.0 * Matrix::Identity(2, 2)) ==
        doctest::Approx(std::log(4.0) + 1.0).epsilon(1e-14));
  CHECK(dawid_sebastiani(vec({1, 1}), vec({0, 0}), 2.0 * Matrix::Identity(2, 2)) ==
        doctest::Approx(2.3863).epsilon(1e-4));

  // rank-deficient covariance is ridge-regularized, the result stays finite
  Matrix singular(2, 2);
  singular << 1, 1, 1, 1;
  CHECK(std::isfinite(dawid_sebastiani(vec({1, 1}), vec({0, 0}), singular)));
  CHECK_THROWS_AS(dawid_sebastiani(vec({1}), vec({0, 0}), Matrix::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("property: the Dawid-Sebastiani excess over the mean is the squared Mahalanobis distance") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const Matrix a = gaussian_matrix(3, 3, rng);
    const Matrix sigma = a * a.transpose() + 0.5 * Matrix::Identity(3, 3);
    const Vector mu = gaussian_matrix(3, 1, rng).col(0);
    const Vector x = gaussian_matrix(3, 1, rng).col(0);
    const double diff = dawid_sebastiani(x, mu, sigma) - dawid_sebastiani(mu, mu, sigma);
    const double maha = (x - mu).dot(sigma.ldlt().solve(x - mu));
    CHECK(diff == doctest::Approx(maha).epsilon(1e-10));
    CHECK(diff >= 0.0);
  }
}

TEST_CASE("excess scoring loss") {
  const ForecastRecord a = record(vec({1, 1}), vec({0, 0}), 2.0 * Matrix::Identity(2, 2));
  CHECK(excess_scoring_loss({a}, {a}) == 0.0);
  // baseline scores 3 and candidate scores 1 in one dimension
  const ForecastRecord cand = record(vec({1.0}), vec({0.0}), Matrix::Identity(1, 1));
  const ForecastRecord base = record(vec({1.0}), vec({1.0 - std::sqrt(3.0)}), Matrix::Identity(1, 1));
  CHECK(excess_scoring_loss({cand}, {base}) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(excess_scoring_loss({cand}, {}), std::invalid_argument);
  ForecastRecord bad = cand;
  bad.predicted_cov = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hoif/simple.hpp"
#include "hoif/truth.hpp"

using namespace hoif;

namespace {
Observation obs1(double x, double a, double y) {
  Observation o;
  o.x = VectorXd::Constant(1, x);
  o.a = a;
  o.y = y;
  return o;
}
}  // namespace

TEST_CASE("two-observation difference estimator is the half cross product") {
  Dataset d;
  d.obs = {obs1(0.2, 1.0, 2.0), obs1(0.7, 0.0, 0.5)};
  d.split = {Split::estimation, Split::estimation};
  const auto r = difference_estimator(d);
  CHECK(r.value == doctest::Approx((2.0 - 0.5) * (1.0 - 0.0) / 2.0).epsilon(1e-15));
  CHECK_FALSE(r.dropped_last);
}

TEST_CASE("odd samples drop the trailing order statistic") {
  Dataset d;
  d.obs = {obs1(0.2, 1.0, 2.0), obs1(0.7, 0.0, 0.5), obs1(0.9, 1.0, 9.0)};
  d.split = {Split::estimation, Split::estimation, Split::estimation};
  const auto r = difference_estimator(d);
  CHECK(r.dropped_last);
  CHECK(r.value == doctest::Approx((2.0 - 0.5) * (1.0 - 0.0) / 2.0).epsilon(1e-15));
}

TEST_CASE("difference estimator requires univariate covariates") {
  Dataset d;
  Observation o;
  o.x = VectorXd::Constant(2, 0.5);
  d.obs = {o, o};
  d.split = {Split::estimation, Split::estimation};
  CHECK_THROWS_AS(difference_estimator(d), std::invalid_argument);
}

TEST_CASE("difference estimator is unbiased for flat regressions") {
  // constant b and p make the spacing term vanish identically, so the mean
  // equals the conditional covariance; four standard errors of slack
  SmoothTruth truth;
  truth.d = 1;
  truth.b = [](const VectorXd&) { return 0.3; };
  truth.p = [](const VectorXd&) { return -0.2; };
  truth.sigma_y = 0.5;
  truth.sigma_a = 0.5;
  truth.cor_ay = 0.6;
  const double psi = 0.6 * 0.5 * 0.5;
  std::vector<double> vals;
  for (int rep = 0; rep < 4000; ++rep) {
    Dataset d = truth.generate(20, 1000 + static_cast<std::uint64_t>(rep));
    d.split.assign(d.obs.size(), Split::estimation);
    vals.push_back(difference_estimator(d).value);
  }
  const double se = std::sqrt(variance_of(vals) / static_cast<double>(vals.size()));
  CHECK(std::fabs(mean_of(vals) - psi) < 4.0 * se + 1e-12);
}

TEST_CASE("subcube variance: exact two-point case and missing-pair error") {
  Dataset d;
  d.obs = {obs1(0.1, 0, 1.0), obs1(0.15, 0, 4.0)};
  d.split = {Split::estimation, Split::estimation};
  CHECK(subcube_variance(d, 4, 7) == doctest::Approx(4.5).epsilon(1e-15));  // (3)^2/2
  Dataset spread;
  spread.obs = {obs1(0.1, 0, 1.0), obs1(0.9, 0, 4.0)};
  spread.split = {Split::estimation, Split::estimation};
  CHECK_THROWS_AS(subcube_variance(spread, 4, 7), std::runtime_error);
}

TEST_CASE("subcube variance is unbiased under a flat regression") {
  SmoothTruth truth;
  truth.d = 1;
  truth.b = [](const VectorXd&) { return 1.0; };
  truth.p = [](const VectorXd&) { return 0.5; };
  truth.sigma_y = 0.7;
  std::vector<double> vals;
  for (int rep = 0; rep < 3000; ++rep) {
    Dataset d = truth.generate(40, 5000 + static_cast<std::uint64_t>(rep));
    d.split.assign(d.obs.size(), Split::estimation);
    vals.push_back(subcube_variance(d, 16, 3));
  }
  const double se = std::sqrt(variance_of(vals) / static_cast<double>(vals.size()));
  CHECK(std::fabs(mean_of(vals) - 0.49) < 4.0 * se + 1e-12);
}

TEST_CASE("estimators ignore observation relabeling when cubes hold pairs") {
  Dataset d;
  d.obs = {obs1(0.05, 1, 2.0), obs1(0.10, 0, 1.0), obs1(0.30, 1, 3.0), obs1(0.35, 0, 2.5)};
  d.split.assign(4, Split::estimation);
  const double v1 = subcube_variance(d, 4, 11);
  const double t1 = subcube_tau(d, 4, 11);
  Dataset shuffled;
  for (std::size_t i : {2u, 0u, 3u, 1u}) {
    shuffled.obs.push_back(d.obs[i]);
    shuffled.split.push_back(Split::estimation);
  }
  CHECK(subcube_variance(shuffled, 4, 11) == doctest::Approx(v1).epsilon(1e-15));
  CHECK(subcube_tau(shuffled, 4, 11) == doctest::Approx(t1).epsilon(1e-15));
}

TEST_CASE("subcube partition covers and separates for every size") {
  Rng rng(2);
  Dataset d;
  for (int i = 0; i < 40; ++i) d.obs.push_back(obs1(rng.next_uniform(), 0, 0));
  d.split.assign(40, Split::estimation);
  for (long k : {1L, 2L, 5L, 16L, 1600L}) {
    SubcubeIndex idx = SubcubeIndex::build(d, k);
    std::size_t total = 0;
    for (const auto& [cell, members] : idx.occupants) {
      CHECK(cell >= 0);
      CHECK(cell < idx.n_cells);
      total += members.size();
    }
    CHECK(total == 40);
  }
}

TEST_CASE("subcube tau recovers a constant treatment effect exactly") {
  // response m(X) + v*A with m constant on each cube and no noise
  const double v = 1.37;
  Dataset d;
  int toggle = 0;
  for (int c = 0; c < 8; ++c) {
    const double base = 0.1 * c;  // m constant within the cube
    for (int rep = 0; rep < 2; ++rep) {
      const double x = (c + 0.25 + 0.5 * rep) / 8.0;
      const double a = (toggle++ % 2 == 0) ? 1.0 : 0.0;
      d.obs.push_back(obs1(x, a, base + v * a));
    }
  }
  d.split.assign(d.obs.size(), Split::estimation);
  CHECK(subcube_tau(d, 8, 5) == doctest::Approx(v).epsilon(1e-13));
}

TEST_CASE("subcube tau rejects cubes without treatment variation") {
  Dataset d;
  d.obs = {obs1(0.1, 1, 2.0), obs1(0.12, 1, 1.0)};
  d.split = {Split::estimation, Split::estimation};
  CHECK_THROWS_AS(subcube_tau(d, 4, 1), std::runtime_error);
}

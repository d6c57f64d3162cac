#include <doctest.h>

#include <cmath>

#include "treelet/estimator.hpp"

using namespace treelet;

TEST_CASE("iteration count") {
  // e^3 ln(10) / 0.25 = 184.99...
  CHECK(compute_niter(0.5, 0.1, 3) == 185);
  CHECK(compute_niter(0.5, 1.0 - 1e-12, 3) == 1);
  const auto a = compute_niter(0.2, 0.05, 4);
  const auto b = compute_niter(0.1, 0.05, 4);
  CHECK(std::abs(double(b) / double(a) - 4.0) < 0.01);
  CHECK(compute_niter(0.5, 0.1, 3, 0.5) == 93);
}

TEST_CASE("groups") {
  CHECK(default_groups(0.1, 185) == 3);
  CHECK(default_groups(0.1, 2) == 2);
  CHECK(default_groups(0.9, 10) == 1);
}

TEST_CASE("scaling") {
  CHECK(scale_factor(1) == 1.0);
  CHECK(scale_colorful(6, 3) == doctest::Approx(27.0));
  CHECK(scale_factor(5) == doctest::Approx(3125.0 / 120.0));
  CHECK(scale_colorful(0, 7) == 0.0);
}

TEST_CASE("median of means") {
  const std::vector<double> same(12, 4.5);
  CHECK(median_of_means(same, 3) == 4.5);
  const std::vector<double> spike{0, 0, 0, 100};
  CHECK(median_of_means(spike, 4) == 0.0);
  CHECK(median_of_means(spike, 1) == 25.0);
  std::vector<double> means;
  const std::vector<double> seven{1, 2, 3, 4, 5, 6, 7};
  median_of_means(seven, 3, &means);
  // sizes 3, 2, 2
  REQUIRE(means.size() == 3);
  CHECK(means[0] == 2.0);
  CHECK(means[1] == 4.5);
  CHECK(means[2] == 6.5);
  CHECK_THROWS_AS(median_of_means(seven, 0), std::invalid_argument);
  CHECK_THROWS_AS(median_of_means(std::vector<double>{}, 1), std::invalid_argument);
}

TEST_CASE("validation") {
  EstimatorConfig c;
  c.k = 3;
  CHECK_NOTHROW(validate(c));
  c.epsilon = 0.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.epsilon = 1.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.epsilon = 0.5;
  c.delta = 1.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.delta = 0.1;
  c.k = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
}

TEST_CASE("estimate drives the callback once per iteration") {
  EstimatorConfig c;
  c.k = 3;
  c.niter = 10;
  c.seed = 42;
  std::vector<std::uint64_t> seen;
  const auto e = estimate(c, [&](std::uint64_t s) {
    seen.push_back(s);
    return Count(2);
  });
  CHECK(e.niter == 10);
  CHECK(seen.size() == 10);
  CHECK(seen[3] == iteration_seed(42, 3));
  CHECK(e.value == doctest::Approx(9.0));
  for (double x : e.iterations) CHECK(x == doctest::Approx(9.0));
}

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "treelet/common.hpp"

namespace treelet {

struct EstimatorConfig {
  double epsilon = 0.5;
  double delta = 0.1;
  std::size_t k = 0;
  std::size_t niter = 0;   // 0: derive from (epsilon, delta, k)
  std::size_t groups = 0;  // 0: max(1, ceil(ln(1/delta))), capped at niter
  double niter_factor = 1.0;
  std::uint64_t seed = 1;
};

/// Throws std::invalid_argument unless 0 < epsilon < 1, 0 < delta < 1, k >= 1.
void validate(const EstimatorConfig& config);

/// max(1, ceil(factor * e^k * ln(1/delta) / epsilon^2)).
std::size_t compute_niter(double epsilon, double delta, std::size_t k, double factor = 1.0);

/// max(1, ceil(ln(1/delta))) capped at niter.
std::size_t default_groups(double delta, std::size_t niter);

/// k^k / k!, the inverse probability that k vertices receive k distinct colors.
double scale_factor(std::size_t k);
double scale_colorful(double raw, std::size_t k);

/// Groups of floor(n/t) consecutive values, the first n mod t groups one larger;
/// returns the median of the group means (mean of the middle two when t is even).
double median_of_means(std::span<const double> values, std::size_t t, std::vector<double>* group_means = nullptr);

/// Seed of the j-th coloring.
inline std::uint64_t iteration_seed(std::uint64_t master, std::size_t j) noexcept { return mix64(master, j); }

struct Estimate {
  std::vector<double> iterations;  // C^(j), already scaled
  std::vector<double> group_means;
  double value = 0.0;
  std::size_t niter = 0;
  std::size_t groups = 0;
};

/// Runs niter colorings. `colorful_copies(seed)` returns the colorful copy count for
/// the coloring with that seed.
Estimate estimate(const EstimatorConfig& config, const std::function<Count(std::uint64_t)>& colorful_copies);

}  // namespace treelet

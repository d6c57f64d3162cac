#include "treelet/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace treelet {

void validate(const EstimatorConfig& c) {
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
  if (c.k == 0) throw std::invalid_argument("k must be >= 1");
  if (!(c.niter_factor > 0.0)) throw std::invalid_argument("niter factor must be positive");
}

std::size_t compute_niter(double epsilon, double delta, std::size_t k, double factor) {
  const double n = factor * std::exp(static_cast<double>(k)) * std::log(1.0 / delta) / (epsilon * epsilon);
  if (!(n > 1.0)) return 1;
  return static_cast<std::size_t>(std::ceil(n));
}

std::size_t default_groups(double delta, std::size_t niter) {
  const double t = std::ceil(std::log(1.0 / delta));
  const std::size_t g = t > 1.0 ? static_cast<std::size_t>(t) : 1;
  return std::max<std::size_t>(1, std::min(g, niter));
}

double scale_factor(std::size_t k) {
  // k^k / k! as a product of k/i keeps intermediate values small.
  double f = 1.0;
  for (std::size_t i = 1; i <= k; ++i) f *= static_cast<double>(k) / static_cast<double>(i);
  return f;
}

double scale_colorful(double raw, std::size_t k) { return raw * scale_factor(k); }

double median_of_means(std::span<const double> values, std::size_t t, std::vector<double>* group_means) {
  if (values.empty()) throw std::invalid_argument("median_of_means: no values");
  if (t == 0 || t > values.size()) throw std::invalid_argument("median_of_means: need 1 <= t <= number of values");
  const std::size_t base = values.size() / t, extra = values.size() % t;
  std::vector<double> means;
  means.reserve(t);
  std::size_t pos = 0;
  for (std::size_t j = 0; j < t; ++j) {
    const std::size_t n = base + (j < extra ? 1 : 0);
    const double sum = std::accumulate(values.begin() + static_cast<std::ptrdiff_t>(pos),
                                       values.begin() + static_cast<std::ptrdiff_t>(pos + n), 0.0);
    means.push_back(sum / static_cast<double>(n));
    pos += n;
  }
  if (group_means) *group_means = means;
  std::sort(means.begin(), means.end());
  return t % 2 ? means[t / 2] : 0.5 * (means[t / 2 - 1] + means[t / 2]);
}

Estimate estimate(const EstimatorConfig& config, const std::function<Count(std::uint64_t)>& colorful_copies) {
  validate(config);
  Estimate est;
  est.niter = config.niter ? config.niter : compute_niter(config.epsilon, config.delta, config.k, config.niter_factor);
  est.groups = config.groups ? std::min(config.groups, est.niter) : default_groups(config.delta, est.niter);
  est.iterations.reserve(est.niter);
  for (std::size_t j = 0; j < est.niter; ++j)
    est.iterations.push_back(scale_colorful(colorful_copies(iteration_seed(config.seed, j)), config.k));
  est.value = median_of_means(est.iterations, est.groups, &est.group_means);
  return est;
}

}  // namespace treelet

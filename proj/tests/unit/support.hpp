#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "stepdeconv/kernels.hpp"
#include "stepdeconv/signal.hpp"

namespace testing {

inline std::vector<stepdeconv::Kernel> bounded_kernels() {
  using stepdeconv::Kernel;
  return {Kernel::gaussian(),      Kernel::laplace(),       Kernel::boxcar(),
          Kernel::polynomial(0),   Kernel::polynomial(2),   Kernel::tent_power(2),
          Kernel::tent_power(3)};
}

// Canonical step function with k jumps, jumps separated by at least
// `min_gap` and kept `margin` away from 0 and 1, adjacent levels differing
// by at least `min_height`.
inline stepdeconv::StepFunction random_step(std::mt19937_64& rng, std::size_t k, double min_gap = 0.05,
                                            double margin = 0.05, double min_height = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> jumps;
  while (jumps.size() < k) {
    jumps.clear();
    for (std::size_t i = 0; i < k; ++i) jumps.push_back(margin + (1.0 - 2.0 * margin) * u(rng));
    std::sort(jumps.begin(), jumps.end());
    bool ok = true;
    for (std::size_t i = 1; i < k; ++i) ok = ok && jumps[i] - jumps[i - 1] >= min_gap;
    if (!ok) jumps.clear();
    if (k == 0) break;
  }
  std::vector<double> levels{4.0 * u(rng) - 2.0};
  for (std::size_t i = 0; i < k; ++i) {
    const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
    levels.push_back(levels.back() + sign * (min_height + 1.5 * u(rng)));
    if (std::abs(levels.back()) > 4.0) levels.back() = levels[levels.size() - 2] - sign * (min_height + u(rng));
  }
  return stepdeconv::StepFunction(levels, jumps);
}

// Midpoint Riemann sum of g over [a, b] with m cells.
template <class F>
double riemann(F&& g, double a, double b, std::size_t m) {
  const double h = (b - a) / static_cast<double>(m);
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += g(a + (static_cast<double>(i) + 0.5) * h);
  return s * h;
}

}  // namespace testing

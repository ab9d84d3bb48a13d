#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stepdeconv/kernels.hpp"
#include "stepdeconv/signal.hpp"

namespace stepdeconv {

// Design density h on [0, 1]: uniform, or piecewise linear through
// (knots[i], values[i]). Piecewise-linear input is rescaled to unit mass.
class DesignDensity {
 public:
  enum class Family { Uniform, PiecewiseLinear };

  static DesignDensity uniform();
  static DesignDensity piecewise_linear(std::vector<double> knots, std::vector<double> values);

  Family family() const noexcept { return family_; }
  std::span<const double> knots() const noexcept { return knots_; }
  std::span<const double> values() const noexcept { return values_; }
  // Bounds c_l <= h <= c_u on [0, 1].
  double lower_bound() const noexcept;
  double upper_bound() const noexcept;

  double pdf(double x) const;
  // H(x), the design distribution function.
  double cdf(double x) const;
  // H^{-1}(u) for u in [0, 1].
  double inverse_cdf(double u) const;

  bool operator==(const DesignDensity&) const = default;

 private:
  DesignDensity(Family family, std::vector<double> knots, std::vector<double> values);

  Family family_;
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> cumulative_;
};

enum class DesignKind { Fixed, Random };

struct DesignSpec {
  DesignKind kind = DesignKind::Fixed;
  DesignDensity density = DesignDensity::uniform();
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  std::optional<Kernel> kernel;
  std::optional<StepFunction> truth;
  std::optional<double> noise_sd;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return x.size(); }
  // Throws ContractViolation unless |x| == |y| and x is ascending.
  void validate() const;
};

// Fixed kind: x_i = H^{-1}((i - 1/2) / n). Random kind: n sorted i.i.d. draws
// from h by inverse-CDF sampling, seeded by spec.seed.
std::vector<double> generate_design(const DesignSpec& spec, std::size_t n);

// (Phi f)(x) = sum_j b_j Delta(x, tau_{j-1}, tau_j).
double forward_eval(const Kernel& k, const StepFunction& f, double x);
std::vector<double> forward_curve(const Kernel& k, const StepFunction& f, std::span<const double> xs);

// y_i = (Phi f)(x_i) + eps_i with eps_i ~ N(0, sigma^2) drawn from a
// generator seeded by `seed`. Deterministic in (spec, n, sigma, seed).
Dataset simulate_dataset(const Kernel& k, const StepFunction& f, const DesignSpec& spec,
                         std::size_t n, double sigma, std::uint64_t seed);

// ||v||_n = sqrt(n^{-1} sum v_i^2).
double empirical_norm(std::span<const double> values);
double empirical_norm_squared(std::span<const double> values);
// <u, v>_n = n^{-1} sum u_i v_i.
double empirical_inner(std::span<const double> u, std::span<const double> v);

}  // namespace stepdeconv

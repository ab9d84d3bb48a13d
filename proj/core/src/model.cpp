#include "stepdeconv/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "stepdeconv/error.hpp"

namespace stepdeconv {

DesignDensity::DesignDensity(Family family, std::vector<double> knots, std::vector<double> values)
    : family_(family), knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() < 2 || knots_.size() != values_.size())
    throw ContractViolation("density needs matching knots and values (at least two)");
  if (knots_.front() != 0.0 || knots_.back() != 1.0)
    throw ContractViolation("density knots must span exactly [0, 1]");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1])) throw ContractViolation("density knots must be increasing");
  for (double v : values_)
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractViolation("density values must be positive");
  double mass = 0.0;
  for (std::size_t i = 1; i < knots_.size(); ++i)
    mass += 0.5 * (values_[i] + values_[i - 1]) * (knots_[i] - knots_[i - 1]);
  for (double& v : values_) v /= mass;
  cumulative_.assign(knots_.size(), 0.0);
  for (std::size_t i = 1; i < knots_.size(); ++i)
    cumulative_[i] = cumulative_[i - 1] + 0.5 * (values_[i] + values_[i - 1]) * (knots_[i] - knots_[i - 1]);
  cumulative_.back() = 1.0;
}

DesignDensity DesignDensity::uniform() { return DesignDensity(Family::Uniform, {0.0, 1.0}, {1.0, 1.0}); }

DesignDensity DesignDensity::piecewise_linear(std::vector<double> knots, std::vector<double> values) {
  return DesignDensity(Family::PiecewiseLinear, std::move(knots), std::move(values));
}

double DesignDensity::lower_bound() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
double DesignDensity::upper_bound() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

double DesignDensity::pdf(double x) const {
  if (x < 0.0 || x > 1.0) return 0.0;
  if (family_ == Family::Uniform) return 1.0;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - knots_.begin()), knots_.size() - 1);
  i = std::max<std::size_t>(i, 1) - 1;
  const double w = (x - knots_[i]) / (knots_[i + 1] - knots_[i]);
  return values_[i] + w * (values_[i + 1] - values_[i]);
}

double DesignDensity::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (family_ == Family::Uniform) return x;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  const double t = x - knots_[i];
  const double slope = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
  return cumulative_[i] + values_[i] * t + 0.5 * slope * t * t;
}

double DesignDensity::inverse_cdf(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw ContractViolation("inverse_cdf needs u in [0, 1]");
  if (family_ == Family::Uniform) return u;
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
  i = std::clamp<std::size_t>(i, 1, knots_.size() - 1) - 1;
  const double slope = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
  const double r = u - cumulative_[i];
  // Root of h_i t + slope t^2 / 2 = r in the cancellation-free form.
  const double t = 2.0 * r / (values_[i] + std::sqrt(values_[i] * values_[i] + 2.0 * slope * r));
  return std::clamp(knots_[i] + t, knots_[i], knots_[i + 1]);
}

void Dataset::validate() const {
  if (x.size() != y.size()) throw ContractViolation("dataset x and y lengths differ");
  if (!std::is_sorted(x.begin(), x.end())) throw ContractViolation("dataset x must be ascending");
}

std::vector<double> generate_design(const DesignSpec& spec, std::size_t n) {
  if (n == 0) throw ContractViolation("design needs n >= 1");
  std::vector<double> x(n);
  if (spec.kind == DesignKind::Fixed) {
    for (std::size_t i = 0; i < n; ++i)
      x[i] = spec.density.inverse_cdf((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  } else {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto& xi : x) xi = spec.density.inverse_cdf(unif(rng));
    std::sort(x.begin(), x.end());
  }
  return x;
}

double forward_eval(const Kernel& k, const StepFunction& f, double x) {
  const auto levels = f.levels();
  const auto jumps = f.jumps();
  constexpr double inf = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const double a = j == 0 ? -inf : jumps[j - 1];
    const double b = j == jumps.size() ? inf : jumps[j];
    sum += levels[j] * delta_phi(k, x, a, b);
  }
  return sum;
}

std::vector<double> forward_curve(const Kernel& k, const StepFunction& f, std::span<const double> xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = forward_eval(k, f, xs[i]);
  return out;
}

Dataset simulate_dataset(const Kernel& k, const StepFunction& f, const DesignSpec& spec,
                         std::size_t n, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ContractViolation("noise level sigma must be >= 0");
  Dataset d;
  d.x = generate_design(spec, n);
  d.y = forward_curve(k, f, d.x);
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& yi : d.y) yi += noise(rng);
  }
  d.kernel = k;
  d.truth = f;
  d.noise_sd = sigma;
  d.seed = seed;
  return d;
}

double empirical_norm_squared(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("empirical norm of an empty vector");
  double s = 0.0;
  for (double v : values) s += v * v;
  return s / static_cast<double>(values.size());
}

double empirical_norm(std::span<const double> values) { return std::sqrt(empirical_norm_squared(values)); }

double empirical_inner(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ContractViolation("empirical inner product needs equal lengths");
  if (u.empty()) throw ContractViolation("empirical inner product of empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s / static_cast<double>(u.size());
}

}  // namespace stepdeconv

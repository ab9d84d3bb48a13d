#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace stepdeconv {

// Flat parameter vector (b_1, tau_1, b_2, ..., tau_k, b_{k+1}) of length 2k+1.
class ThetaVector {
 public:
  ThetaVector() : values_{0.0} {}
  explicit ThetaVector(std::vector<double> values);

  std::size_t num_jumps() const noexcept { return values_.size() / 2; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  // i-th level (0-based), i in [0, k].
  double level(std::size_t i) const { return values_[2 * i]; }
  // i-th jump (0-based), i in [0, k).
  double jump(std::size_t i) const { return values_[2 * i + 1]; }

  bool operator==(const ThetaVector&) const = default;

 private:
  std::vector<double> values_;
};

// Right-continuous step function sum_i b_i 1[tau_{i-1}, tau_i) with
// tau_0 = -inf, tau_{k+1} = +inf and interior jumps 0 < tau_1 < ... < tau_k < 1.
// Construction canonicalizes: adjacent equal levels are merged so every
// stored jump has nonzero height.
class StepFunction {
 public:
  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

  StepFunction() : levels_{0.0} {}
  StepFunction(std::vector<double> levels, std::vector<double> jumps, double bound = kUnbounded);

  static StepFunction constant(double level, double bound = kUnbounded);
  static StepFunction from_theta(const ThetaVector& theta, double bound = kUnbounded);

  ThetaVector theta() const;

  double operator()(double x) const;

  std::span<const double> levels() const noexcept { return levels_; }
  std::span<const double> jumps() const noexcept { return jumps_; }
  double bound() const noexcept { return bound_; }
  std::size_t num_jumps() const noexcept { return jumps_.size(); }
  // J_#(f) = number of jumps + 1.
  std::size_t jump_count() const noexcept { return jumps_.size() + 1; }
  // Smallest |b_{i+1} - b_i|; +inf when there are no jumps.
  double min_jump_height() const noexcept;
  double sup_norm() const noexcept;

  // f(. - s). Throws ContractViolation if a jump leaves (0, 1).
  StepFunction shifted(double s) const;

  // Flat record: k, then theta, then the bound R.
  std::vector<double> to_record() const;
  static StepFunction from_record(std::span<const double> record);

  bool operator==(const StepFunction&) const = default;

 private:
  std::vector<double> levels_;
  std::vector<double> jumps_;
  double bound_ = kUnbounded;
};

inline double evaluate(const StepFunction& f, double x) { return f(x); }

std::vector<double> jump_set(const StepFunction& f);

// Hausdorff distance between the jump sets. If either set is empty the
// distance is +inf: a missing jump counts as maximally wrong.
double hausdorff_jump_distance(const StepFunction& f, const StepFunction& g);

// Exact L2 norm of f - g over [lo, hi].
double l2_distance(const StepFunction& f, const StepFunction& g, double lo, double hi);

// alpha f + beta g on the common refinement of both jump sets.
StepFunction linear_combination(double alpha, const StepFunction& f, double beta,
                                const StepFunction& g);

}  // namespace stepdeconv

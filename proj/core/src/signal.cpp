#include "stepdeconv/signal.hpp"

#include <algorithm>
#include <cmath>

#include "stepdeconv/error.hpp"

namespace stepdeconv {

ThetaVector::ThetaVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() % 2 != 1)
    throw ContractViolation("theta vector must have odd length 2k+1");
}

StepFunction::StepFunction(std::vector<double> levels, std::vector<double> jumps, double bound)
    : bound_(bound) {
  if (levels.size() != jumps.size() + 1)
    throw ContractViolation("step function needs exactly one more level than jumps");
  if (!(bound > 0.0)) throw ContractViolation("sup-norm bound R must be positive");
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    if (!(jumps[i] > 0.0 && jumps[i] < 1.0))
      throw ContractViolation("jumps must lie strictly inside (0, 1)");
    if (i > 0 && !(jumps[i] > jumps[i - 1]))
      throw ContractViolation("jumps must be strictly increasing");
  }
  for (double b : levels) {
    if (!std::isfinite(b)) throw ContractViolation("levels must be finite");
    if (!(std::abs(b) < bound)) throw ContractViolation("levels must satisfy |b| < R");
  }
  levels_.push_back(levels[0]);
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    if (levels[i + 1] == levels_.back()) continue;
    jumps_.push_back(jumps[i]);
    levels_.push_back(levels[i + 1]);
  }
}

StepFunction StepFunction::constant(double level, double bound) {
  return StepFunction({level}, {}, bound);
}

StepFunction StepFunction::from_theta(const ThetaVector& theta, double bound) {
  std::vector<double> levels, jumps;
  for (std::size_t i = 0; i < theta.size(); ++i) (i % 2 == 0 ? levels : jumps).push_back(theta[i]);
  return StepFunction(std::move(levels), std::move(jumps), bound);
}

ThetaVector StepFunction::theta() const {
  std::vector<double> v;
  v.reserve(2 * jumps_.size() + 1);
  for (std::size_t i = 0; i < jumps_.size(); ++i) {
    v.push_back(levels_[i]);
    v.push_back(jumps_[i]);
  }
  v.push_back(levels_.back());
  return ThetaVector(std::move(v));
}

double StepFunction::operator()(double x) const {
  const auto it = std::upper_bound(jumps_.begin(), jumps_.end(), x);
  return levels_[static_cast<std::size_t>(it - jumps_.begin())];
}

double StepFunction::min_jump_height() const noexcept {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < levels_.size(); ++i) m = std::min(m, std::abs(levels_[i] - levels_[i - 1]));
  return m;
}

double StepFunction::sup_norm() const noexcept {
  double m = 0.0;
  for (double b : levels_) m = std::max(m, std::abs(b));
  return m;
}

StepFunction StepFunction::shifted(double s) const {
  std::vector<double> jumps(jumps_);
  for (double& t : jumps) t += s;
  return StepFunction(levels_, std::move(jumps), bound_);
}

std::vector<double> StepFunction::to_record() const {
  std::vector<double> r{static_cast<double>(jumps_.size())};
  const auto th = theta();
  r.insert(r.end(), th.values().begin(), th.values().end());
  r.push_back(bound_);
  return r;
}

StepFunction StepFunction::from_record(std::span<const double> record) {
  if (record.empty()) throw ContractViolation("empty step-function record");
  const double kd = record[0];
  if (!(kd >= 0.0) || kd != std::floor(kd)) throw ContractViolation("record jump count must be a nonnegative integer");
  const auto k = static_cast<std::size_t>(kd);
  if (record.size() != 2 * k + 3) throw ContractViolation("record length must be 2k+3");
  std::vector<double> theta(record.begin() + 1, record.begin() + 2 + 2 * k);
  return from_theta(ThetaVector(std::move(theta)), record.back());
}

std::vector<double> jump_set(const StepFunction& f) {
  return {f.jumps().begin(), f.jumps().end()};
}

namespace {

double directed(std::span<const double> from, std::span<const double> to) {
  double worst = 0.0;
  for (double a : from) {
    const auto it = std::lower_bound(to.begin(), to.end(), a);
    double best = std::numeric_limits<double>::infinity();
    if (it != to.end()) best = *it - a;
    if (it != to.begin()) best = std::min(best, a - *(it - 1));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

double hausdorff_jump_distance(const StepFunction& f, const StepFunction& g) {
  if (f.num_jumps() == 0 || g.num_jumps() == 0) return std::numeric_limits<double>::infinity();
  return std::max(directed(f.jumps(), g.jumps()), directed(g.jumps(), f.jumps()));
}

double l2_distance(const StepFunction& f, const StepFunction& g, double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ContractViolation("l2_distance needs a finite interval lo < hi");
  std::vector<double> pts{lo, hi};
  for (double t : f.jumps()) if (t > lo && t < hi) pts.push_back(t);
  for (double t : g.jumps()) if (t > lo && t < hi) pts.push_back(t);
  std::sort(pts.begin(), pts.end());
  double sum = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double len = pts[i] - pts[i - 1];
    if (len <= 0.0) continue;
    const double d = f(pts[i - 1]) - g(pts[i - 1]);
    sum += d * d * len;
  }
  return std::sqrt(sum);
}

StepFunction linear_combination(double alpha, const StepFunction& f, double beta,
                                const StepFunction& g) {
  std::vector<double> jumps(f.jumps().begin(), f.jumps().end());
  jumps.insert(jumps.end(), g.jumps().begin(), g.jumps().end());
  std::sort(jumps.begin(), jumps.end());
  jumps.erase(std::unique(jumps.begin(), jumps.end()), jumps.end());
  std::vector<double> levels;
  levels.push_back(alpha * f.levels().front() + beta * g.levels().front());
  for (double t : jumps) levels.push_back(alpha * f(t) + beta * g(t));
  return StepFunction(std::move(levels), std::move(jumps));
}

}  // namespace stepdeconv

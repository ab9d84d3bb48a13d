#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stepdeconv/error.hpp"

namespace stepdeconv {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  int max_depth = 50;
  int max_intervals = 20000;
};

template <class Value>
struct QuadratureResult {
  Value value;
  double error = 0.0;
  bool converged = true;
  int intervals = 0;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod nodes on [-1, 1] (QUADPACK qk15).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double norm_inf(double v) { return std::abs(v); }
template <class Derived>
double norm_inf(const Eigen::MatrixBase<Derived>& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

template <class Value>
struct Segment {
  double a, b;
  Value value;
  double error;
  int depth;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class Value, class F>
Segment<Value> kronrod15(F& f, double a, double b, int depth) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  Value fc = f(center);
  Value kronrod = fc * kKronrodWeights[7];
  Value gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    Value sum = f(center - dx) + f(center + dx);
    kronrod = kronrod + sum * kKronrodWeights[j];
    if (j % 2 == 1) gauss = gauss + sum * kGaussWeights[j / 2];
  }
  Value k = kronrod * half;
  Value diff = (kronrod - gauss) * half;
  return {a, b, k, norm_inf(diff), depth};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration of f over a finite [a, b]: the
// segment with the largest error estimate is bisected until the summed
// estimate is below opts.abs_tol. A segment that reaches opts.max_depth is
// frozen; if frozen segments keep the total above tolerance the result is
// reported unconverged. Value is double or an Eigen vector type.
template <class Value, class F>
QuadratureResult<Value> integrate_adaptive(F&& f, double a, double b,
                                           const QuadratureOptions& opts = {}) {
  QuadratureResult<Value> out{};
  if (a == b) {
    out.value = f(a) * 0.0;
    return out;
  }
  const double sign = a < b ? 1.0 : -1.0;
  const double lo = std::min(a, b), hi = std::max(a, b);
  using Seg = detail::Segment<Value>;
  std::priority_queue<Seg> active;
  std::vector<Seg> frozen;
  Seg first = detail::kronrod15<Value>(f, lo, hi, 0);
  double total_error = first.error;
  active.push(std::move(first));
  int count = 1;
  const double eps = std::numeric_limits<double>::epsilon();
  while (!active.empty() && total_error > opts.abs_tol && count < opts.max_intervals) {
    Seg worst = active.top();
    active.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (worst.depth >= opts.max_depth || mid <= worst.a || mid >= worst.b ||
        worst.error <= 50 * eps * detail::norm_inf(worst.value)) {
      frozen.push_back(std::move(worst));
      continue;
    }
    Seg left = detail::kronrod15<Value>(f, worst.a, mid, worst.depth + 1);
    Seg right = detail::kronrod15<Value>(f, mid, worst.b, worst.depth + 1);
    total_error += left.error + right.error - worst.error;
    active.push(std::move(left));
    active.push(std::move(right));
    ++count;
  }
  bool have = false;
  double err = 0.0;
  auto accumulate = [&](const Seg& s) {
    out.value = have ? Value(out.value + s.value) : s.value;
    have = true;
    err += s.error;
  };
  for (const auto& s : frozen) accumulate(s);
  while (!active.empty()) {
    accumulate(active.top());
    active.pop();
  }
  out.value = out.value * sign;
  out.error = err;
  out.converged = err <= opts.abs_tol;
  out.intervals = count;
  return out;
}

// Scalar integration that raises NumericError when tolerance is not met.
template <class F>
double integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
  auto r = integrate_adaptive<double>(std::forward<F>(f), a, b, opts);
  if (!r.converged) throw NumericError("adaptive quadrature did not converge", r.error);
  return r.value;
}

// Integrates over [breaks.front(), breaks.back()] piecewise between
// consecutive breakpoints, splitting the tolerance evenly.
template <class Value, class F>
QuadratureResult<Value> integrate_piecewise(F&& f, std::span<const double> breaks,
                                            const QuadratureOptions& opts = {}) {
  QuadratureResult<Value> total{};
  const std::size_t pieces = breaks.size() < 2 ? 0 : breaks.size() - 1;
  QuadratureOptions local = opts;
  local.abs_tol = opts.abs_tol / static_cast<double>(std::max<std::size_t>(pieces, 1));
  bool have = false;
  for (std::size_t i = 0; i < pieces; ++i) {
    if (breaks[i + 1] <= breaks[i]) continue;
    auto r = integrate_adaptive<Value>(f, breaks[i], breaks[i + 1], local);
    total.value = have ? Value(total.value + r.value) : r.value;
    have = true;
    total.error += r.error;
    total.converged = total.converged && r.converged;
    total.intervals += r.intervals;
  }
  if (!have) total.value = f(breaks.empty() ? 0.0 : breaks.front()) * 0.0;
  return total;
}

// Sorted, deduplicated breakpoints clamped to [lo, hi], endpoints included.
std::vector<double> make_breakpoints(double lo, double hi, std::span<const double> interior);

}  // namespace stepdeconv

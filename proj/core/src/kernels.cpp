#include "stepdeconv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "stepdeconv/error.hpp"
#include "stepdeconv/quadrature.hpp"

namespace stepdeconv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double clamp01(double u) { return std::clamp(u, 0.0, 1.0); }

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Laplace: return "laplace";
    case KernelFamily::Boxcar: return "boxcar";
    case KernelFamily::Polynomial: return "polynomial";
    case KernelFamily::TentPower: return "tent_power";
    case KernelFamily::Abel: return "abel";
  }
  return "unknown";
}

Kernel::Kernel(KernelFamily family, int degree, double alpha)
    : family_(family), degree_(degree), alpha_(alpha) {
  switch (family) {
    case KernelFamily::Gaussian:
      total_mass_ = 1.0;
      sup_bound_ = kInvSqrt2Pi;
      break;
    case KernelFamily::Laplace:
      total_mass_ = 1.0;
      sup_bound_ = 0.5;
      break;
    case KernelFamily::Boxcar:
      total_mass_ = 1.0;
      sup_bound_ = 1.0;
      break;
    case KernelFamily::Polynomial:
      if (degree < 0) throw ContractViolation("polynomial kernel needs degree p >= 0");
      total_mass_ = 1.0 / (degree + 1);
      sup_bound_ = 1.0;
      break;
    case KernelFamily::TentPower:
      if (degree < 2) throw ContractViolation("tent_power kernel needs degree p >= 2");
      total_mass_ = 2.0 / (degree + 1);
      sup_bound_ = 1.0;
      break;
    case KernelFamily::Abel:
      if (!(alpha > 0.5 && alpha < 1.0))
        throw ContractViolation("abel kernel needs alpha strictly inside (1/2, 1)");
      total_mass_ = 1.0 / (1.0 - alpha);
      sup_bound_ = kInf;
      break;
  }
}

Kernel Kernel::gaussian() { return Kernel(KernelFamily::Gaussian, 0, 0.0); }
Kernel Kernel::laplace() { return Kernel(KernelFamily::Laplace, 0, 0.0); }
Kernel Kernel::boxcar() { return Kernel(KernelFamily::Boxcar, 0, 0.0); }
Kernel Kernel::polynomial(int degree) { return Kernel(KernelFamily::Polynomial, degree, 0.0); }
Kernel Kernel::tent_power(int degree) { return Kernel(KernelFamily::TentPower, degree, 0.0); }
Kernel Kernel::abel(double alpha) { return Kernel(KernelFamily::Abel, 0, alpha); }

Kernel Kernel::from_name(std::string_view name, int degree, double alpha) {
  if (name == "gaussian" || name == "gauss") return gaussian();
  if (name == "laplace") return laplace();
  if (name == "boxcar") return boxcar();
  if (name == "polynomial") return polynomial(degree);
  if (name == "tent_power" || name == "tent") return tent_power(degree);
  if (name == "abel") return abel(alpha);
  throw ContractViolation("unknown kernel family '" + std::string(name) + "'");
}

std::string Kernel::name() const { return std::string(to_string(family_)); }

bool Kernel::bounded() const noexcept { return family_ != KernelFamily::Abel; }

bool Kernel::has_jumps() const noexcept {
  return family_ == KernelFamily::Boxcar || family_ == KernelFamily::Polynomial ||
         family_ == KernelFamily::Abel;
}

std::pair<double, double> Kernel::support() const noexcept {
  switch (family_) {
    case KernelFamily::Gaussian:
    case KernelFamily::Laplace: return {-kInf, kInf};
    case KernelFamily::TentPower: return {-1.0, 1.0};
    default: return {0.0, 1.0};
  }
}

std::vector<double> Kernel::breakpoints() const {
  switch (family_) {
    case KernelFamily::Gaussian: return {};
    case KernelFamily::Laplace: return {0.0};
    case KernelFamily::TentPower: return {-1.0, 0.0, 1.0};
    default: return {0.0, 1.0};
  }
}

double Kernel::operator()(double x) const {
  switch (family_) {
    case KernelFamily::Gaussian: return kInvSqrt2Pi * std::exp(-0.5 * x * x);
    case KernelFamily::Laplace: return 0.5 * std::exp(-std::abs(x));
    case KernelFamily::Boxcar: return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
    case KernelFamily::Polynomial:
      return (x >= 0.0 && x <= 1.0) ? std::pow(x, degree_) : 0.0;
    case KernelFamily::TentPower: {
      const double t = 1.0 - std::abs(x);
      return t > 0.0 ? std::pow(t, degree_) : 0.0;
    }
    case KernelFamily::Abel:
      if (x == 0.0) throw DomainError("abel kernel evaluated at its pole x = 0");
      return (x > 0.0 && x <= 1.0) ? std::pow(x, -alpha_) : 0.0;
  }
  return 0.0;
}

double Kernel::primitive(double u) const {
  if (u == -kInf) return 0.0;
  if (u == kInf) return total_mass_;
  switch (family_) {
    case KernelFamily::Gaussian: return 0.5 * std::erfc(-u / std::numbers::sqrt2);
    case KernelFamily::Laplace: return u < 0.0 ? 0.5 * std::exp(u) : 1.0 - 0.5 * std::exp(-u);
    case KernelFamily::Boxcar: return clamp01(u);
    case KernelFamily::Polynomial: return std::pow(clamp01(u), degree_ + 1) / (degree_ + 1);
    case KernelFamily::TentPower: {
      const double p1 = degree_ + 1;
      if (u <= -1.0) return 0.0;
      if (u <= 0.0) return std::pow(1.0 + u, p1) / p1;
      if (u < 1.0) return total_mass_ - std::pow(1.0 - u, p1) / p1;
      return total_mass_;
    }
    case KernelFamily::Abel: return std::pow(clamp01(u), 1.0 - alpha_) / (1.0 - alpha_);
  }
  return 0.0;
}

double Kernel::upper_tail(double u) const {
  if (u == -kInf) return total_mass_;
  if (u == kInf) return 0.0;
  switch (family_) {
    case KernelFamily::Gaussian: return 0.5 * std::erfc(u / std::numbers::sqrt2);
    case KernelFamily::Laplace: return u > 0.0 ? 0.5 * std::exp(-u) : 1.0 - 0.5 * std::exp(u);
    case KernelFamily::TentPower: {
      const double p1 = degree_ + 1;
      if (u >= 1.0) return 0.0;
      if (u >= 0.0) return std::pow(1.0 - u, p1) / p1;
      return total_mass_ - primitive(u);
    }
    default: return total_mass_ - primitive(u);
  }
}

std::pair<double, double> Kernel::effective_support(double tol) const {
  switch (family_) {
    case KernelFamily::Gaussian: {
      double lo = 0.0, hi = 40.0;
      for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
        const double mid = 0.5 * (lo + hi);
        (upper_tail(mid) > tol ? lo : hi) = mid;
      }
      return {-hi, hi};
    }
    case KernelFamily::Laplace: {
      const double t = std::max(0.0, std::log(0.5 / tol));
      return {-t, t};
    }
    default: return support();
  }
}

double eval_kernel(const Kernel& k, double x) { return k(x); }

double delta_phi(const Kernel& k, double x, double a, double b) {
  if (a == b) return std::isinf(a) ? 0.0 : k(x - a);
  // Delta(x, a, b) = Psi(x - a) - Psi(x - b).
  const double hi = x - a;
  const double lo = x - b;
  if (lo >= 0.0 && hi >= 0.0) return k.upper_tail(lo) - k.upper_tail(hi);
  return k.primitive(hi) - k.primitive(lo);
}

double delta_phi_quadrature(const Kernel& k, double x, double a, double b, double quad_tol) {
  if (a == b) return std::isinf(a) ? 0.0 : k(x - a);
  const double sign = a < b ? 1.0 : -1.0;
  // Substituting u = x - y turns the integral into the mass of phi on [x - b, x - a].
  double lo = x - std::max(a, b);
  double hi = x - std::min(a, b);
  const auto [s_lo, s_hi] = k.effective_support(0.25 * quad_tol);
  lo = std::max(lo, s_lo);
  hi = std::min(hi, s_hi);
  if (!(lo < hi)) return 0.0;

  const auto bps = k.breakpoints();
  const auto breaks = make_breakpoints(lo, hi, bps);
  const std::size_t pieces = breaks.size() - 1;
  QuadratureOptions opts;
  opts.abs_tol = 0.5 * quad_tol / static_cast<double>(pieces);
  double total = 0.0;
  for (std::size_t i = 0; i < pieces; ++i) {
    const double p = breaks[i], q = breaks[i + 1];
    if (k.family() == KernelFamily::Abel && p == 0.0) {
      // Graded substitution u = t^m, m = 1/(1 - alpha), removes the pole.
      const double m = 1.0 / (1.0 - k.alpha());
      auto g = [&](double t) {
        return t <= 0.0 ? m : m * std::pow(t, m - 1.0) * k(std::pow(t, m));
      };
      total += integrate(g, 0.0, std::pow(q, 1.0 / m), opts);
    } else {
      total += integrate([&](double u) { return k(u); }, p, q, opts);
    }
  }
  return sign * total;
}

GramDiagnostic interval_gram(const Kernel& k, std::span<const std::pair<double, double>> intervals,
                             double quad_tol) {
  const auto m = static_cast<Eigen::Index>(intervals.size());
  std::vector<double> interior;
  const auto bps = k.breakpoints();
  for (const auto& [a, b] : intervals) {
    for (double bp : bps) {
      interior.push_back(a + bp);
      interior.push_back(b + bp);
    }
  }
  const auto breaks = make_breakpoints(0.0, 1.0, interior);
  const Eigen::Index entries = m * (m + 1) / 2;
  auto integrand = [&](double x) {
    Eigen::VectorXd g(m);
    for (Eigen::Index j = 0; j < m; ++j)
      g[j] = delta_phi(k, x, intervals[j].first, intervals[j].second);
    Eigen::VectorXd out(entries);
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i; j < m; ++j) out[idx++] = g[i] * g[j];
    return out;
  };
  QuadratureOptions opts;
  opts.abs_tol = quad_tol;
  auto r = integrate_piecewise<Eigen::VectorXd>(integrand, breaks, opts);
  if (!r.converged) throw NumericError("Gram matrix quadrature did not converge", r.error);

  GramDiagnostic out;
  out.gram.resize(m, m);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j) out.gram(i, j) = out.gram(j, i) = r.value[idx++];
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.gram, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = eig.eigenvalues().minCoeff();
  }
  return out;
}

GramDiagnostic assumption_b_diagnostic(const Kernel& k, std::span<const double> taus,
                                       double quad_tol) {
  if (taus.size() < 2 || taus.front() != -kInf || taus.back() != kInf)
    throw ContractViolation("tau configuration must start at -inf and end at +inf");
  for (std::size_t i = 1; i < taus.size(); ++i) {
    if (taus[i] < taus[i - 1]) throw ContractViolation("tau configuration must be non-decreasing");
    if (i >= 2 && taus[i] == taus[i - 1] && taus[i - 1] == taus[i - 2])
      throw ContractViolation("at most two consecutive taus may coincide");
  }
  for (std::size_t i = 1; i + 1 < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] < 1.0))
      throw ContractViolation("interior taus must lie in (0, 1)");
  }
  std::vector<std::pair<double, double>> intervals;
  for (std::size_t i = 1; i < taus.size(); ++i) intervals.emplace_back(taus[i - 1], taus[i]);
  return interval_gram(k, intervals, quad_tol);
}

}  // namespace stepdeconv

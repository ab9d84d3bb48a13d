#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace stepdeconv {

enum class KernelFamily { Gaussian, Laplace, Boxcar, Polynomial, TentPower, Abel };

std::string_view to_string(KernelFamily family);

inline constexpr double kDefaultQuadTol = 1e-10;

// A convolution kernel phi from a fixed registry of families.
//
//   Gaussian    (2 pi)^{-1/2} exp(-x^2 / 2)
//   Laplace     exp(-|x|) / 2
//   Boxcar      1 on [0, 1]
//   Polynomial  x^p on [0, 1], p >= 0
//   TentPower   (1 - |x|)_+^p, p >= 2
//   Abel        x^{-alpha} on (0, 1], 1/2 < alpha < 1
//
// The Abel family is truncated to (0, 1] so that it has finite mass; on the
// unit interval it acts identically to the untruncated x^{-alpha} 1_{x>0}
// whenever the step function vanishes left of -1.
//
// Kernel values are immutable; every member is safe to call concurrently.
class Kernel {
 public:
  static Kernel gaussian();
  static Kernel laplace();
  static Kernel boxcar();
  static Kernel polynomial(int degree);
  static Kernel tent_power(int degree);
  static Kernel abel(double alpha);

  // Builds from a registry name ("gaussian", "laplace", "boxcar",
  // "polynomial", "tent_power", "abel"). `degree` is read by the polynomial
  // and tent families, `alpha` by Abel.
  static Kernel from_name(std::string_view name, int degree = 0, double alpha = 0.75);

  KernelFamily family() const noexcept { return family_; }
  std::string name() const;
  int degree() const noexcept { return degree_; }
  double alpha() const noexcept { return alpha_; }

  double total_mass() const noexcept { return total_mass_; }
  // Analytic supremum of phi; +infinity for Abel.
  double sup_bound() const noexcept { return sup_bound_; }
  bool bounded() const noexcept;
  // True when phi itself has jump discontinuities (Boxcar, Polynomial, Abel).
  bool has_jumps() const noexcept;
  // Support [lo, hi] of phi (infinite for Gaussian and Laplace).
  std::pair<double, double> support() const noexcept;
  // Points where phi or one of its low derivatives is not smooth.
  std::vector<double> breakpoints() const;

  // phi(x). Throws DomainError at the Abel pole x = 0.
  double operator()(double x) const;

  // Primitive Psi(u) = integral of phi over (-inf, u]. Psi(-inf) = 0 and
  // Psi(+inf) = total_mass().
  double primitive(double u) const;
  // Tail mass integral of phi over [u, +inf), computed without cancellation.
  double upper_tail(double u) const;

  // Finite interval outside of which phi carries less than `tol` mass on
  // each side.
  std::pair<double, double> effective_support(double tol) const;

  bool operator==(const Kernel&) const = default;

 private:
  Kernel(KernelFamily family, int degree, double alpha);

  KernelFamily family_;
  int degree_ = 0;
  double alpha_ = 0.0;
  double total_mass_ = 1.0;
  double sup_bound_ = 1.0;
};

double eval_kernel(const Kernel& k, double x);

// Partial mass Delta(x, a, b) = oriented integral of phi(x - y) over y in
// [a, b]; for a == b it is phi(x - a). Endpoints may be infinite. Uses the
// closed-form primitive of the family.
double delta_phi(const Kernel& k, double x, double a, double b);

// Same quantity by adaptive quadrature; infinite endpoints are truncated to
// the kernel's effective support at `quad_tol`. Throws NumericError on
// non-convergence.
double delta_phi_quadrature(const Kernel& k, double x, double a, double b,
                            double quad_tol = kDefaultQuadTol);

struct GramDiagnostic {
  Eigen::MatrixXd gram;
  double min_eigenvalue = 0.0;
};

// Gram matrix in L2([0, 1]) of Delta(., a_j, b_j) for an arbitrary list of
// intervals, with its smallest eigenvalue.
GramDiagnostic interval_gram(const Kernel& k, std::span<const std::pair<double, double>> intervals,
                             double quad_tol = kDefaultQuadTol);

// Linear-independence check of the functions Delta(., tau_{i-1}, tau_i) for a
// configuration -inf = tau_0 <= 0 < tau_1 <= ... <= tau_k < 1 <= tau_{k+1} = inf
// in which at most two consecutive entries coincide. `taus` holds the full
// sequence including the infinite ends.
GramDiagnostic assumption_b_diagnostic(const Kernel& k, std::span<const double> taus,
                                       double quad_tol = kDefaultQuadTol);

}  // namespace stepdeconv

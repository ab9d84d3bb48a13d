#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stepdeconv/estimator.hpp"
#include "stepdeconv/kernels.hpp"
#include "stepdeconv/model.hpp"
#include "stepdeconv/signal.hpp"

namespace stepdeconv {

// Score-like vector at x, interleaved as
//   (Delta(x, tau_0, tau_1), (b_1 - b_2) phi(x - tau_1), Delta(x, tau_1, tau_2), ...,
//    (b_k - b_{k+1}) phi(x - tau_k), Delta(x, tau_k, tau_{k+1})).
// It is the gradient of (Phi f_theta)(x) with respect to theta.
Eigen::VectorXd nu_vector(const Kernel& k, const StepFunction& f, double x);

struct VMatrix {
  Eigen::MatrixXd V;
  double min_eigenvalue = 0.0;
  // Set when V is not numerically positive definite.
  bool degenerate = false;
};

// V_ij = integral over [0, 1] of nu_i(x) nu_j(x) h(x) by adaptive quadrature,
// split at every kink of the integrand. Throws InferenceError for Abel
// kernels (V is not finite).
VMatrix v_matrix(const Kernel& k, const StepFunction& f, const DesignDensity& h,
                 double quad_tol = kDefaultQuadTol);

// Residual variance sum r_i^2 / (n - (2k+1)) of a fitted parameter vector.
double estimate_sigma2(const Dataset& data, const ThetaVector& theta, const Kernel& k);
inline double estimate_sigma2(const Dataset& data, const FitResult& fit, const Kernel& k) {
  return estimate_sigma2(data, fit.theta_hat, k);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Marginal intervals theta_j +- z_{(1+level)/2} sqrt((sigma2 V^{-1})_jj / n).
// Throws InferenceError if V is singular.
std::vector<Interval> confidence_intervals(const ThetaVector& theta, const Eigen::MatrixXd& V,
                                           double sigma2, std::size_t n, double level);

struct InferenceReport {
  Eigen::MatrixXd V;
  double V_min_eig = 0.0;
  Eigen::MatrixXd V_inverse;
  // sigma2_hat V^{-1} / n.
  Eigen::MatrixXd covariance;
  std::vector<Interval> intervals;
  double level = 0.95;
  double sigma2_hat = 0.0;
  std::size_t n = 0;
  bool degenerate = false;
};

// V at the fitted parameters (plug-in), sigma2 from the residuals, and
// intervals. A degenerate V yields a report with `degenerate` set and no
// intervals.
InferenceReport make_inference_report(const Dataset& data, const FitResult& fit, const Kernel& k,
                                      const DesignDensity& h, double level = 0.95,
                                      double quad_tol = kDefaultQuadTol);

}  // namespace stepdeconv

#include "stepdeconv/inference.hpp"

#include <cmath>
#include <limits>

#include "stepdeconv/error.hpp"
#include "stepdeconv/normal.hpp"
#include "stepdeconv/quadrature.hpp"

namespace stepdeconv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Eigen::VectorXd nu_vector(const Kernel& k, const StepFunction& f, double x) {
  const auto levels = f.levels();
  const auto jumps = f.jumps();
  const std::size_t kk = jumps.size();
  Eigen::VectorXd nu(static_cast<Eigen::Index>(2 * kk + 1));
  for (std::size_t j = 0; j <= kk; ++j) {
    const double lo = j == 0 ? -kInf : jumps[j - 1];
    const double hi = j == kk ? kInf : jumps[j];
    nu[static_cast<Eigen::Index>(2 * j)] = delta_phi(k, x, lo, hi);
  }
  for (std::size_t i = 0; i < kk; ++i)
    nu[static_cast<Eigen::Index>(2 * i + 1)] = (levels[i] - levels[i + 1]) * k(x - jumps[i]);
  return nu;
}

VMatrix v_matrix(const Kernel& k, const StepFunction& f, const DesignDensity& h, double quad_tol) {
  if (!k.bounded())
    throw InferenceError("the " + k.name() + " kernel is unbounded: V is not finite and no normal limit applies");
  const auto p = static_cast<Eigen::Index>(2 * f.num_jumps() + 1);
  std::vector<double> interior(h.knots().begin(), h.knots().end());
  for (double t : f.jumps())
    for (double bp : k.breakpoints()) interior.push_back(t + bp);
  const auto breaks = make_breakpoints(0.0, 1.0, interior);

  const Eigen::Index entries = p * (p + 1) / 2;
  auto integrand = [&](double x) {
    const Eigen::VectorXd nu = nu_vector(k, f, x);
    const double w = h.pdf(x);
    Eigen::VectorXd out(entries);
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i; j < p; ++j) out[idx++] = nu[i] * nu[j] * w;
    return out;
  };
  QuadratureOptions opts;
  opts.abs_tol = quad_tol;
  const auto r = integrate_piecewise<Eigen::VectorXd>(integrand, breaks, opts);
  if (!r.converged) throw NumericError("V matrix quadrature did not converge", r.error);

  VMatrix out;
  out.V.resize(p, p);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i; j < p; ++j) out.V(i, j) = out.V(j, i) = r.value[idx++];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.V, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  out.degenerate = !(out.min_eigenvalue > static_cast<double>(p) * quad_tol);
  return out;
}

double estimate_sigma2(const Dataset& data, const ThetaVector& theta, const Kernel& k) {
  const double n = static_cast<double>(data.size());
  const double dof = n - static_cast<double>(theta.size());
  if (!(dof > 0)) throw ContractViolation("sigma^2 estimate needs n > 2k+1");
  const auto fitted = fitted_values(data, k, theta);
  double ss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) ss += (data.y[i] - fitted[i]) * (data.y[i] - fitted[i]);
  return ss / dof;
}

std::vector<Interval> confidence_intervals(const ThetaVector& theta, const Eigen::MatrixXd& V,
                                           double sigma2, std::size_t n, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ContractViolation("confidence level must lie in (0, 1)");
  if (V.rows() != static_cast<Eigen::Index>(theta.size()) || V.cols() != V.rows())
    throw ContractViolation("V must be (2k+1) x (2k+1)");
  if (n == 0) throw ContractViolation("confidence intervals need n >= 1");
  if (!(sigma2 >= 0.0)) throw ContractViolation("sigma^2 must be >= 0");
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success) throw InferenceError("V is not positive definite");
  const Eigen::MatrixXd vinv = llt.solve(Eigen::MatrixXd::Identity(V.rows(), V.cols()));
  const double z = normal_quantile(0.5 * (1.0 + level));
  std::vector<Interval> out(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double var = sigma2 * vinv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    if (!(var >= 0.0)) throw InferenceError("negative variance from V inverse");
    const double half = z * std::sqrt(var / static_cast<double>(n));
    out[j] = {theta[j] - half, theta[j] + half};
  }
  return out;
}

InferenceReport make_inference_report(const Dataset& data, const FitResult& fit, const Kernel& k,
                                      const DesignDensity& h, double level, double quad_tol) {
  if (!k.bounded())
    throw InferenceError("inference is refused for the " + k.name() +
                         " kernel: only a rate is available, no normal limit");
  InferenceReport rep;
  rep.level = level;
  rep.n = data.size();
  rep.sigma2_hat = estimate_sigma2(data, fit.theta_hat, k);
  const StepFunction f = fit.step_function();
  if (f.num_jumps() != fit.k_hat) {
    rep.degenerate = true;
    return rep;
  }
  const VMatrix vm = v_matrix(k, f, h, quad_tol);
  rep.V = vm.V;
  rep.V_min_eig = vm.min_eigenvalue;
  if (vm.degenerate) {
    rep.degenerate = true;
    return rep;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(vm.V);
  if (llt.info() != Eigen::Success) {
    rep.degenerate = true;
    return rep;
  }
  rep.V_inverse = llt.solve(Eigen::MatrixXd::Identity(vm.V.rows(), vm.V.cols()));
  rep.covariance = rep.sigma2_hat * rep.V_inverse / static_cast<double>(rep.n);
  rep.intervals = confidence_intervals(fit.theta_hat, vm.V, rep.sigma2_hat, rep.n, level);
  return rep;
}

}  // namespace stepdeconv

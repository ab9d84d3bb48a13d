#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stepdeconv/kernels.hpp"
#include "stepdeconv/model.hpp"
#include "stepdeconv/signal.hpp"

namespace stepdeconv {

struct FitConfig {
  // Sup-norm budget R; fitted levels are constrained to [-R, R].
  double bound = 10.0;
  // Coarse jump grid size; 0 selects ceil(4 sqrt(n)).
  std::size_t grid_points = 0;
  double refine_tol = 1e-7;
  std::size_t max_refine_iters = 100;
  bool refine = true;
  // Pinned jump count. When unset, fit_penalized scans 0..k_max.
  std::optional<std::size_t> k;
  std::size_t k_max = 3;
  // Penalty weight. When unset, select_lambda(n, epsilon, lambda_c) is used.
  std::optional<double> lambda;
  double epsilon = 0.5;
  // Schedule constant c. When unset, 0.5 times the first-difference
  // variance estimate of y.
  std::optional<double> lambda_c;
  std::size_t multistarts = 5;
  // Exhaustive grid enumeration is used for k <= 2 or when the number of
  // placements does not exceed this budget.
  std::size_t exhaustive_budget = 100000;
  // Grid placements re-scored with the exact QR solve after screening.
  std::size_t rescore_top = 8;
};

struct FitDiagnostics {
  // Objective at the best coarse-grid placement (before refinement).
  double grid_optimum = 0.0;
  std::size_t refine_iters = 0;
  // A jump was pushed onto [x_(1), x_(n)] by the refinement.
  bool boundary_clipped = false;
  // A level hit the sup-norm budget R.
  bool levels_clipped = false;
  std::string search;  // "none", "exhaustive" or "greedy"
  std::size_t candidates = 0;
  // Per-jump-count objectives (penalized fits only), index = k.
  std::vector<double> objective_per_k;
};

struct FitResult {
  ThetaVector theta_hat;
  std::size_t k_hat = 0;
  // ||Phi f_hat - Y||_n^2.
  double objective = 0.0;
  // objective + lambda * J_#(f_hat).
  double penalized_objective = 0.0;
  double lambda = 0.0;
  // sum of squared residuals / (n - (2k+1)); NaN when n <= 2k+1.
  double sigma2_hat = 0.0;
  FitDiagnostics diagnostics;

  // The fitted step function (no sup-norm bound attached).
  StepFunction step_function() const { return StepFunction::from_theta(theta_hat); }
};

struct HeightsFit {
  std::vector<double> levels;
  // ||A b - y||_n^2 for the returned (possibly bound-constrained) levels.
  double rss = 0.0;
  bool clipped = false;
};

// Least-squares levels for fixed jumps `taus` (strictly increasing in (0, 1)).
// The n x (k+1) design A_ij = Delta(x_i, tau_{j-1}, tau_j) is solved by a
// column-pivoted QR; if that leaves [-R, R] the box-constrained
// problem is solved exactly.
// Throws DegenerateFit when A is numerically rank deficient.
HeightsFit heights_given_jumps(const Dataset& data, const Kernel& k, std::span<const double> taus,
                               double bound);

// Equispaced candidate jump locations strictly inside [x_(1), x_(n)].
std::vector<double> jump_grid(const Dataset& data, std::size_t grid_points);
std::size_t default_grid_points(std::size_t n);

// Restricted least squares with exactly `num_jumps` jumps: grid search
// (exhaustive or greedy with multistarts) followed by continuous refinement
// of the jump locations. `warm_start` jumps, when given, seed an extra
// candidate built by inserting one grid jump into them.
FitResult fit_known_k(const Dataset& data, const Kernel& k, std::size_t num_jumps,
                      const FitConfig& cfg, std::span<const double> warm_start = {});

// Penalized least squares over k in 0..cfg.k_max with penalty lambda J_#;
// ties go to the smaller k.
FitResult fit_penalized(const Dataset& data, const Kernel& k, const FitConfig& cfg);

// lambda_n = c log(n) n^{-1/(1+epsilon)}.
double select_lambda(std::size_t n, double epsilon, double c);

// sum (y_{i+1} - y_i)^2 / (2 (n - 1)).
double difference_variance(std::span<const double> y);

// Fitted curve Phi f_theta at the design points.
std::vector<double> fitted_values(const Dataset& data, const Kernel& k, const ThetaVector& theta);

}  // namespace stepdeconv

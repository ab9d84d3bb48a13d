#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "stepdeconv/estimator.hpp"
#include "stepdeconv/kernels.hpp"
#include "stepdeconv/model.hpp"
#include "stepdeconv/signal.hpp"

namespace stepdeconv {

enum class Metric { ThetaL2, TauAbs, L2Function, Hausdorff };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view name);

// Pass/fail thresholds of a scenario. Unset slope targets default to the
// theoretical rate of the metric and kernel with a +-0.15 band.
struct Targets {
  std::optional<double> slope;
  std::optional<std::pair<double, double>> slope_band;
  std::pair<double, double> coverage_band{0.90, 0.98};
  std::pair<double, double> mean_band{-0.15, 0.15};
  std::pair<double, double> variance_band{0.8, 1.25};
  double min_recovery = 0.95;
  double max_failure_fraction = 0.05;
};

struct Scenario {
  std::string name = "scenario";
  Kernel kernel = Kernel::gaussian();
  StepFunction truth;
  DesignSpec design;
  double sigma = 0.2;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 200;
  std::uint64_t seed_base = 1;
  FitConfig fit;
  Metric metric = Metric::TauAbs;
  double level = 0.95;
  double quad_tol = kDefaultQuadTol;
  Targets targets;
  // Worker threads for replications; 0 reads STEPDECONV_WORKERS (default 1).
  std::size_t workers = 0;

  // Throws ConfigError unless the n grid is strictly increasing with at
  // least three points and reps >= 50.
  void validate_for_rates() const;
  // Throws ConfigError on an empty n grid or zero reps.
  void validate_basic() const;
};

// Theoretical log-log slope for the metric: -1/2 for parameters, jump
// locations and the Hausdorff distance, -1/4 for the L2 function error, and
// -1/(3 - 2 alpha) for jump locations under the Abel kernel.
double theoretical_slope(Metric m, const Kernel& k);
std::pair<double, double> slope_band(const Scenario& s);

// Metric of a fitted theta against the scenario truth (+inf for Hausdorff
// when a jump set is empty).
double metric_value(Metric m, const StepFunction& truth, const ThetaVector& fitted);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
};
// Ordinary least squares of log(values) on log(ns).
SlopeFit fit_log_log_slope(std::span<const double> ns, std::span<const double> values);

// Kolmogorov sup-distance between the empirical CDF of `values` and N(0, 1).
double ks_distance_normal(std::span<const double> values);
// Asymptotic 95% Kolmogorov band 1.358 / sqrt(m).
double ks_band95(std::size_t m);

// Runs job(rep) for rep in [0, reps) on `workers` threads; results are
// stored by rep index, so aggregation does not depend on scheduling.
std::size_t resolve_workers(std::size_t requested);

template <class T>
std::vector<T> run_replications(std::size_t reps, std::size_t workers,
                                const std::function<T(std::size_t)>& job) {
  std::vector<T> out(reps);
  const std::size_t threads = std::min(resolve_workers(workers), std::max<std::size_t>(reps, 1));
  if (threads <= 1) {
    for (std::size_t r = 0; r < reps; ++r) out[r] = job(r);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t r = next++; r < reps; r = next++) out[r] = job(r);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

enum class ReportStatus { Passed, Failed, DegenerateNoiseless, TooManyFailures };
std::string_view to_string(ReportStatus s);

struct RatePoint {
  std::size_t n = 0;
  double median = 0.0, q10 = 0.0, q90 = 0.0;
  std::size_t failures = 0;
  // One value per replication; NaN for failed fits.
  std::vector<double> values;
};

struct RateReport {
  Metric metric = Metric::TauAbs;
  std::vector<RatePoint> points;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double target_slope = 0.0;
  std::pair<double, double> band{0.0, 0.0};
  ReportStatus status = ReportStatus::Failed;
  bool pass = false;
};

RateReport run_rate_experiment(const Scenario& s);

struct CoveragePoint {
  std::size_t n = 0;
  std::vector<double> coverage;  // per parameter
  std::vector<double> stderr_;   // binomial standard errors
  std::size_t failures = 0;
  std::size_t used = 0;
  // covered[rep][j]; empty rows for failed replications.
  std::vector<std::vector<bool>> covered;
};

struct CoverageReport {
  double level = 0.95;
  std::vector<CoveragePoint> points;
  std::pair<double, double> band{0.0, 0.0};
  ReportStatus status = ReportStatus::Failed;
  bool pass = false;
};

// Known-k fits at every n of the grid; intervals from the plug-in V and
// sigma2_hat. Coverage is checked with a slack of 10 * refine_tol, the
// numerical resolution of the fitted parameters.
CoverageReport run_coverage_experiment(const Scenario& s, double level);

struct SelectionPoint {
  std::size_t n = 0;
  double recovery = 0.0;
  double stderr_ = 0.0;
  std::size_t failures = 0;
  std::vector<long> k_hat;  // -1 for failed fits
};

struct SelectionReport {
  std::vector<SelectionPoint> points;
  bool nondecreasing = false;
  double min_recovery = 0.95;
  ReportStatus status = ReportStatus::Failed;
  bool pass = false;
};

// Penalized fits with the lambda schedule of s.fit.
SelectionReport run_selection_experiment(const Scenario& s);

struct NormalitySummary {
  double mean = 0.0;
  double variance = 0.0;
  double ks_distance = 0.0;
};

struct NormalityReport {
  std::size_t n = 0;
  std::vector<NormalitySummary> params;
  double ks_band = 0.0;
  std::size_t failures = 0;
  bool degenerate = false;
  ReportStatus status = ReportStatus::Failed;
  bool pass = false;
  // Standardized values z[rep][j]; empty rows for failed replications.
  std::vector<std::vector<double>> z;
};

// Standardizes sqrt(n)(theta_hat_j - theta_j) / sqrt((sigma^2 V^{-1})_jj)
// with the true sigma and V evaluated at the true theta.
NormalityReport normality_diagnostics(const Scenario& s, std::size_t n);

// Summary of standardized values (mean, variance, KS distance) per column.
std::vector<NormalitySummary> summarize_standardized(const std::vector<std::vector<double>>& z,
                                                     std::size_t params);

}  // namespace stepdeconv

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stepdeconv/estimator.hpp"
#include "stepdeconv/experiments.hpp"
#include "stepdeconv/kernels.hpp"
#include "stepdeconv/model.hpp"
#include "stepdeconv/signal.hpp"

namespace stepdeconv {

// Run configuration shared by every CLI subcommand. TOML and JSON documents
// use the same schema:
//
//   kernel = "gaussian"          # gaussian | laplace | boxcar | polynomial | tent_power | abel
//   degree = 2                   # polynomial / tent_power
//   alpha = 0.75                 # abel
//   levels = [0.0, 1.0]          # truth, k + 1 levels
//   jumps = [0.5]                # truth, k jumps in (0, 1)
//   sigma = 0.2
//   n = 1000                     # or [250, 500, 1000]
//   seed = 7
//   reps = 200
//   metric = "tau_abs"
//   level = 0.95
//   quad_tol = 1e-10
//   inference = true
//   workers = 0
//   [design]  kind = "fixed" | "random", density = "uniform" | "piecewise_linear",
//             knots = [...], values = [...], seed = 0
//   [fit]     bound, k, k_max, lambda, lambda_c, epsilon, grid_points, refine,
//             refine_tol, max_refine_iters, multistarts, exhaustive_budget
//   [targets] slope, slope_band = [lo, hi], coverage_band, mean_band,
//             variance_band, min_recovery, max_failure_fraction
//
// Unknown keys are rejected.
struct RunConfig {
  std::string name = "run";
  Kernel kernel = Kernel::gaussian();
  std::optional<StepFunction> truth;
  DesignSpec design;
  double sigma = 0.0;
  std::vector<std::size_t> n;
  std::uint64_t seed = 0;
  std::size_t reps = 200;
  Metric metric = Metric::TauAbs;
  double level = 0.95;
  double quad_tol = kDefaultQuadTol;
  bool inference = true;
  std::size_t workers = 0;
  FitConfig fit;
  Targets targets;

  // Scenario for the experiment drivers. Throws ConfigError without a truth
  // or sample sizes.
  Scenario to_scenario() const;
};

RunConfig parse_config_json(std::string_view text);
RunConfig parse_config_toml(std::string_view text);
// Dispatches on the extension: .toml, otherwise JSON.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace stepdeconv

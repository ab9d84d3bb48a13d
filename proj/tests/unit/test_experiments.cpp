#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "stepdeconv/error.hpp"
#include "stepdeconv/estimator.hpp"
#include "stepdeconv/experiments.hpp"

using namespace stepdeconv;

namespace {
Scenario small_scenario(const Kernel& k, double sigma) {
  Scenario s;
  s.name = "unit";
  s.kernel = k;
  s.truth = StepFunction({0.0, 1.0}, {0.5});
  s.sigma = sigma;
  s.n_grid = {60, 120, 240};
  s.reps = 50;
  s.seed_base = 17;
  s.workers = 1;
  s.fit.grid_points = 40;
  return s;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) != std::isnan(b[i])) return false;
    if (!std::isnan(a[i]) && a[i] != b[i]) return false;
  }
  return true;
}
}  // namespace

TEST_CASE("log-log slope of exact power laws") {
  const std::vector<double> ns{250, 500, 1000, 2000, 4000};
  std::vector<double> e(ns.size()), q(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    e[i] = std::pow(ns[i], -0.5);
    q[i] = 3.0 * std::pow(ns[i], -0.25);
  }
  const SlopeFit a = fit_log_log_slope(ns, e);
  CHECK(std::abs(a.slope + 0.5) < 1e-12);
  CHECK(std::abs(a.intercept) < 1e-10);
  CHECK(a.stderr_ < 1e-12);
  const SlopeFit b = fit_log_log_slope(ns, q);
  CHECK(std::abs(b.slope + 0.25) < 1e-12);
  CHECK(b.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  const std::vector<double> bad{1.0, 0.0, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(fit_log_log_slope(ns, bad), ContractViolation);
}

TEST_CASE("theoretical slopes") {
  CHECK(theoretical_slope(Metric::ThetaL2, Kernel::gaussian()) == -0.5);
  CHECK(theoretical_slope(Metric::TauAbs, Kernel::laplace()) == -0.5);
  CHECK(theoretical_slope(Metric::Hausdorff, Kernel::boxcar()) == -0.5);
  CHECK(theoretical_slope(Metric::L2Function, Kernel::gaussian()) == -0.25);
  CHECK(theoretical_slope(Metric::TauAbs, Kernel::abel(0.75)) == doctest::Approx(-1.0 / 1.5).epsilon(1e-15));
  Scenario s;
  s.metric = Metric::TauAbs;
  const auto band = slope_band(s);
  CHECK(band.first == doctest::Approx(-0.65));
  CHECK(band.second == doctest::Approx(-0.35));
  s.targets.slope_band = std::pair{-0.4, -0.15};
  CHECK(slope_band(s).first == -0.4);
  for (auto m : {Metric::ThetaL2, Metric::TauAbs, Metric::L2Function, Metric::Hausdorff})
    CHECK(metric_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(metric_from_string("sup_norm"), ConfigError);
}

TEST_CASE("metric values against hand arithmetic") {
  const StepFunction truth({0.0, 1.0}, {0.5});
  const ThetaVector fitted(std::vector<double>{0.1, 0.6, 0.8});
  CHECK(metric_value(Metric::ThetaL2, truth, fitted) == doctest::Approx(std::sqrt(0.01 + 0.01 + 0.04)));
  CHECK(metric_value(Metric::TauAbs, truth, fitted) == doctest::Approx(0.1));
  CHECK(metric_value(Metric::Hausdorff, truth, fitted) == doctest::Approx(0.1));
  // |f - g| is 0.1 on [0, 0.5), 0.9 on [0.5, 0.6) and 0.2 on [0.6, 1].
  CHECK(metric_value(Metric::L2Function, truth, fitted) ==
        doctest::Approx(std::sqrt(0.5 * 0.01 + 0.1 * 0.81 + 0.4 * 0.04)).epsilon(1e-12));
  const ThetaVector flat(std::vector<double>{0.5});
  CHECK(std::isinf(metric_value(Metric::TauAbs, truth, flat)));
  CHECK(std::isinf(metric_value(Metric::Hausdorff, truth, flat)));
}

TEST_CASE("Kolmogorov distance self-calibration") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  int inside = 0;
  for (int t = 0; t < 40; ++t) {
    std::vector<double> v(500);
    for (double& x : v) x = z(rng);
    if (ks_distance_normal(v) < ks_band95(v.size())) ++inside;
  }
  // Each trial is inside with probability 0.95; 34 or more of 40 fails with
  // probability below 1e-3.
  CHECK(inside >= 34);
  std::vector<double> shifted(500);
  for (double& x : shifted) x = z(rng) + 1.0;
  CHECK(ks_distance_normal(shifted) > ks_band95(shifted.size()));
  const std::vector<double> zero{0.0};
  CHECK(ks_distance_normal(zero) == doctest::Approx(0.5));
  CHECK(ks_band95(100) == doctest::Approx(0.1358));
}

TEST_CASE("scenario validation") {
  Scenario s = small_scenario(Kernel::boxcar(), 0.1);
  CHECK_NOTHROW(s.validate_for_rates());
  s.reps = 49;
  CHECK_THROWS_AS(s.validate_for_rates(), ConfigError);
  CHECK_THROWS_AS(run_rate_experiment(s), ConfigError);
  s.reps = 50;
  s.n_grid = {60, 120};
  CHECK_THROWS_AS(s.validate_for_rates(), ConfigError);
  s.n_grid = {60, 240, 120};
  CHECK_THROWS_AS(s.validate_for_rates(), ConfigError);
  s.n_grid = {};
  CHECK_THROWS_AS(s.validate_basic(), ConfigError);
}

TEST_CASE("noiseless rate experiment is degenerate") {
  const Scenario s = small_scenario(Kernel::boxcar(), 0.0);
  const RateReport r = run_rate_experiment(s);
  CHECK(r.status == ReportStatus::DegenerateNoiseless);
  CHECK_FALSE(r.pass);
  CHECK(std::isnan(r.slope));
  for (const auto& pt : r.points) {
    CHECK(pt.failures == 0);
    for (double v : pt.values) CHECK(v <= s.fit.refine_tol);
  }
}

TEST_CASE("replication seeds are seed_base + rep") {
  Scenario s = small_scenario(Kernel::laplace(), 0.3);
  s.metric = Metric::ThetaL2;
  const RateReport r = run_rate_experiment(s);
  for (std::size_t rep : {0, 7, 49}) {
    const Dataset d = simulate_dataset(s.kernel, s.truth, s.design, 120, s.sigma, s.seed_base + rep);
    FitConfig cfg = s.fit;
    cfg.k = 1;
    const FitResult fit = fit_known_k(d, s.kernel, 1, cfg);
    CHECK(r.points[1].values[rep] == metric_value(Metric::ThetaL2, s.truth, fit.theta_hat));
  }
}

TEST_CASE("reports are deterministic and independent of the worker count") {
  Scenario s = small_scenario(Kernel::laplace(), 0.3);
  const RateReport a = run_rate_experiment(s);
  const RateReport b = run_rate_experiment(s);
  s.workers = 3;
  const RateReport c = run_rate_experiment(s);
  REQUIRE(a.points.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(same_bits(a.points[i].values, b.points[i].values));
    CHECK(same_bits(a.points[i].values, c.points[i].values));
    CHECK(a.points[i].median == c.points[i].median);
  }
  CHECK(a.slope == c.slope);
  CHECK(a.status != ReportStatus::DegenerateNoiseless);
  CHECK(std::isfinite(a.slope));
  for (const auto& pt : a.points) {
    CHECK(pt.q10 <= pt.median);
    CHECK(pt.median <= pt.q90);
    CHECK(pt.q10 >= 0.0);
  }
}

TEST_CASE("noiseless coverage is complete") {
  Scenario s = small_scenario(Kernel::laplace(), 0.0);
  s.n_grid = {100};
  const CoverageReport r = run_coverage_experiment(s, 0.95);
  REQUIRE(r.points.size() == 1);
  for (double c : r.points[0].coverage) CHECK(c == 1.0);
  CHECK(r.points[0].failures == 0);
  Scenario abel = s;
  abel.kernel = Kernel::abel(0.75);
  CHECK_THROWS_AS(run_coverage_experiment(abel, 0.95), InferenceError);
}

// At n = 400 the standardized errors still have variance about 2 with
// heavy tails, so the check runs where the normal limit has set in.
TEST_CASE("coverage tracks a second nominal level") {
  Scenario s = small_scenario(Kernel::laplace(), 0.2);
  s.n_grid = {4000};
  s.reps = 200;
  const CoverageReport r = run_coverage_experiment(s, 0.5);
  REQUIRE(r.points.size() == 1);
  const auto& pt = r.points[0];
  REQUIRE(pt.coverage.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CAPTURE(j);
    // Binomial sd at 200 reps is 0.035; allow three of them.
    CHECK(std::abs(pt.coverage[j] - 0.5) < 0.106);
    CHECK(pt.stderr_[j] == doctest::Approx(std::sqrt(pt.coverage[j] * (1 - pt.coverage[j]) / 200.0)));
  }
}

TEST_CASE("jump-count recovery") {
  Scenario s = small_scenario(Kernel::boxcar(), 0.0);
  s.fit.k_max = 3;
  const SelectionReport clean = run_selection_experiment(s);
  for (const auto& pt : clean.points) CHECK(pt.recovery == 1.0);
  CHECK(clean.nondecreasing);
  CHECK(clean.pass);

  s.sigma = 0.2;
  s.fit.lambda = 1e6;
  const SelectionReport dominated = run_selection_experiment(s);
  for (const auto& pt : dominated.points) {
    CHECK(pt.recovery == 0.0);
    for (long k : pt.k_hat) CHECK(k == 0);
  }
  CHECK_FALSE(dominated.pass);
}

TEST_CASE("normality diagnostics") {
  Scenario s = small_scenario(Kernel::laplace(), 0.0);
  const NormalityReport flat = normality_diagnostics(s, 120);
  CHECK(flat.degenerate);
  CHECK(flat.status == ReportStatus::DegenerateNoiseless);
  CHECK_FALSE(flat.pass);
  for (const auto& row : flat.z)
    for (double z : row) CHECK(z == 0.0);

  Scenario abel = s;
  abel.kernel = Kernel::abel(0.75);
  CHECK_THROWS_AS(normality_diagnostics(abel, 120), InferenceError);

  // Columns drawn from a standard normal summarize to about (0, 1).
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> z(2000, std::vector<double>(2));
  for (auto& row : z)
    for (double& v : row) v = g(rng);
  const auto summary = summarize_standardized(z, 2);
  REQUIRE(summary.size() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> col;
    for (const auto& row : z) col.push_back(row[j]);
    CHECK(std::abs(summary[j].mean) < 0.1);
    CHECK(std::abs(summary[j].variance - 1.0) < 0.1);
    CHECK(summary[j].ks_distance == ks_distance_normal(col));
  }
}

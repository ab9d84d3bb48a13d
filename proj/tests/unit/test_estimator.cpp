#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "stepdeconv/error.hpp"
#include "stepdeconv/estimator.hpp"
#include "stepdeconv/model.hpp"
#include "support.hpp"

using namespace stepdeconv;

namespace {

const DesignSpec kFixed{};

double truth_objective(const Dataset& d, const Kernel& k, const StepFunction& f) {
  double ss = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = d.y[i] - forward_eval(k, f, d.x[i]);
    ss += r * r;
  }
  return ss / static_cast<double>(d.size());
}

}  // namespace

TEST_CASE("heights with no jumps give the sample mean") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  Dataset d;
  d.x = generate_design(kFixed, 37);
  for (std::size_t i = 0; i < 37; ++i) d.y.push_back(z(rng));
  const double mean = std::accumulate(d.y.begin(), d.y.end(), 0.0) / 37.0;
  for (const auto& k : {Kernel::gaussian(), Kernel::boxcar(), Kernel::laplace()}) {
    const auto h = heights_given_jumps(d, k, {}, 100.0);
    REQUIRE(h.levels.size() == 1);
    CHECK(h.levels[0] == doctest::Approx(mean).epsilon(1e-13));
  }
}

TEST_CASE("heights at the true jumps recover noiseless levels") {
  std::mt19937_64 rng(2);
  for (const auto& k : testing::bounded_kernels()) {
    const StepFunction f = testing::random_step(rng, 3);
    const Dataset d = simulate_dataset(k, f, kFixed, 300, 0.0, 1);
    const auto h = heights_given_jumps(d, k, f.jumps(), 10.0);
    for (std::size_t j = 0; j < h.levels.size(); ++j) CHECK(std::abs(h.levels[j] - f.levels()[j]) < 1e-8);
    CHECK(h.rss < 1e-20);
  }
}

TEST_CASE("heights match a dense two-dimensional grid search") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  Dataset d;
  for (int i = 0; i < 5; ++i) d.x.push_back(u(rng));
  std::sort(d.x.begin(), d.x.end());
  for (int i = 0; i < 5; ++i) d.y.push_back(z(rng));
  const Kernel k = Kernel::boxcar();
  const std::vector<double> taus{0.5};
  const auto h = heights_given_jumps(d, k, taus, 100.0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> c1, c2;
  for (double x : d.x) {
    c1.push_back(delta_phi(k, x, -inf, 0.5));
    c2.push_back(delta_phi(k, x, 0.5, inf));
  }
  auto rss = [&](double b1, double b2) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += (b1 * c1[i] + b2 * c2[i] - d.y[i]) * (b1 * c1[i] + b2 * c2[i] - d.y[i]);
    return s / 5.0;
  };
  double best = std::numeric_limits<double>::infinity();
  // Grid of spacing 1e-3 around the box containing the solution.
  const double m0 = std::round(h.levels[0]), m1 = std::round(h.levels[1]);
  for (int i = -2000; i <= 2000; ++i)
    for (int j = -2000; j <= 2000; ++j) best = std::min(best, rss(m0 + i * 1e-3, m1 + j * 1e-3));
  CHECK(std::abs(best - h.rss) < 1e-4);
  CHECK(h.rss <= best + 1e-12);
}

TEST_CASE("rank-deficient and invalid jump sets") {
  const StepFunction f({0.0, 1.0}, {0.5});
  const Dataset d = simulate_dataset(Kernel::boxcar(), f, kFixed, 10, 0.0, 1);
    // Both jumps lie beyond every design point: their partial masses vanish.
  const std::vector<double> close{0.96, 0.97};
  CHECK_THROWS_AS(heights_given_jumps(d, Kernel::boxcar(), close, 10.0), DegenerateFit);
  const std::vector<double> unordered{0.6, 0.4};
  CHECK_THROWS_AS(heights_given_jumps(d, Kernel::boxcar(), unordered, 10.0), ContractViolation);
  const std::vector<double> outside{1.2};
  CHECK_THROWS_AS(heights_given_jumps(d, Kernel::boxcar(), outside, 10.0), ContractViolation);
}

TEST_CASE("levels beyond the bound are clipped") {
  const StepFunction f({0.0, 8.0}, {0.5});
  const Dataset d = simulate_dataset(Kernel::laplace(), f, kFixed, 100, 0.0, 1);
  const std::vector<double> taus{0.5};
  const auto h = heights_given_jumps(d, Kernel::laplace(), taus, 5.0);
  CHECK(h.clipped);
  CHECK(h.levels[1] == 5.0);
  CHECK(h.rss > 0.1);
}

TEST_CASE("noiseless boxcar recovery") {
  const StepFunction f({0.0, 1.0}, {0.5});
  const Dataset d = simulate_dataset(Kernel::boxcar(), f, kFixed, 100, 0.0, 1);
  const FitConfig cfg;
  const FitResult r = fit_known_k(d, Kernel::boxcar(), 1, cfg);
  CHECK(std::abs(r.theta_hat.jump(0) - 0.5) <= cfg.refine_tol);
  CHECK(std::abs(r.theta_hat.level(0)) < 1e-8);
  CHECK(std::abs(r.theta_hat.level(1) - 1.0) < 1e-8);
  CHECK(r.k_hat == 1);
}

TEST_CASE("constant truth with no jumps") {
  for (const auto& k : {Kernel::gaussian(), Kernel::laplace(), Kernel::boxcar()}) {
    const Dataset d = simulate_dataset(k, StepFunction::constant(2.5), kFixed, 50, 0.0, 1);
    const FitResult r = fit_known_k(d, k, 0, {});
    CHECK(r.theta_hat.size() == 1);
    CHECK(r.theta_hat[0] == doctest::Approx(2.5).epsilon(1e-13));
    CHECK(r.diagnostics.search == "none");
  }
}

TEST_CASE("known-k fits are at least as good as the truth") {
  std::mt19937_64 rng(4);
  auto kernels = testing::bounded_kernels();
  kernels.push_back(Kernel::abel(0.75));
  int t = 0;
  for (const auto& k : kernels) {
    for (std::size_t kk = 1; kk <= 3; ++kk, ++t) {
      CAPTURE(k.name());
      CAPTURE(kk);
      const StepFunction f = testing::random_step(rng, kk, 0.1, 0.1, 0.5);
      const Dataset d = simulate_dataset(k, f, kFixed, 200, 0.1, 100 + t);
      const FitResult r = fit_known_k(d, k, kk, {});
      CHECK(r.objective <= truth_objective(d, k, f) + 1e-9);
      CHECK(r.objective >= 0.0);
      CHECK(r.k_hat == kk);
      CHECK(r.theta_hat.size() == 2 * kk + 1);
    }
  }
}

TEST_CASE("grid search without refinement equals exhaustive enumeration") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto kernels = testing::bounded_kernels();
  kernels.push_back(Kernel::abel(0.75));
  FitConfig cfg;
  cfg.refine = false;
  cfg.bound = 100.0;
  for (int t = 0; t < 50; ++t) {
    const Kernel& k = kernels[static_cast<std::size_t>(t) % kernels.size()];
    const std::size_t kk = 1 + static_cast<std::size_t>(t) % 3;
    const StepFunction f = testing::random_step(rng, kk);
    DesignSpec spec{DesignKind::Random, DesignDensity::uniform(), static_cast<std::uint64_t>(t)};
    const Dataset d = simulate_dataset(k, f, spec, 20, 0.3, 1000 + t);
    const auto oracle = testing::exhaustive_grid_fit(d, k, kk, default_grid_points(20), cfg.bound);
    const FitResult r = fit_known_k(d, k, kk, cfg);
    CAPTURE(t);
    CAPTURE(k.name());
    REQUIRE(r.k_hat == kk);
    for (std::size_t i = 0; i < kk; ++i) CHECK(r.theta_hat.jump(i) == doctest::Approx(oracle.taus[i]).epsilon(1e-14));
    CHECK(std::abs(r.objective - oracle.rss) <= 1e-12 * std::max(1.0, oracle.rss));
  }
}

TEST_CASE("greedy search is used beyond the enumeration budget") {
  const StepFunction f({0.0, 1.0, -1.0, 0.5}, {0.2, 0.5, 0.8});
  const Dataset d = simulate_dataset(Kernel::boxcar(), f, kFixed, 400, 0.05, 3);
  FitConfig cfg;
  cfg.exhaustive_budget = 10;
  const FitResult r = fit_known_k(d, Kernel::boxcar(), 3, cfg);
  CHECK(r.diagnostics.search == "greedy");
  CHECK(r.objective <= truth_objective(d, Kernel::boxcar(), f) + 1e-9);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(r.theta_hat.jump(i) - f.jumps()[i]) < 0.05);
}

// Equivariance is exact for the unconstrained profile, so R is set out of
// reach of every level.
TEST_CASE("shift and scale equivariance") {
  struct Case {
    Kernel k;
    std::size_t kk;
  };
  const std::vector<Case> cases{{Kernel::gaussian(), 1}, {Kernel::laplace(), 1}, {Kernel::boxcar(), 2},
                                {Kernel::tent_power(2), 2}, {Kernel::polynomial(1), 2}};
  std::mt19937_64 rng(6);
  FitConfig cfg;
  cfg.bound = 1e4;
  for (const auto& [k, kk] : cases) {
    CAPTURE(k.name());
    const StepFunction f = testing::random_step(rng, kk, 0.15, 0.15, 0.8);
    const Dataset d = simulate_dataset(k, f, kFixed, 150, 0.1, 7);
    const FitResult base = fit_known_k(d, k, kk, cfg);

    Dataset shifted = d;
    for (double& y : shifted.y) y += 0.75 * k.total_mass();
    const FitResult s = fit_known_k(shifted, k, kk, cfg);
    Dataset scaled = d;
    for (double& y : scaled.y) y *= 1.7;
    const FitResult c = fit_known_k(scaled, k, kk, cfg);
    CHECK(s.objective == doctest::Approx(base.objective).epsilon(1e-8));
    CHECK(c.objective == doctest::Approx(1.7 * 1.7 * base.objective).epsilon(1e-8));
    // Jumps agree up to the refinement tolerance; levels at fixed jumps are
    // an exact linear map of y.
    for (std::size_t i = 0; i < kk; ++i) {
      CHECK(std::abs(s.theta_hat.jump(i) - base.theta_hat.jump(i)) < 1e-4);
      CHECK(std::abs(c.theta_hat.jump(i) - base.theta_hat.jump(i)) < 1e-4);
    }
    std::vector<double> taus(kk);
    for (std::size_t i = 0; i < kk; ++i) taus[i] = base.theta_hat.jump(i);
    const HeightsFit h0 = heights_given_jumps(d, k, taus, 1e12);
    const HeightsFit hs = heights_given_jumps(shifted, k, taus, 1e12);
    const HeightsFit hc = heights_given_jumps(scaled, k, taus, 1e12);
    REQUIRE(!hc.clipped);
    for (std::size_t j = 0; j <= kk; ++j) {
      const double tol = 1e-9 * std::max(1.0, std::abs(h0.levels[j]));
      CHECK(std::abs(hs.levels[j] - h0.levels[j] - 0.75) < tol);
      CHECK(std::abs(hc.levels[j] - 1.7 * h0.levels[j]) < tol);
    }
  }
}

TEST_CASE("known-k preconditions") {
  const Dataset d = simulate_dataset(Kernel::gaussian(), StepFunction::constant(1.0), kFixed, 6, 0.1, 1);
  CHECK_THROWS_AS(fit_known_k(d, Kernel::gaussian(), 3, {}), ContractViolation);
  FitConfig cfg;
  cfg.bound = 0.0;
  CHECK_THROWS_AS(fit_known_k(d, Kernel::gaussian(), 1, cfg), ContractViolation);
}

TEST_CASE("select_lambda schedule") {
  CHECK(select_lambda(100, 0.5, 1.0) == doctest::Approx(std::log(100.0) * std::pow(100.0, -2.0 / 3.0)).epsilon(1e-15));
  CHECK(select_lambda(100, 0.5, 1.0) == doctest::Approx(0.21382).epsilon(1e-4));
  for (std::size_t n : {3, 10, 1000, 100000}) CHECK(select_lambda(10 * n, 0.5, 1.0) < select_lambda(n, 0.5, 1.0));
  CHECK(select_lambda(500, 0.3, 2.0) == 2.0 * select_lambda(500, 0.3, 1.0));
  CHECK_THROWS_AS(select_lambda(1, 0.5, 1.0), ContractViolation);
  CHECK_THROWS_AS(select_lambda(10, 0.0, 1.0), ContractViolation);
}

TEST_CASE("first-difference variance") {
  const std::vector<double> y{1.0, 3.0, 2.0, 2.0};
  CHECK(difference_variance(y) == doctest::Approx((4.0 + 1.0 + 0.0) / 6.0));
}

TEST_CASE("a dominant penalty selects no jumps") {
  const StepFunction f({0.0, 1.0}, {0.5});
  const Dataset d = simulate_dataset(Kernel::gaussian(), f, kFixed, 200, 0.1, 3);
  double mean = 0.0, ss = 0.0;
  for (double y : d.y) mean += y / 200.0;
  for (double y : d.y) ss += (y - mean) * (y - mean) / 200.0;
  FitConfig cfg;
  cfg.lambda = 1.01 * ss;
  const FitResult r = fit_penalized(d, Kernel::gaussian(), cfg);
  CHECK(r.k_hat == 0);
  CHECK(r.lambda == *cfg.lambda);
}

TEST_CASE("noiseless penalized fit finds the jump count") {
  const StepFunction f({0.0, 1.0, -0.5}, {0.3, 0.7});
  for (const auto& k : {Kernel::gaussian(), Kernel::laplace(), Kernel::boxcar()}) {
    CAPTURE(k.name());
    const Dataset d = simulate_dataset(k, f, kFixed, 300, 0.0, 1);
    FitConfig cfg;
    cfg.lambda = 1e-6;
    cfg.k_max = 4;
    const FitResult r = fit_penalized(d, k, cfg);
    CHECK(r.k_hat == 2);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(r.theta_hat[j] - f.theta()[j]) < 1e-6);
    const auto& per_k = r.diagnostics.objective_per_k;
    REQUIRE(per_k.size() == 5);
    for (std::size_t kk = 1; kk < per_k.size(); ++kk) CHECK(per_k[kk] <= per_k[kk - 1] + 1e-15);
    CHECK(r.penalized_objective == doctest::Approx(r.objective + 3e-6));
  }
}

TEST_CASE("per-k objectives are non-increasing on noisy data") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 6; ++t) {
    const Kernel k = t % 2 ? Kernel::laplace() : Kernel::gaussian();
    const StepFunction f = testing::random_step(rng, 1 + t % 3, 0.1, 0.1, 0.5);
    const Dataset d = simulate_dataset(k, f, kFixed, 200, 0.2, 50 + t);
    FitConfig cfg;
    cfg.k_max = 4;
    const FitResult r = fit_penalized(d, k, cfg);
    const auto& per_k = r.diagnostics.objective_per_k;
    for (std::size_t kk = 1; kk < per_k.size(); ++kk) CHECK(per_k[kk] <= per_k[kk - 1] + 1e-12);
    CHECK(r.k_hat <= cfg.k_max);
  }
}

TEST_CASE("fitted values reproduce the forward curve") {
  const StepFunction f({0.0, 1.0, -0.5}, {0.3, 0.7});
  const Dataset d = simulate_dataset(Kernel::laplace(), f, kFixed, 50, 0.0, 1);
  const auto v = fitted_values(d, Kernel::laplace(), f.theta());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(v[i] == doctest::Approx(d.y[i]).epsilon(1e-14));
}

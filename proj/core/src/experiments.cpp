#include "stepdeconv/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "stepdeconv/error.hpp"
#include "stepdeconv/inference.hpp"
#include "stepdeconv/normal.hpp"

namespace stepdeconv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

DesignSpec rep_design(const Scenario& s, std::size_t rep) {
  DesignSpec d = s.design;
  d.seed = s.design.seed + s.seed_base + rep;
  return d;
}

Dataset rep_dataset(const Scenario& s, std::size_t n, std::size_t rep) {
  return simulate_dataset(s.kernel, s.truth, rep_design(s, rep), n, s.sigma, s.seed_base + rep);
}

FitConfig known_k_config(const Scenario& s) {
  FitConfig cfg = s.fit;
  cfg.k = s.truth.num_jumps();
  return cfg;
}

// Linear-interpolated empirical quantile of sorted data.
double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return kNaN;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[hi] * w;
}

bool too_many(std::size_t failures, std::size_t reps, double cap) {
  return static_cast<double>(failures) > cap * static_cast<double>(reps);
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::ThetaL2: return "theta_l2";
    case Metric::TauAbs: return "tau_abs";
    case Metric::L2Function: return "l2_function";
    case Metric::Hausdorff: return "hausdorff";
  }
  return "unknown";
}

Metric metric_from_string(std::string_view name) {
  if (name == "theta_l2") return Metric::ThetaL2;
  if (name == "tau_abs") return Metric::TauAbs;
  if (name == "l2_function") return Metric::L2Function;
  if (name == "hausdorff") return Metric::Hausdorff;
  throw ConfigError("unknown metric '" + std::string(name) +
                    "' (expected theta_l2, tau_abs, l2_function or hausdorff)");
}

std::string_view to_string(ReportStatus s) {
  switch (s) {
    case ReportStatus::Passed: return "passed";
    case ReportStatus::Failed: return "failed";
    case ReportStatus::DegenerateNoiseless: return "degenerate-noiseless";
    case ReportStatus::TooManyFailures: return "too-many-failures";
  }
  return "unknown";
}

void Scenario::validate_basic() const {
  if (n_grid.empty()) throw ConfigError("scenario needs at least one sample size");
  if (reps == 0) throw ConfigError("scenario needs reps >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and >= 0");
  for (std::size_t n : n_grid)
    if (n < 2 * truth.num_jumps() + 2)
      throw ConfigError("sample size " + std::to_string(n) + " is too small for " +
                        std::to_string(truth.num_jumps()) + " jumps");
}

void Scenario::validate_for_rates() const {
  validate_basic();
  if (n_grid.size() < 3) throw ConfigError("rate studies need at least three sample sizes");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw ConfigError("the n grid must be strictly increasing");
  if (reps < 50) throw ConfigError("rate studies need reps >= 50, got " + std::to_string(reps));
}

double theoretical_slope(Metric m, const Kernel& k) {
  if (m == Metric::L2Function) return -0.25;
  if (k.family() == KernelFamily::Abel && (m == Metric::TauAbs || m == Metric::Hausdorff))
    return -1.0 / (3.0 - 2.0 * k.alpha());
  return -0.5;
}

std::pair<double, double> slope_band(const Scenario& s) {
  if (s.targets.slope_band) return *s.targets.slope_band;
  const double t = s.targets.slope.value_or(theoretical_slope(s.metric, s.kernel));
  return {t - 0.15, t + 0.15};
}

double metric_value(Metric m, const StepFunction& truth, const ThetaVector& fitted) {
  const ThetaVector t = truth.theta();
  switch (m) {
    case Metric::ThetaL2: {
      if (t.size() != fitted.size()) return kInf;
      double ss = 0.0;
      for (std::size_t j = 0; j < t.size(); ++j) ss += (t[j] - fitted[j]) * (t[j] - fitted[j]);
      return std::sqrt(ss);
    }
    case Metric::TauAbs: {
      if (t.size() != fitted.size()) return kInf;
      double worst = 0.0;
      for (std::size_t i = 0; i < t.num_jumps(); ++i)
        worst = std::max(worst, std::abs(t.jump(i) - fitted.jump(i)));
      return worst;
    }
    case Metric::L2Function:
      return l2_distance(truth, StepFunction::from_theta(fitted), 0.0, 1.0);
    case Metric::Hausdorff:
      return hausdorff_jump_distance(truth, StepFunction::from_theta(fitted));
  }
  return kNaN;
}

SlopeFit fit_log_log_slope(std::span<const double> ns, std::span<const double> values) {
  if (ns.size() != values.size() || ns.size() < 2)
    throw ContractViolation("slope fit needs at least two (n, value) pairs of equal length");
  const std::size_t m = ns.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(ns[i] > 0.0) || !(values[i] > 0.0))
      throw ContractViolation("slope fit needs positive sizes and values");
    lx[i] = std::log(ns[i]);
    ly[i] = std::log(values[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ContractViolation("slope fit needs distinct sample sizes");
  SlopeFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  if (m > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = ly[i] - out.intercept - out.slope * lx[i];
      rss += r * r;
    }
    out.stderr_ = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
  }
  return out;
}

double ks_distance_normal(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("KS distance needs at least one value");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double m = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = normal_cdf(v[i]);
    d = std::max({d, static_cast<double>(i + 1) / m - F, F - static_cast<double>(i) / m});
  }
  return d;
}

double ks_band95(std::size_t m) {
  if (m == 0) throw ContractViolation("KS band needs m >= 1");
  return 1.358 / std::sqrt(static_cast<double>(m));
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("STEPDECONV_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

RateReport run_rate_experiment(const Scenario& s) {
  s.validate_for_rates();
  RateReport rep;
  rep.metric = s.metric;
  rep.target_slope = s.targets.slope.value_or(theoretical_slope(s.metric, s.kernel));
  rep.band = slope_band(s);
  const FitConfig cfg = known_k_config(s);
  bool failed_cap = false;

  for (std::size_t n : s.n_grid) {
    RatePoint pt;
    pt.n = n;
    pt.values = run_replications<double>(s.reps, s.workers, [&](std::size_t r) {
      try {
        const Dataset d = rep_dataset(s, n, r);
        const FitResult fit = fit_known_k(d, s.kernel, s.truth.num_jumps(), cfg);
        const double v = metric_value(s.metric, s.truth, fit.theta_hat);
        return std::isfinite(v) ? v : kNaN;
      } catch (const Error&) {
        return kNaN;
      }
    });
    std::vector<double> ok;
    for (double v : pt.values) {
      if (std::isnan(v))
        ++pt.failures;
      else
        ok.push_back(v);
    }
    std::sort(ok.begin(), ok.end());
    pt.median = quantile_sorted(ok, 0.5);
    pt.q10 = quantile_sorted(ok, 0.1);
    pt.q90 = quantile_sorted(ok, 0.9);
    if (too_many(pt.failures, s.reps, s.targets.max_failure_fraction)) failed_cap = true;
    rep.points.push_back(std::move(pt));
  }

  if (failed_cap) {
    rep.status = ReportStatus::TooManyFailures;
    rep.slope = kNaN;
    rep.slope_stderr = kNaN;
    return rep;
  }
  bool degenerate = s.sigma == 0.0;
  for (const auto& pt : rep.points)
    if (!(pt.median > 0.0)) degenerate = true;
  if (degenerate) {
    rep.status = ReportStatus::DegenerateNoiseless;
    rep.slope = kNaN;
    rep.slope_stderr = kNaN;
    return rep;
  }
  std::vector<double> ns, med;
  for (const auto& pt : rep.points) {
    ns.push_back(static_cast<double>(pt.n));
    med.push_back(pt.median);
  }
  const SlopeFit sf = fit_log_log_slope(ns, med);
  rep.slope = sf.slope;
  rep.slope_stderr = sf.stderr_;
  rep.pass = rep.slope >= rep.band.first && rep.slope <= rep.band.second;
  rep.status = rep.pass ? ReportStatus::Passed : ReportStatus::Failed;
  return rep;
}

CoverageReport run_coverage_experiment(const Scenario& s, double level) {
  s.validate_basic();
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  if (!s.kernel.bounded())
    throw InferenceError("coverage needs a bounded kernel; the " + s.kernel.name() +
                         " kernel has no normal limit");
  CoverageReport rep;
  rep.level = level;
  rep.band = s.targets.coverage_band;
  const FitConfig cfg = known_k_config(s);
  const ThetaVector truth = s.truth.theta();
  const std::size_t p = truth.size();
  const double slack = 10.0 * cfg.refine_tol;
  bool failed_cap = false;
  bool in_band = true;

  for (std::size_t n : s.n_grid) {
    CoveragePoint pt;
    pt.n = n;
    pt.covered = run_replications<std::vector<bool>>(s.reps, s.workers, [&](std::size_t r) {
      std::vector<bool> row;
      try {
        const Dataset d = rep_dataset(s, n, r);
        const FitResult fit = fit_known_k(d, s.kernel, s.truth.num_jumps(), cfg);
        const InferenceReport inf =
            make_inference_report(d, fit, s.kernel, s.design.density, level, s.quad_tol);
        if (inf.degenerate || inf.intervals.size() != p) return row;
        row.resize(p);
        for (std::size_t j = 0; j < p; ++j)
          row[j] = truth[j] >= inf.intervals[j].lo - slack && truth[j] <= inf.intervals[j].hi + slack;
      } catch (const Error&) {
        row.clear();
      }
      return row;
    });
    std::vector<std::size_t> hits(p, 0);
    for (const auto& row : pt.covered) {
      if (row.empty()) {
        ++pt.failures;
        continue;
      }
      ++pt.used;
      for (std::size_t j = 0; j < p; ++j) hits[j] += row[j] ? 1 : 0;
    }
    pt.coverage.assign(p, kNaN);
    pt.stderr_.assign(p, kNaN);
    if (pt.used > 0) {
      const double u = static_cast<double>(pt.used);
      for (std::size_t j = 0; j < p; ++j) {
        const double c = static_cast<double>(hits[j]) / u;
        pt.coverage[j] = c;
        pt.stderr_[j] = std::sqrt(c * (1.0 - c) / u);
        if (!(c >= rep.band.first && c <= rep.band.second)) in_band = false;
      }
    } else {
      in_band = false;
    }
    if (too_many(pt.failures, s.reps, s.targets.max_failure_fraction)) failed_cap = true;
    rep.points.push_back(std::move(pt));
  }
  if (failed_cap) {
    rep.status = ReportStatus::TooManyFailures;
    return rep;
  }
  rep.pass = in_band;
  rep.status = rep.pass ? ReportStatus::Passed : ReportStatus::Failed;
  return rep;
}

SelectionReport run_selection_experiment(const Scenario& s) {
  s.validate_basic();
  SelectionReport rep;
  rep.min_recovery = s.targets.min_recovery;
  FitConfig cfg = s.fit;
  cfg.k.reset();
  const long k_true = static_cast<long>(s.truth.num_jumps());
  bool failed_cap = false;

  for (std::size_t n : s.n_grid) {
    SelectionPoint pt;
    pt.n = n;
    pt.k_hat = run_replications<long>(s.reps, s.workers, [&](std::size_t r) {
      try {
        const Dataset d = rep_dataset(s, n, r);
        return static_cast<long>(fit_penalized(d, s.kernel, cfg).k_hat);
      } catch (const Error&) {
        return -1L;
      }
    });
    std::size_t used = 0, hits = 0;
    for (long kh : pt.k_hat) {
      if (kh < 0) {
        ++pt.failures;
        continue;
      }
      ++used;
      hits += kh == k_true ? 1 : 0;
    }
    if (used > 0) {
      pt.recovery = static_cast<double>(hits) / static_cast<double>(used);
      pt.stderr_ = std::sqrt(pt.recovery * (1.0 - pt.recovery) / static_cast<double>(used));
    } else {
      pt.recovery = kNaN;
      pt.stderr_ = kNaN;
    }
    if (too_many(pt.failures, s.reps, s.targets.max_failure_fraction)) failed_cap = true;
    rep.points.push_back(std::move(pt));
  }

  rep.nondecreasing = true;
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    const auto& a = rep.points[i - 1];
    const auto& b = rep.points[i];
    if (!(b.recovery >= a.recovery - std::max(a.stderr_, b.stderr_))) rep.nondecreasing = false;
  }
  if (failed_cap) {
    rep.status = ReportStatus::TooManyFailures;
    return rep;
  }
  rep.pass = rep.nondecreasing && rep.points.back().recovery >= rep.min_recovery;
  rep.status = rep.pass ? ReportStatus::Passed : ReportStatus::Failed;
  return rep;
}

std::vector<NormalitySummary> summarize_standardized(const std::vector<std::vector<double>>& z,
                                                     std::size_t params) {
  std::vector<NormalitySummary> out(params);
  for (std::size_t j = 0; j < params; ++j) {
    std::vector<double> col;
    for (const auto& row : z)
      if (row.size() == params) col.push_back(row[j]);
    if (col.empty()) {
      out[j] = {kNaN, kNaN, kNaN};
      continue;
    }
    const double m = static_cast<double>(col.size());
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= m;
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    var = col.size() > 1 ? var / (m - 1.0) : 0.0;
    out[j] = {mean, var, ks_distance_normal(col)};
  }
  return out;
}

NormalityReport normality_diagnostics(const Scenario& s, std::size_t n) {
  if (s.reps == 0) throw ConfigError("scenario needs reps >= 1");
  if (n < 2 * s.truth.num_jumps() + 2) throw ConfigError("sample size too small for the truth");
  if (!s.kernel.bounded())
    throw InferenceError("normality diagnostics need a bounded kernel; the " + s.kernel.name() +
                         " kernel has no normal limit");
  NormalityReport rep;
  rep.n = n;
  const ThetaVector truth = s.truth.theta();
  const std::size_t p = truth.size();
  const FitConfig cfg = known_k_config(s);
  const bool noiseless = s.sigma == 0.0;

  std::vector<double> scale(p, 0.0);
  if (!noiseless) {
    const VMatrix vm = v_matrix(s.kernel, s.truth, s.design.density, s.quad_tol);
    Eigen::LLT<Eigen::MatrixXd> llt(vm.V);
    if (vm.degenerate || llt.info() != Eigen::Success)
      throw InferenceError("V at the true parameters is not positive definite");
    const Eigen::MatrixXd vinv = llt.solve(Eigen::MatrixXd::Identity(vm.V.rows(), vm.V.cols()));
    for (std::size_t j = 0; j < p; ++j)
      scale[j] = std::sqrt(s.sigma * s.sigma * vinv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
  }

  const double rn = std::sqrt(static_cast<double>(n));
  rep.z = run_replications<std::vector<double>>(s.reps, s.workers, [&](std::size_t r) {
    std::vector<double> row;
    try {
      const Dataset d = rep_dataset(s, n, r);
      const FitResult fit = fit_known_k(d, s.kernel, s.truth.num_jumps(), cfg);
      if (fit.theta_hat.size() != p) return row;
      row.resize(p);
      for (std::size_t j = 0; j < p; ++j)
        row[j] = noiseless ? 0.0 : rn * (fit.theta_hat[j] - truth[j]) / scale[j];
    } catch (const Error&) {
      row.clear();
    }
    return row;
  });
  std::size_t used = 0;
  for (const auto& row : rep.z) {
    if (row.empty())
      ++rep.failures;
    else
      ++used;
  }
  rep.params = summarize_standardized(rep.z, p);
  rep.ks_band = used > 0 ? ks_band95(used) : kNaN;
  if (too_many(rep.failures, s.reps, s.targets.max_failure_fraction)) {
    rep.status = ReportStatus::TooManyFailures;
    return rep;
  }
  if (noiseless) {
    rep.degenerate = true;
    rep.status = ReportStatus::DegenerateNoiseless;
    return rep;
  }
  bool ok = true;
  for (const auto& ps : rep.params) {
    ok = ok && ps.mean >= s.targets.mean_band.first && ps.mean <= s.targets.mean_band.second;
    ok = ok && ps.variance >= s.targets.variance_band.first &&
         ps.variance <= s.targets.variance_band.second;
  }
  rep.pass = ok;
  rep.status = ok ? ReportStatus::Passed : ReportStatus::Failed;
  return rep;
}

}  // namespace stepdeconv

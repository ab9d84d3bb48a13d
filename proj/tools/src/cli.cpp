#include "stepdeconv_cli/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stepdeconv/config.hpp"
#include "stepdeconv/error.hpp"
#include "stepdeconv/estimator.hpp"
#include "stepdeconv/experiments.hpp"
#include "stepdeconv/inference.hpp"
#include "stepdeconv/io.hpp"
#include "stepdeconv/model.hpp"

namespace stepdeconv::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  bool quiet = false;
};

std::string fmt(double v, int digits = 4) {
  if (!std::isfinite(v)) return format_double(v);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

std::string band(std::pair<double, double> b) { return "[" + fmt(b.first) + ", " + fmt(b.second) + "]"; }

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

RunConfig load(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.k) cfg.fit.k = *o.k;
  return cfg;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const RunConfig cfg = load(o);
  Dataset data = read_csv(o.data);
  data.kernel = cfg.kernel;
  const FitResult fit = cfg.fit.k ? fit_known_k(data, cfg.kernel, *cfg.fit.k, cfg.fit)
                                  : fit_penalized(data, cfg.kernel, cfg.fit);
  const fs::path dir(o.out);
  write_text_file(dir / "fit.json", fit_to_json(fit, cfg.kernel));
  if (!o.quiet) {
    out << "fit: n=" << data.size() << " k_hat=" << fit.k_hat << " objective=" << fmt(fit.objective, 6)
        << " theta_hat=";
    for (std::size_t j = 0; j < fit.theta_hat.size(); ++j)
      out << (j ? "," : "") << fmt(fit.theta_hat[j], 8);
    out << "\n";
  }
  if (!cfg.inference) return kOk;
  if (!cfg.kernel.bounded())
    throw InferenceError("inference was requested for the " + cfg.kernel.name() +
                         " kernel, which is unbounded: V is infinite and only the n^(-1/(3-2 alpha)) rate "
                         "is available. Set inference = false to fit without intervals.");
  const InferenceReport rep = make_inference_report(data, fit, cfg.kernel, cfg.design.density, cfg.level, cfg.quad_tol);
  write_text_file(dir / "inference.json", inference_to_json(rep, cfg.kernel));
  if (!o.quiet) {
    if (rep.degenerate) {
      out << "inference: V is degenerate (min eigenvalue " << fmt(rep.V_min_eig) << "); no intervals\n";
    } else {
      out << "inference: sigma2_hat=" << fmt(rep.sigma2_hat) << " level=" << rep.level << " intervals=";
      for (std::size_t j = 0; j < rep.intervals.size(); ++j)
        out << (j ? "," : "") << band({rep.intervals[j].lo, rep.intervals[j].hi});
      out << "\n";
    }
  }
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const RunConfig cfg = load(o);
  if (!cfg.truth) throw ConfigError("simulate needs a truth (levels and jumps)");
  if (cfg.n.size() != 1) throw ConfigError("simulate needs a single sample size 'n'");
  const Dataset d = simulate_dataset(cfg.kernel, *cfg.truth, cfg.design, cfg.n.front(), cfg.sigma, cfg.seed);
  const fs::path dir(o.out);
  write_text_file(dir / "data.csv", format_csv(d));
  write_text_file(dir / "truth.json", truth_to_json(d));
  if (!o.quiet) out << "simulate: wrote " << d.size() << " rows to " << (dir / "data.csv").string() << "\n";
  return kOk;
}

int cmd_rates(const Options& o, std::ostream& out) {
  const Scenario s = load(o).to_scenario();
  const RateReport rep = run_rate_experiment(s);
  const fs::path dir(o.out);
  write_text_file(dir / "rates_report.json", rate_report_to_json(rep, s));
  write_text_file(dir / "rates.csv", rate_report_to_csv(rep));
  if (!o.quiet)
    out << "rates " << to_string(rep.metric) << ": slope=" << fmt(rep.slope) << " +- " << fmt(rep.slope_stderr)
        << " target " << fmt(rep.target_slope) << " band " << band(rep.band) << " status=" << to_string(rep.status)
        << " " << verdict(rep.pass) << "\n";
  return rep.pass ? kOk : kTargetFailed;
}

int cmd_coverage(const Options& o, std::ostream& out) {
  const RunConfig cfg = load(o);
  const Scenario s = cfg.to_scenario();
  const CoverageReport rep = run_coverage_experiment(s, cfg.level);
  const fs::path dir(o.out);
  write_text_file(dir / "coverage_report.json", coverage_report_to_json(rep, s));
  write_text_file(dir / "coverage.csv", coverage_report_to_csv(rep));
  if (!o.quiet) {
    for (const auto& p : rep.points)
      for (std::size_t j = 0; j < p.coverage.size(); ++j) {
        const bool ok = p.coverage[j] >= rep.band.first && p.coverage[j] <= rep.band.second;
        out << "coverage n=" << p.n << " param " << j << ": " << fmt(p.coverage[j]) << " +- " << fmt(p.stderr_[j])
            << " band " << band(rep.band) << " " << verdict(ok && rep.status != ReportStatus::TooManyFailures)
            << "\n";
      }
    out << "coverage: status=" << to_string(rep.status) << " " << verdict(rep.pass) << "\n";
  }
  return rep.pass ? kOk : kTargetFailed;
}

int cmd_select(const Options& o, std::ostream& out) {
  const Scenario s = load(o).to_scenario();
  const SelectionReport rep = run_selection_experiment(s);
  const fs::path dir(o.out);
  write_text_file(dir / "select_report.json", selection_report_to_json(rep, s));
  write_text_file(dir / "select.csv", selection_report_to_csv(rep));
  if (!o.quiet) {
    for (const auto& p : rep.points)
      out << "select n=" << p.n << ": recovery " << fmt(p.recovery) << " +- " << fmt(p.stderr_) << "\n";
    out << "select: recovery at n=" << rep.points.back().n << " >= " << fmt(rep.min_recovery) << " "
        << verdict(rep.points.back().recovery >= rep.min_recovery) << "\n";
    out << "select: nondecreasing within one standard error " << verdict(rep.nondecreasing) << "\n";
  }
  return rep.pass ? kOk : kTargetFailed;
}

int cmd_diagnose(const Options& o, std::ostream& out) {
  const Scenario s = load(o).to_scenario();
  const std::size_t n = *std::max_element(s.n_grid.begin(), s.n_grid.end());
  const NormalityReport rep = normality_diagnostics(s, n);
  const fs::path dir(o.out);
  write_text_file(dir / "diagnose_report.json", normality_report_to_json(rep, s));
  write_text_file(dir / "diagnose.csv", normality_report_to_csv(rep));
  if (!o.quiet) {
    for (std::size_t j = 0; j < rep.params.size(); ++j) {
      const auto& p = rep.params[j];
      const bool mean_ok = p.mean >= s.targets.mean_band.first && p.mean <= s.targets.mean_band.second;
      const bool var_ok = p.variance >= s.targets.variance_band.first && p.variance <= s.targets.variance_band.second;
      out << "diagnose n=" << n << " param " << j << ": mean " << fmt(p.mean) << " band " << band(s.targets.mean_band)
          << " " << verdict(mean_ok) << "; variance " << fmt(p.variance) << " band " << band(s.targets.variance_band)
          << " " << verdict(var_ok) << "; ks " << fmt(p.ks_distance) << " (95% band " << fmt(rep.ks_band) << ")\n";
    }
    out << "diagnose: status=" << to_string(rep.status) << " " << verdict(rep.pass) << "\n";
  }
  return rep.pass ? kOk : kTargetFailed;
}

void error_record(std::ostream& err, const std::string& command, const std::string& kind, const std::string& msg) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["command"] = command;
  j["message"] = msg;
  err << j.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Step-function deconvolution: fitting, simulation and Monte Carlo experiments", "stepdeconv"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "TOML or JSON configuration file")->check(CLI::ExistingFile);
    if (config_required) c->required();
    sub->add_option("--out", o.out, "output directory (default: current directory)");
    sub->add_option("--seed", o.seed, "override the configured seed");
    sub->add_flag("--quiet", o.quiet, "suppress the summary on stdout");
  };
  auto* fit = app.add_subcommand("fit", "fit a step function to x,y data");
  common(fit, true);
  fit->add_option("--data", o.data, "CSV file with header x,y")->required()->check(CLI::ExistingFile);
  fit->add_option("--k", o.k, "pin the number of jumps");
  auto* simulate = app.add_subcommand("simulate", "simulate a dataset and its truth sidecar");
  common(simulate, true);
  auto* rates = app.add_subcommand("rates", "Monte Carlo convergence-rate study");
  common(rates, true);
  auto* coverage = app.add_subcommand("coverage", "Monte Carlo confidence-interval coverage");
  common(coverage, true);
  auto* select = app.add_subcommand("select", "Monte Carlo jump-count recovery of the penalized fit");
  common(select, true);
  auto* diagnose = app.add_subcommand("diagnose", "normality diagnostics of standardized estimates");
  common(diagnose, true);

  std::vector<std::string> argv_store{"stepdeconv"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    error_record(err, "", "usage_error", e.what());
    return kError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (sub == fit) return cmd_fit(o, out);
    if (sub == simulate) return cmd_simulate(o, out);
    if (sub == rates) return cmd_rates(o, out);
    if (sub == coverage) return cmd_coverage(o, out);
    if (sub == select) return cmd_select(o, out);
    if (sub == diagnose) return cmd_diagnose(o, out);
  } catch (const Error& e) {
    error_record(err, command, e.kind(), e.what());
    return kError;
  } catch (const std::exception& e) {
    error_record(err, command, "internal_error", e.what());
    return kError;
  }
  return kError;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run_cli(args, out, err);
}

}  // namespace stepdeconv::cli

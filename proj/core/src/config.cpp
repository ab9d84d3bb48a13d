#include "stepdeconv/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <tomlplusplus/toml.hpp>

#include "stepdeconv/error.hpp"

namespace stepdeconv {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t get_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("'" + key + "' must be a nonnegative integer");
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("'" + key + "' must be true or false");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> get_numbers(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(get_number(e, key));
  return out;
}

std::pair<double, double> get_band(const json& v, const std::string& key) {
  const auto b = get_numbers(v, key);
  if (b.size() != 2 || !(b[0] <= b[1])) throw ConfigError("'" + key + "' must be [lo, hi] with lo <= hi");
  return {b[0], b[1]};
}

void parse_design(const json& d, RunConfig& cfg) {
  if (!d.is_object()) throw ConfigError("'design' must be a table");
  reject_unknown(d, {"kind", "density", "knots", "values", "seed"}, "[design]");
  if (d.contains("kind")) {
    const auto kind = get_string(d["kind"], "design.kind");
    if (kind == "fixed")
      cfg.design.kind = DesignKind::Fixed;
    else if (kind == "random")
      cfg.design.kind = DesignKind::Random;
    else
      throw ConfigError("design.kind must be 'fixed' or 'random'");
  }
  const std::string density = d.contains("density") ? get_string(d["density"], "design.density") : "uniform";
  if (density == "uniform") {
    if (d.contains("knots") || d.contains("values"))
      throw ConfigError("knots/values only apply to a piecewise_linear design density");
    cfg.design.density = DesignDensity::uniform();
  } else if (density == "piecewise_linear") {
    if (!d.contains("knots") || !d.contains("values"))
      throw ConfigError("a piecewise_linear design density needs knots and values");
    try {
      cfg.design.density = DesignDensity::piecewise_linear(get_numbers(d["knots"], "design.knots"),
                                                           get_numbers(d["values"], "design.values"));
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("invalid design density: ") + e.what());
    }
  } else {
    throw ConfigError("design.density must be 'uniform' or 'piecewise_linear'");
  }
  if (d.contains("seed")) cfg.design.seed = get_count(d["seed"], "design.seed");
}

void parse_fit(const json& f, RunConfig& cfg) {
  if (!f.is_object()) throw ConfigError("'fit' must be a table");
  reject_unknown(f,
                 {"bound", "k", "k_max", "lambda", "lambda_c", "epsilon", "grid_points", "refine",
                  "refine_tol", "max_refine_iters", "multistarts", "exhaustive_budget", "rescore_top"},
                 "[fit]");
  FitConfig& c = cfg.fit;
  if (f.contains("bound")) c.bound = get_number(f["bound"], "fit.bound");
  if (f.contains("k")) c.k = get_count(f["k"], "fit.k");
  if (f.contains("k_max")) c.k_max = get_count(f["k_max"], "fit.k_max");
  if (f.contains("lambda")) c.lambda = get_number(f["lambda"], "fit.lambda");
  if (f.contains("lambda_c")) c.lambda_c = get_number(f["lambda_c"], "fit.lambda_c");
  if (f.contains("epsilon")) c.epsilon = get_number(f["epsilon"], "fit.epsilon");
  if (f.contains("grid_points")) c.grid_points = get_count(f["grid_points"], "fit.grid_points");
  if (f.contains("refine")) c.refine = get_bool(f["refine"], "fit.refine");
  if (f.contains("refine_tol")) c.refine_tol = get_number(f["refine_tol"], "fit.refine_tol");
  if (f.contains("max_refine_iters")) c.max_refine_iters = get_count(f["max_refine_iters"], "fit.max_refine_iters");
  if (f.contains("multistarts")) c.multistarts = get_count(f["multistarts"], "fit.multistarts");
  if (f.contains("exhaustive_budget")) c.exhaustive_budget = get_count(f["exhaustive_budget"], "fit.exhaustive_budget");
  if (f.contains("rescore_top")) c.rescore_top = get_count(f["rescore_top"], "fit.rescore_top");
  if (!(c.bound > 0.0)) throw ConfigError("fit.bound must be > 0");
  if (c.lambda && !(*c.lambda >= 0.0)) throw ConfigError("fit.lambda must be >= 0");
  if (c.lambda_c && !(*c.lambda_c >= 0.0)) throw ConfigError("fit.lambda_c must be >= 0");
  if (!(c.epsilon > 0.0)) throw ConfigError("fit.epsilon must be > 0");
  if (!(c.refine_tol > 0.0)) throw ConfigError("fit.refine_tol must be > 0");
}

void parse_targets(const json& t, RunConfig& cfg) {
  if (!t.is_object()) throw ConfigError("'targets' must be a table");
  reject_unknown(t,
                 {"slope", "slope_band", "coverage_band", "mean_band", "variance_band", "min_recovery",
                  "max_failure_fraction"},
                 "[targets]");
  Targets& g = cfg.targets;
  if (t.contains("slope")) g.slope = get_number(t["slope"], "targets.slope");
  if (t.contains("slope_band")) g.slope_band = get_band(t["slope_band"], "targets.slope_band");
  if (t.contains("coverage_band")) g.coverage_band = get_band(t["coverage_band"], "targets.coverage_band");
  if (t.contains("mean_band")) g.mean_band = get_band(t["mean_band"], "targets.mean_band");
  if (t.contains("variance_band")) g.variance_band = get_band(t["variance_band"], "targets.variance_band");
  if (t.contains("min_recovery")) g.min_recovery = get_number(t["min_recovery"], "targets.min_recovery");
  if (t.contains("max_failure_fraction"))
    g.max_failure_fraction = get_number(t["max_failure_fraction"], "targets.max_failure_fraction");
}

RunConfig from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a table/object");
  reject_unknown(j,
                 {"name", "kernel", "degree", "alpha", "levels", "jumps", "sigma", "n", "seed", "reps",
                  "metric", "level", "quad_tol", "inference", "workers", "design", "fit", "targets"},
                 "configuration");
  RunConfig cfg;
  if (j.contains("name")) cfg.name = get_string(j["name"], "name");
  if (!j.contains("kernel")) throw ConfigError("configuration must name a kernel");
  {
    const auto name = get_string(j["kernel"], "kernel");
    const int degree = j.contains("degree") ? static_cast<int>(get_count(j["degree"], "degree")) : -1;
    const double alpha = j.contains("alpha") ? get_number(j["alpha"], "alpha") : 0.75;
    try {
      if (degree < 0) {
        // Per-family defaults when no degree is given.
        const int d = name == "tent_power" ? 2 : 1;
        cfg.kernel = Kernel::from_name(name, d, alpha);
      } else {
        cfg.kernel = Kernel::from_name(name, degree, alpha);
      }
    } catch (const Error& e) {
      throw ConfigError(std::string("invalid kernel: ") + e.what());
    }
  }
  if (j.contains("fit")) parse_fit(j["fit"], cfg);
  if (j.contains("levels") || j.contains("jumps")) {
    if (!j.contains("levels")) throw ConfigError("'jumps' given without 'levels'");
    const auto levels = get_numbers(j["levels"], "levels");
    const auto jumps = j.contains("jumps") ? get_numbers(j["jumps"], "jumps") : std::vector<double>{};
    if (levels.size() != jumps.size() + 1)
      throw ConfigError("'levels' must have exactly one more entry than 'jumps'");
    try {
      cfg.truth = StepFunction(levels, jumps, cfg.fit.bound);
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("invalid truth: ") + e.what());
    }
  }
  if (j.contains("sigma")) {
    cfg.sigma = get_number(j["sigma"], "sigma");
    if (!(cfg.sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  }
  if (j.contains("n")) {
    const auto& n = j["n"];
    if (n.is_array()) {
      for (const auto& e : n) cfg.n.push_back(get_count(e, "n"));
    } else {
      cfg.n.push_back(get_count(n, "n"));
    }
  }
  if (j.contains("seed")) cfg.seed = get_count(j["seed"], "seed");
  if (j.contains("reps")) cfg.reps = get_count(j["reps"], "reps");
  if (j.contains("metric")) cfg.metric = metric_from_string(get_string(j["metric"], "metric"));
  if (j.contains("level")) {
    cfg.level = get_number(j["level"], "level");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  }
  if (j.contains("quad_tol")) {
    cfg.quad_tol = get_number(j["quad_tol"], "quad_tol");
    if (!(cfg.quad_tol > 0.0)) throw ConfigError("quad_tol must be > 0");
  }
  if (j.contains("inference")) cfg.inference = get_bool(j["inference"], "inference");
  if (j.contains("workers")) cfg.workers = get_count(j["workers"], "workers");
  if (j.contains("design")) parse_design(j["design"], cfg);
  if (j.contains("targets")) parse_targets(j["targets"], cfg);
  return cfg;
}

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return json(v->get());
  if (const auto* v = node.as_floating_point()) return json(v->get());
  if (const auto* v = node.as_boolean()) return json(v->get());
  if (const auto* v = node.as_string()) return json(v->get());
  throw ConfigError("unsupported TOML value (dates and times are not accepted)");
}

}  // namespace

Scenario RunConfig::to_scenario() const {
  if (!truth) throw ConfigError("the scenario needs a truth (levels and jumps)");
  if (n.empty()) throw ConfigError("the scenario needs sample sizes 'n'");
  Scenario s;
  s.name = name;
  s.kernel = kernel;
  s.truth = *truth;
  s.design = design;
  s.sigma = sigma;
  s.n_grid = n;
  s.reps = reps;
  s.seed_base = seed;
  s.fit = fit;
  s.metric = metric;
  s.level = level;
  s.quad_tol = quad_tol;
  s.targets = targets;
  s.workers = workers;
  return s;
}

RunConfig parse_config_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON configuration: ") + e.what(), 0);
  }
  return from_json(j);
}

RunConfig parse_config_toml(std::string_view text) {
  toml::table tbl;
  try {
    tbl = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ParseError(std::string("invalid TOML configuration: ") + std::string(e.description()),
                     static_cast<std::size_t>(e.source().begin.line));
  }
  return from_json(toml_to_json(tbl));
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open configuration file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  return path.extension() == ".toml" ? parse_config_toml(text) : parse_config_json(text);
}

}  // namespace stepdeconv

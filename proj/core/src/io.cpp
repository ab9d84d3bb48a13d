#include "stepdeconv/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "stepdeconv/error.hpp"

namespace stepdeconv {

namespace {

using ojson = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

double parse_field(std::string_view field, std::size_t line, const char* column) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError(std::string("cannot parse ") + column + " value '" + std::string(field) + "'", line);
  if (!std::isfinite(v)) throw ParseError(std::string("non-finite ") + column + " value", line);
  return v;
}

// NaN and infinities become null.
ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson vec(std::span<const double> v) {
  ojson out = ojson::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

ojson matrix_rows(const Eigen::MatrixXd& m) {
  ojson out = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

ojson kernel_json(const Kernel& k) {
  ojson out;
  out["family"] = k.name();
  if (k.family() == KernelFamily::Polynomial || k.family() == KernelFamily::TentPower) out["degree"] = k.degree();
  if (k.family() == KernelFamily::Abel) out["alpha"] = k.alpha();
  return out;
}

ojson truth_json(const StepFunction& f) {
  ojson out;
  out["k"] = f.num_jumps();
  out["theta"] = vec(f.theta().values());
  out["levels"] = vec(f.levels());
  out["jumps"] = vec(f.jumps());
  return out;
}

ojson scenario_json(const Scenario& s) {
  ojson out;
  out["name"] = s.name;
  out["kernel"] = kernel_json(s.kernel);
  out["truth"] = truth_json(s.truth);
  out["design"] = s.design.kind == DesignKind::Fixed ? "fixed" : "random";
  out["density"] = s.design.density.family() == DesignDensity::Family::Uniform ? "uniform" : "piecewise_linear";
  out["sigma"] = s.sigma;
  out["n"] = s.n_grid;
  out["reps"] = s.reps;
  out["seed"] = s.seed_base;
  return out;
}

ojson band_json(std::pair<double, double> b) { return ojson::array({num(b.first), num(b.second)}); }

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

Dataset parse_csv(std::string_view text) {
  Dataset d;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (!header_seen) {
      const auto comma = line.find(',');
      if (comma == std::string_view::npos || trim(line.substr(0, comma)) != "x" ||
          trim(line.substr(comma + 1)) != "y")
        throw ParseError("expected header 'x,y'", line_no);
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError("expected two comma-separated values", line_no);
    const auto rest = line.substr(comma + 1);
    if (rest.find(',') != std::string_view::npos) throw ParseError("expected two comma-separated values", line_no);
    d.x.push_back(parse_field(line.substr(0, comma), line_no, "x"));
    d.y.push_back(parse_field(rest, line_no, "y"));
    if (end == text.size()) break;
  }
  if (!header_seen) throw ParseError("empty CSV: expected header 'x,y' and data rows", line_no == 0 ? 1 : line_no);
  if (d.x.empty()) throw ParseError("CSV has a header but no data rows", line_no);

  std::vector<std::size_t> order(d.x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d.x[a] < d.x[b]; });
  Dataset sorted;
  for (std::size_t i : order) {
    sorted.x.push_back(d.x[i]);
    sorted.y.push_back(d.y[i]);
  }
  return sorted;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open data file '" + path.string() + "'", 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string format_csv(const Dataset& data) {
  data.validate();
  std::string out = "x,y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += format_double(data.x[i]);
    out += ',';
    out += format_double(data.y[i]);
    out += '\n';
  }
  return out;
}

std::string truth_to_json(const Dataset& data) {
  ojson j;
  if (data.kernel) j["kernel"] = kernel_json(*data.kernel);
  if (data.truth) {
    j["truth"] = truth_json(*data.truth);
    j["record"] = vec(data.truth->to_record());
  }
  if (data.noise_sd) j["sigma"] = *data.noise_sd;
  j["seed"] = data.seed;
  j["n"] = data.size();
  return dump(j);
}

std::string fit_to_json(const FitResult& fit, const Kernel& k) {
  ojson j;
  j["kernel"] = kernel_json(k);
  j["theta_hat"] = vec(fit.theta_hat.values());
  j["k_hat"] = fit.k_hat;
  j["objective"] = num(fit.objective);
  j["penalized_objective"] = num(fit.penalized_objective);
  j["lambda"] = num(fit.lambda);
  j["sigma2_hat"] = num(fit.sigma2_hat);
  ojson diag;
  diag["search"] = fit.diagnostics.search;
  diag["candidates"] = fit.diagnostics.candidates;
  diag["grid_optimum"] = num(fit.diagnostics.grid_optimum);
  diag["refine_iters"] = fit.diagnostics.refine_iters;
  diag["boundary_clipped"] = fit.diagnostics.boundary_clipped;
  diag["levels_clipped"] = fit.diagnostics.levels_clipped;
  diag["objective_per_k"] = vec(fit.diagnostics.objective_per_k);
  j["diagnostics"] = diag;
  return dump(j);
}

std::string inference_to_json(const InferenceReport& rep, const Kernel& k) {
  ojson j;
  j["kernel"] = kernel_json(k);
  j["n"] = rep.n;
  j["level"] = rep.level;
  j["degenerate"] = rep.degenerate;
  j["sigma2_hat"] = num(rep.sigma2_hat);
  j["V"] = matrix_rows(rep.V);
  j["V_min_eigenvalue"] = num(rep.V_min_eig);
  j["covariance"] = matrix_rows(rep.covariance);
  ojson iv = ojson::array();
  for (const auto& i : rep.intervals) iv.push_back(ojson::array({num(i.lo), num(i.hi)}));
  j["intervals"] = iv;
  return dump(j);
}

std::string rate_report_to_json(const RateReport& rep, const Scenario& s) {
  ojson j;
  j["experiment"] = "rates";
  j["scenario"] = scenario_json(s);
  j["metric"] = std::string(to_string(rep.metric));
  ojson pts = ojson::array();
  for (const auto& p : rep.points) {
    ojson q;
    q["n"] = p.n;
    q["median"] = num(p.median);
    q["q10"] = num(p.q10);
    q["q90"] = num(p.q90);
    q["failures"] = p.failures;
    pts.push_back(q);
  }
  j["points"] = pts;
  j["slope"] = num(rep.slope);
  j["slope_stderr"] = num(rep.slope_stderr);
  j["target_slope"] = num(rep.target_slope);
  j["band"] = band_json(rep.band);
  j["status"] = std::string(to_string(rep.status));
  j["pass"] = rep.pass;
  return dump(j);
}

std::string coverage_report_to_json(const CoverageReport& rep, const Scenario& s) {
  ojson j;
  j["experiment"] = "coverage";
  j["scenario"] = scenario_json(s);
  j["level"] = rep.level;
  ojson pts = ojson::array();
  for (const auto& p : rep.points) {
    ojson q;
    q["n"] = p.n;
    q["coverage"] = vec(p.coverage);
    q["stderr"] = vec(p.stderr_);
    q["used"] = p.used;
    q["failures"] = p.failures;
    pts.push_back(q);
  }
  j["points"] = pts;
  j["band"] = band_json(rep.band);
  j["status"] = std::string(to_string(rep.status));
  j["pass"] = rep.pass;
  return dump(j);
}

std::string selection_report_to_json(const SelectionReport& rep, const Scenario& s) {
  ojson j;
  j["experiment"] = "select";
  j["scenario"] = scenario_json(s);
  ojson pts = ojson::array();
  for (const auto& p : rep.points) {
    ojson q;
    q["n"] = p.n;
    q["recovery"] = num(p.recovery);
    q["stderr"] = num(p.stderr_);
    q["failures"] = p.failures;
    pts.push_back(q);
  }
  j["points"] = pts;
  j["nondecreasing"] = rep.nondecreasing;
  j["min_recovery"] = rep.min_recovery;
  j["status"] = std::string(to_string(rep.status));
  j["pass"] = rep.pass;
  return dump(j);
}

std::string normality_report_to_json(const NormalityReport& rep, const Scenario& s) {
  ojson j;
  j["experiment"] = "diagnose";
  j["scenario"] = scenario_json(s);
  j["n"] = rep.n;
  ojson ps = ojson::array();
  for (const auto& p : rep.params) {
    ojson q;
    q["mean"] = num(p.mean);
    q["variance"] = num(p.variance);
    q["ks_distance"] = num(p.ks_distance);
    ps.push_back(q);
  }
  j["params"] = ps;
  j["ks_band"] = num(rep.ks_band);
  j["failures"] = rep.failures;
  j["degenerate"] = rep.degenerate;
  j["status"] = std::string(to_string(rep.status));
  j["pass"] = rep.pass;
  return dump(j);
}

std::string rate_report_to_csv(const RateReport& rep) {
  std::string out = "n,rep,value\n";
  for (const auto& p : rep.points)
    for (std::size_t r = 0; r < p.values.size(); ++r)
      out += std::to_string(p.n) + "," + std::to_string(r) + "," + format_double(p.values[r]) + "\n";
  return out;
}

std::string coverage_report_to_csv(const CoverageReport& rep) {
  std::string out = "n,rep,param,covered\n";
  for (const auto& p : rep.points)
    for (std::size_t r = 0; r < p.covered.size(); ++r) {
      if (p.covered[r].empty()) {
        out += std::to_string(p.n) + "," + std::to_string(r) + ",,\n";
        continue;
      }
      for (std::size_t j = 0; j < p.covered[r].size(); ++j)
        out += std::to_string(p.n) + "," + std::to_string(r) + "," + std::to_string(j) + "," +
               (p.covered[r][j] ? "1" : "0") + "\n";
    }
  return out;
}

std::string selection_report_to_csv(const SelectionReport& rep) {
  std::string out = "n,rep,k_hat\n";
  for (const auto& p : rep.points)
    for (std::size_t r = 0; r < p.k_hat.size(); ++r)
      out += std::to_string(p.n) + "," + std::to_string(r) + "," +
             (p.k_hat[r] < 0 ? std::string() : std::to_string(p.k_hat[r])) + "\n";
  return out;
}

std::string normality_report_to_csv(const NormalityReport& rep) {
  std::string out = "n,rep,param,z\n";
  for (std::size_t r = 0; r < rep.z.size(); ++r) {
    if (rep.z[r].empty()) {
      out += std::to_string(rep.n) + "," + std::to_string(r) + ",,\n";
      continue;
    }
    for (std::size_t j = 0; j < rep.z[r].size(); ++j)
      out += std::to_string(rep.n) + "," + std::to_string(r) + "," + std::to_string(j) + "," +
             format_double(rep.z[r][j]) + "\n";
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace stepdeconv

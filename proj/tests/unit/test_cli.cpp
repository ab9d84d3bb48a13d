#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepdeconv/io.hpp"
#include "stepdeconv/kernels.hpp"
#include "stepdeconv/model.hpp"
#include "stepdeconv_cli/cli.hpp"

namespace fs = std::filesystem;
using stepdeconv::cli::run_cli;

namespace {
const fs::path kFixtures = STEPDECONV_FIXTURE_DIR;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stepdeconv_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& p, const std::string& text) {
  stepdeconv::write_text_file(p, text);
  return p;
}
}  // namespace

TEST_CASE("fit recovers the noiseless boxcar fixture") {
  const fs::path dir = scratch("fixture");
  const Run r = cli({"fit", "--config", (kFixtures / "boxcar_noiseless/config.toml").string(), "--data",
                     (kFixtures / "boxcar_noiseless/data.csv").string(), "--out", dir.string(), "--quiet"});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  const auto truth = read_json(kFixtures / "boxcar_noiseless/truth.json");
  const auto fit = read_json(dir / "fit.json");
  const auto theta = truth["truth"]["theta"];
  REQUIRE(fit["k_hat"] == truth["truth"]["k"]);
  REQUIRE(fit["theta_hat"].size() == theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j)
    CHECK(std::abs(fit["theta_hat"][j].get<double>() - theta[j].get<double>()) <= 1e-7);
  const auto inf = read_json(dir / "inference.json");
  CHECK(inf["V"].size() == theta.size());
  CHECK(inf["sigma2_hat"].get<double>() < 1e-20);
}

TEST_CASE("fixture data is what simulate produces") {
  const fs::path dir = scratch("regen");
  const Run r =
      cli({"simulate", "--config", (kFixtures / "boxcar_noiseless/config.toml").string(), "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "data.csv") == slurp(kFixtures / "boxcar_noiseless/data.csv"));
  CHECK(slurp(dir / "truth.json") == slurp(kFixtures / "boxcar_noiseless/truth.json"));
}

TEST_CASE("malformed data is a structured error") {
  const fs::path dir = scratch("empty");
  const fs::path cfg = kFixtures / "boxcar_noiseless/config.toml";
  const fs::path empty = write(dir / "empty.csv", "");
  const Run r = cli({"fit", "--config", cfg.string(), "--data", empty.string(), "--out", dir.string()});
  CHECK(r.code == stepdeconv::cli::kError);
  const auto e = nlohmann::json::parse(r.err);
  CHECK(e["error"] == "parse_error");
  CHECK(e["command"] == "fit");
  CHECK_FALSE(fs::exists(dir / "fit.json"));

  const fs::path bad = write(dir / "bad.csv", "x,y\n0.1,1\n0.2,zz\n");
  const Run b = cli({"fit", "--config", cfg.string(), "--data", bad.string(), "--out", dir.string()});
  CHECK(b.code == stepdeconv::cli::kError);
  CHECK(nlohmann::json::parse(b.err)["message"].get<std::string>().find("line 3") != std::string::npos);

  const Run missing = cli({"fit", "--config", cfg.string(), "--data", (dir / "nope.csv").string()});
  CHECK(missing.code == stepdeconv::cli::kError);
  const Run none = cli({});
  CHECK(none.code == stepdeconv::cli::kError);
}

TEST_CASE("pinning k = 0 gives a single level and a 1 x 1 V") {
  const fs::path dir = scratch("k0");
  const Run r = cli({"fit", "--config", (kFixtures / "boxcar_noiseless/config.toml").string(), "--data",
                     (kFixtures / "boxcar_noiseless/data.csv").string(), "--out", dir.string(), "--k", "0"});
  REQUIRE(r.code == 0);
  const auto fit = read_json(dir / "fit.json");
  CHECK(fit["k_hat"] == 0);
  CHECK(fit["theta_hat"].size() == 1);
  const auto inf = read_json(dir / "inference.json");
  REQUIRE(inf["V"].size() == 1);
  REQUIRE(inf["V"][0].size() == 1);
  CHECK(inf["V"][0][0].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(inf["intervals"].size() == 1);
}

TEST_CASE("simulate is deterministic and uses cell midpoints") {
  const fs::path dir = scratch("simulate");
  const fs::path cfg = write(dir / "sim.toml",
                             "kernel = \"gaussian\"\nlevels = [0.0, 1.0]\njumps = [0.5]\nsigma = 0.2\n"
                             "n = 1000\nseed = 7\n");
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a/data.csv") == slurp(dir / "b/data.csv"));
  CHECK(slurp(dir / "a/truth.json") == slurp(dir / "b/truth.json"));
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "8"}).code == 0);
  CHECK(slurp(dir / "a/data.csv") != slurp(dir / "c/data.csv"));

  const auto d = stepdeconv::read_csv(dir / "a/data.csv");
  REQUIRE(d.size() == 1000);
  for (std::size_t i = 0; i < 1000; ++i) CHECK(d.x[i] == (static_cast<double>(i) + 0.5) / 1000.0);

  const fs::path quiet = write(dir / "quiet.toml",
                               "kernel = \"laplace\"\nlevels = [0.0, 1.0, -1.0]\njumps = [0.3, 0.6]\n"
                               "sigma = 0.0\nn = 300\nseed = 1\n");
  REQUIRE(cli({"simulate", "--config", quiet.string(), "--out", (dir / "q").string()}).code == 0);
  const auto q = stepdeconv::read_csv(dir / "q/data.csv");
  const auto curve = stepdeconv::forward_curve(stepdeconv::Kernel::laplace(),
                                               stepdeconv::StepFunction({0.0, 1.0, -1.0}, {0.3, 0.6}), q.x);
  CHECK(q.y == curve);

  const fs::path bad = write(dir / "bad.toml", "levels = [0.0, 1.0, 2.0]\njumps = [0.6, 0.4]\nn = 10\n");
  CHECK(cli({"simulate", "--config", bad.string(), "--out", dir.string()}).code == stepdeconv::cli::kError);
}

TEST_CASE("experiment subcommands") {
  const fs::path dir = scratch("experiments");
  const fs::path one = write(dir / "one.toml",
                             "kernel = \"boxcar\"\nlevels = [0.0, 1.0]\njumps = [0.5]\nsigma = 0.1\n"
                             "n = [50, 100, 200]\nreps = 1\n");
  const Run r = cli({"rates", "--config", one.string(), "--out", dir.string()});
  CHECK(r.code == stepdeconv::cli::kError);
  CHECK(nlohmann::json::parse(r.err)["error"] == "config_error");

  const fs::path noiseless = write(dir / "clean.toml",
                                   "kernel = \"boxcar\"\nlevels = [0.0, 1.0]\njumps = [0.5]\nsigma = 0.0\n"
                                   "n = [50, 100, 200]\nreps = 50\n[fit]\ngrid_points = 30\nk_max = 2\n");
  const Run rates = cli({"rates", "--config", noiseless.string(), "--out", (dir / "r").string()});
  // Noiseless rates have no slope, which is not a pass.
  CHECK(rates.code == stepdeconv::cli::kTargetFailed);
  CHECK(rates.out.find("FAIL") != std::string::npos);
  CHECK(read_json(dir / "r/rates_report.json")["status"] == "degenerate-noiseless");
  CHECK(fs::exists(dir / "r/rates.csv"));

  const Run sel = cli({"select", "--config", noiseless.string(), "--out", (dir / "s").string()});
  CHECK(sel.code == 0);
  CHECK(sel.out.find("PASS") != std::string::npos);
  const std::string csv = slurp(dir / "s/select.csv");
  CHECK(csv.rfind("n,rep,k_hat\n", 0) == 0);

  const Run again = cli({"select", "--config", noiseless.string(), "--out", (dir / "s2").string()});
  CHECK(slurp(dir / "s/select_report.json") == slurp(dir / "s2/select_report.json"));
  CHECK(again.out == sel.out);

  const Run cov = cli({"coverage", "--config", noiseless.string(), "--out", (dir / "c").string(), "--quiet"});
  // Complete coverage sits above the nominal band.
  CHECK(cov.code == stepdeconv::cli::kTargetFailed);
  CHECK(cov.out.empty());
  for (const auto& pt : read_json(dir / "c/coverage_report.json")["points"])
    for (const auto& c : pt["coverage"]) CHECK(c.get<double>() == 1.0);
}

TEST_CASE("inference is refused for the Abel kernel") {
  const fs::path dir = scratch("abel");
  const fs::path cfg = write(dir / "abel.toml",
                             "kernel = \"abel\"\nalpha = 0.75\nlevels = [0.0, 1.0]\njumps = [0.5]\n"
                             "sigma = 0.05\nn = 200\nseed = 3\n[fit]\nk = 1\n");
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", dir.string()}).code == 0);
  const Run r = cli({"fit", "--config", cfg.string(), "--data", (dir / "data.csv").string(), "--out", dir.string()});
  CHECK(r.code == stepdeconv::cli::kError);
  const auto e = nlohmann::json::parse(r.err);
  CHECK(e["error"] == "inference_error");
  CHECK(e["message"].get<std::string>().find("abel") != std::string::npos);

  const fs::path plain = write(dir / "plain.toml",
                               "kernel = \"abel\"\nalpha = 0.75\ninference = false\n[fit]\nk = 1\n");
  const Run ok = cli({"fit", "--config", plain.string(), "--data", (dir / "data.csv").string(), "--out",
                      (dir / "fit").string()});
  CHECK(ok.code == 0);
  CHECK(fs::exists(dir / "fit/fit.json"));
  CHECK_FALSE(fs::exists(dir / "fit/inference.json"));
}

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "reluflow_cli_tests";

struct Result {
  int status = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Result run(const std::string& args, const std::string& env = "") {
  fs::create_directories(kWork);
  const fs::path log = kWork / "stdout.txt";
  const std::string cmd = env + " " + RELUFLOW_BIN + " " + args + " > " + log.string() + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  Result r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(log);
  return r;
}

std::string config(const std::string& name) { return (fs::path(CONFIG_DIR) / name).string(); }

std::string out_dir(const std::string& name) {
  const fs::path p = kWork / name;
  fs::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("risk on the perfect fit prints zero") {
  const Result r = run("risk --config " + config("perfect_fit.json") + " --out " + out_dir("pf") + " --quiet");
  CHECK(r.status == 0);
  CHECK(std::abs(std::stod(r.out)) <= 1e-15);
}

TEST_CASE("risk and grad print values") {
  Result r = run("risk --config " + config("zero_target.json") + " --out " + out_dir("zt") + " --quiet");
  CHECK(r.status == 0);
  CHECK(std::stod(r.out) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  r = run("grad --config " + config("zero_target.json") + " --out " + out_dir("zt") + " --quiet");
  CHECK(r.status == 0);
  std::istringstream in(r.out);
  double g[4];
  in >> g[0] >> g[1] >> g[2] >> g[3];
  CHECK(g[0] == doctest::Approx(2.0 / 3.0));
  CHECK(g[1] == doctest::Approx(1.0));
  CHECK(g[2] == doctest::Approx(2.0 / 3.0));
  CHECK(g[3] == doctest::Approx(1.0));
}

TEST_CASE("simulate on the c-only instance") {
  const std::string dir = out_dir("co");
  const Result r = run("simulate --config " + config("c_only.json") + " --out " + dir + " --t-max 5 --quiet");
  CHECK(r.status == 0);
  std::ifstream csv(fs::path(dir) / "trajectory.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,theta_1,theta_2,theta_3,theta_4,loss,gnorm,ndeg");
  std::size_t rows = 0;
  double worst = 0.0;
  double t = 0.0;
  while (std::getline(csv, line)) {
    std::vector<double> cols;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(std::stod(cell));
    REQUIRE(cols.size() == 8);
    t = cols[0];
    worst = std::max(worst, std::abs(cols[5] - std::exp(-4 * t)));
    ++rows;
  }
  CHECK(rows > 10);
  CHECK(t == 5.0);
  CHECK(worst <= 1e-7);
  const json ev = json::parse(slurp(fs::path(dir) / "events.json"));
  CHECK(ev["events"].empty());
  CHECK(ev["stop_reason"] == "t_max");
  const json resolved = json::parse(slurp(fs::path(dir) / "resolved_config.json"));
  CHECK(resolved["solver"]["t_max"] == 5.0);
}

TEST_CASE("artifacts are bitwise reproducible") {
  const std::string a = out_dir("rep_a");
  const std::string b = out_dir("rep_b");
  for (const std::string& d : {a, b}) {
    CHECK(run("simulate --config " + config("degeneration.json") + " --out " + d + " --quiet").status == 0);
    CHECK(run("loja --config " + config("c_only.json") + " --out " + d + " --quiet").status == 0);
  }
  for (const char* f : {"trajectory.csv", "events.json", "certificate.json", "resolved_config.json"})
    CHECK(slurp(fs::path(a) / f) == slurp(fs::path(b) / f));
  const json ev = json::parse(slurp(fs::path(a) / "events.json"));
  CHECK(ev["events"].size() == 1);
  CHECK(ev["events"][0]["neuron"] == 1);
}

TEST_CASE("worker count does not change results") {
  const std::string a = out_dir("thr_a");
  const std::string b = out_dir("thr_b");
  CHECK(run("crosscheck --config " + config("zero_target.json") + " --out " + a + " --quiet", "RELUFLOW_THREADS=1").status == 0);
  CHECK(run("crosscheck --config " + config("zero_target.json") + " --out " + b + " --quiet", "RELUFLOW_THREADS=3").status == 0);
  CHECK(slurp(fs::path(a) / "crosscheck.json") == slurp(fs::path(b) / "crosscheck.json"));
}

TEST_CASE("suites and diagnostics pass") {
  CHECK(run("gradcheck --config " + config("zero_target.json") + " --out " + out_dir("gc") + " --quiet").status == 0);
  CHECK(run("witness --config " + config("witness_degenerate.json") + " --out " + out_dir("wi") + " --quiet").status == 0);
  const std::string dir = out_dir("rates");
  CHECK(run("rates --config " + config("c_only.json") + " --out " + dir + " --quiet").status == 0);
  const json cert = json::parse(slurp(fs::path(dir) / "certificate.json"));
  for (const char* key : {"limit", "gnorm", "C_loss", "beta_hat", "C_param", "alpha_hat", "c_hat", "seed", "window"})
    CHECK(cert.contains(key));
  CHECK(cert["beta_hat"].get<double>() > 2.0);
  const std::string lj = out_dir("loja");
  CHECK(run("loja --config " + config("c_only.json") + " --out " + lj + " --seed 17 --quiet").status == 0);
  const json lc = json::parse(slurp(fs::path(lj) / "certificate.json"));
  CHECK(lc["seed"] == 17);
  CHECK(lc["alpha_hat"].get<double>() >= 0.45);
  CHECK(lc["alpha_hat"].get<double>() <= 0.55);
}

TEST_CASE("failures produce a report and a nonzero status") {
  std::string dir = out_dir("bad_density");
  Result r = run("risk --config " + config("bad_density.json") + " --out " + dir + " --quiet");
  CHECK(r.status == 1);
  json rep = json::parse(slurp(fs::path(dir) / "failure_report.json"));
  CHECK(rep["status"] == "fail");
  CHECK(rep["failures"][0]["check"] == "risk finite and nonnegative");

  dir = out_dir("not_converged");
  r = run("rates --config " + config("c_only.json") + " --out " + dir + " --t-max 0.1 --quiet");
  CHECK(r.status == 1);
  rep = json::parse(slurp(fs::path(dir) / "failure_report.json"));
  CHECK(rep["subcommand"] == "rates");

  const fs::path cfg = kWork / "mismatch.json";
  json j = json::parse(slurp(config("zero_target.json")));
  j["problem"]["d"] = 2;
  std::ofstream(cfg) << j.dump();
  dir = out_dir("mismatch");
  r = run("risk --config " + cfg.string() + " --out " + dir + " --quiet");
  CHECK(r.status == 2);
  rep = json::parse(slurp(fs::path(dir) / "failure_report.json"));
  CHECK(rep["error"]["kind"] == "config");
  CHECK(rep["error"]["field"] == "problem.target.dim");
}

TEST_CASE("resolved config reloads to itself") {
  const std::string a = out_dir("res_a");
  CHECK(run("risk --config " + config("plane_d2.json") + " --out " + a + " --quiet").status == 0);
  const std::string b = out_dir("res_b");
  CHECK(run("risk --config " + (fs::path(a) / "resolved_config.json").string() + " --out " + b + " --quiet").status == 0);
  CHECK(slurp(fs::path(a) / "resolved_config.json") == slurp(fs::path(b) / "resolved_config.json"));
  CHECK(slurp(fs::path(a) / "risk.json") == slurp(fs::path(b) / "risk.json"));
}

TEST_CASE("seed override changes a seeded initialization") {
  const std::string a = out_dir("seed_a");
  const std::string b = out_dir("seed_b");
  CHECK(run("risk --config " + config("plane_d2.json") + " --out " + a + " --seed 1 --quiet").status == 0);
  CHECK(run("risk --config " + config("plane_d2.json") + " --out " + b + " --seed 2 --quiet").status == 0);
  CHECK(slurp(fs::path(a) / "risk.json") != slurp(fs::path(b) / "risk.json"));
}

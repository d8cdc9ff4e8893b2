#include "reluflow/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "reluflow/rational.hpp"

namespace reluflow {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& known,
                std::vector<std::string>& warnings) {
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) warnings.push_back("unknown key " + (where.empty() ? key : where + "." + key) + " ignored");
}

const json& section(const json& j, const std::string& key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j[key].is_object()) throw ConfigError(key, "expected an object");
  return j[key];
}

double number(const json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return to_double(parse_rational(j.get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field, e.what());
    }
  }
  throw ConfigError(field, "expected a number");
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j[key], where + "." + key) : fallback;
}

std::size_t count_or(const json& j, const std::string& key, std::size_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer() || j[key].get<long long>() < 0)
    throw ConfigError(where + "." + key, "expected a nonnegative integer");
  return static_cast<std::size_t>(j[key].get<long long>());
}

PiecewisePoly piecewise_field(const json& j, const std::string& field) {
  try {
    return piecewise_from_json(j);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

ConfigError::ConfigError(std::string field_in, const std::string& message)
    : std::runtime_error(field_in + ": " + message), field(std::move(field_in)) {}

Problem ExperimentConfig::problem() const { return Problem(shape, target, density, evaluator); }

ParamVector ExperimentConfig::initial_theta() const {
  if (init.theta) return ParamVector(shape, *init.theta);
  std::mt19937_64 rng(init.seed);
  std::normal_distribution<double> normal;
  std::vector<double> theta(shape.param_count());
  for (double& x : theta) x = init.scale * normal(rng);
  return ParamVector(shape, std::move(theta));
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("(root)", "expected a JSON object");
  ExperimentConfig cfg;
  check_keys(j, "", {"problem", "init", "solver", "diagnostics"}, cfg.warnings);

  const json& jp = section(j, "problem");
  check_keys(jp, "problem", {"d", "H", "domain", "target", "density", "evaluator"}, cfg.warnings);
  const std::size_t d = count_or(jp, "d", 1, "problem");
  const std::size_t H = count_or(jp, "H", 1, "problem");
  if (d == 0) throw ConfigError("problem.d", "must be positive");
  if (H == 0) throw ConfigError("problem.H", "must be positive");
  double a = 0.0;
  double b = 1.0;
  if (jp.contains("domain")) {
    if (!jp["domain"].is_array() || jp["domain"].size() != 2) throw ConfigError("problem.domain", "expected [a, b]");
    a = number(jp["domain"][0], "problem.domain[0]");
    b = number(jp["domain"][1], "problem.domain[1]");
  }
  if (!(a < b)) throw ConfigError("problem.domain", "needs a < b");
  cfg.shape = NetworkShape(d, H, a, b);

  if (!jp.contains("target")) throw ConfigError("problem.target", "missing");
  if (!jp.contains("density")) throw ConfigError("problem.density", "missing");
  cfg.target = piecewise_field(jp["target"], "problem.target");
  cfg.density = piecewise_field(jp["density"], "problem.density");
  if (cfg.target.dim() != d) throw ConfigError("problem.target.dim", "target.dim does not match problem.d");
  if (cfg.density.dim() != d) throw ConfigError("problem.density.dim", "density.dim does not match problem.d");

  cfg.evaluator = d == 1 ? Evaluator::Exact1D : Evaluator::Quadrature;
  if (jp.contains("evaluator")) {
    if (!jp["evaluator"].is_string()) throw ConfigError("problem.evaluator", "expected a string");
    try {
      cfg.evaluator = parse_evaluator(jp["evaluator"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("problem.evaluator", e.what());
    }
  }
  if (cfg.evaluator == Evaluator::Exact1D && d != 1) throw ConfigError("problem.evaluator", "exact-1d needs d = 1");
  if (cfg.evaluator == Evaluator::Elimination && d > 3) throw ConfigError("problem.evaluator", "elimination needs d <= 3");

  const auto audit = audit_nonnegative(cfg.density, a, b);
  if (!audit.passed) {
    std::ostringstream msg;
    msg << "density nonnegativity audit failed: min " << audit.min_value << " at (";
    for (std::size_t k = 0; k < audit.argmin.size(); ++k) msg << (k ? ", " : "") << audit.argmin[k];
    msg << ")";
    cfg.warnings.push_back(msg.str());
  }

  const json& ji = section(j, "init");
  check_keys(ji, "init", {"theta", "seed", "scale"}, cfg.warnings);
  if (ji.contains("theta")) {
    if (!ji["theta"].is_array()) throw ConfigError("init.theta", "expected an array");
    std::vector<double> theta;
    std::size_t k = 0;
    for (const auto& x : ji["theta"]) theta.push_back(number(x, "init.theta[" + std::to_string(k++) + "]"));
    if (theta.size() != cfg.shape.param_count())
      throw ConfigError("init.theta", "expected " + std::to_string(cfg.shape.param_count()) + " entries (d*H + 2H + 1), got " +
                                          std::to_string(theta.size()));
    cfg.init.theta = std::move(theta);
  }
  cfg.init.seed = count_or(ji, "seed", 0, "init");
  cfg.init.scale = number_or(ji, "scale", cfg.init.scale, "init");

  const json& js = section(j, "solver");
  check_keys(js, "solver", {"t_max", "rel_tol", "abs_tol", "eps_deg", "g_tol", "max_steps"}, cfg.warnings);
  cfg.solver.t_max = number_or(js, "t_max", cfg.solver.t_max, "solver");
  cfg.solver.rel_tol = number_or(js, "rel_tol", cfg.solver.rel_tol, "solver");
  cfg.solver.abs_tol = number_or(js, "abs_tol", cfg.solver.abs_tol, "solver");
  cfg.solver.eps_deg = number_or(js, "eps_deg", cfg.solver.eps_deg, "solver");
  cfg.solver.g_tol = number_or(js, "g_tol", cfg.solver.g_tol, "solver");
  cfg.solver.max_steps = count_or(js, "max_steps", cfg.solver.max_steps, "solver");
  try {
    cfg.solver.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    throw ConfigError(what.substr(0, what.find(' ')), what);
  }

  const json& jd = section(j, "diagnostics");
  check_keys(jd, "diagnostics", {"probe_epsilon", "probe_n", "fit_window_fraction", "witness_n", "instances"},
             cfg.warnings);
  auto& dg = cfg.diagnostics;
  dg.probe_epsilon = number_or(jd, "probe_epsilon", dg.probe_epsilon, "diagnostics");
  dg.probe_n = count_or(jd, "probe_n", dg.probe_n, "diagnostics");
  dg.fit_window_fraction = number_or(jd, "fit_window_fraction", dg.fit_window_fraction, "diagnostics");
  dg.witness_n = count_or(jd, "witness_n", dg.witness_n, "diagnostics");
  dg.instances = count_or(jd, "instances", dg.instances, "diagnostics");
  if (!(dg.probe_epsilon > 0.0)) throw ConfigError("diagnostics.probe_epsilon", "must be positive");
  if (dg.probe_n < 100) throw ConfigError("diagnostics.probe_n", "must be at least 100");
  if (!(dg.fit_window_fraction > 0.0 && dg.fit_window_fraction < 1.0))
    throw ConfigError("diagnostics.fit_window_fraction", "must lie in (0, 1)");
  if (dg.witness_n < 2) throw ConfigError("diagnostics.witness_n", "must be at least 2");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string(), "parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                                         ": " + e.what());
  }
  return parse_config(j);
}

json resolved_json(const ExperimentConfig& c) {
  json init;
  if (c.init.theta)
    init["theta"] = *c.init.theta;
  init["seed"] = c.init.seed;
  init["scale"] = c.init.scale;
  return {
      {"problem",
       {{"d", c.shape.d},
        {"H", c.shape.H},
        {"domain", {c.shape.a, c.shape.b}},
        {"target", to_json(c.target)},
        {"density", to_json(c.density)},
        {"evaluator", std::string(to_string(c.evaluator))}}},
      {"init", init},
      {"solver",
       {{"t_max", c.solver.t_max},
        {"rel_tol", c.solver.rel_tol},
        {"abs_tol", c.solver.abs_tol},
        {"eps_deg", c.solver.eps_deg},
        {"g_tol", c.solver.g_tol},
        {"max_steps", c.solver.max_steps}}},
      {"diagnostics",
       {{"probe_epsilon", c.diagnostics.probe_epsilon},
        {"probe_n", c.diagnostics.probe_n},
        {"fit_window_fraction", c.diagnostics.fit_window_fraction},
        {"witness_n", c.diagnostics.witness_n},
        {"instances", c.diagnostics.instances}}},
  };
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (f == nullptr) throw std::runtime_error("cannot write " + path.string());
  const std::size_t D = traj.shape.param_count();
  std::fputs("t", f);
  for (std::size_t k = 1; k <= D; ++k) std::fprintf(f, ",theta_%zu", k);
  std::fputs(",loss,gnorm,ndeg\n", f);
  for (const auto& s : traj.samples) {
    std::fprintf(f, "%.17g", s.t);
    for (double x : s.theta) std::fprintf(f, ",%.17g", x);
    std::fprintf(f, ",%.17g,%.17g,%zu\n", s.loss, s.gnorm, s.degenerate.size());
  }
  std::fclose(f);
}

json events_json(const Trajectory& traj) {
  json events = json::array();
  for (const auto& e : traj.events) events.push_back({{"t", e.t}, {"neuron", e.neuron + 1}});
  std::vector<std::size_t> final_set;
  for (std::size_t i : traj.final_sample().degenerate) final_set.push_back(i + 1);
  return {{"events", events},
          {"stop_reason", to_string(traj.stop)},
          {"t_end", traj.t_end()},
          {"accepted_steps", traj.accepted_steps},
          {"rejected_steps", traj.rejected_steps},
          {"degenerate_at_end", final_set}};
}

json certificate_json(const RateCertificate& rates, const LojaEstimate* loja) {
  auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json j{{"limit", rates.limit.vec()},
         {"gnorm", rates.gnorm_at_limit},
         {"C_loss", finite_or_null(rates.C_loss)},
         {"beta_hat", finite_or_null(rates.beta_hat)},
         {"C_param", finite_or_null(rates.C_param)},
         {"window", {rates.window_lo, rates.window_hi}},
         {"alpha_hat", nullptr},
         {"c_hat", nullptr},
         {"seed", nullptr}};
  if (rates.degenerate) j["beta_hat_marker"] = "+inf";
  if (loja != nullptr) {
    j["alpha_hat"] = loja->alpha_hat;
    j["c_hat"] = finite_or_null(loja->c_hat);
    j["seed"] = loja->seed;
  }
  return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace reluflow

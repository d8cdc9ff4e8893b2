#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reluflow/config.hpp"
#include "reluflow/convergence.hpp"
#include "reluflow/gf_solver.hpp"
#include "reluflow/instances.hpp"
#include "reluflow/parallel.hpp"
#include "reluflow/risk.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reluflow;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_max;
  bool quiet = false;
};

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string name(Evaluator e) { return std::string(to_string(e)); }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

class Run {
 public:
  Run(std::string sub, const Options& opt) : sub_(std::move(sub)), opt_(opt), out_(opt.out) {}

  void note(const std::string& line) const {
    if (!opt_.quiet) std::cout << line << "\n";
  }
  void check(bool ok, const std::string& name, json detail = json::object()) {
    if (ok) return;
    detail["check"] = name;
    failures_.push_back(std::move(detail));
    if (!opt_.quiet) std::cerr << "FAIL " << name << "\n";
  }
  const fs::path& out() const { return out_; }

  int finish() const {
    if (failures_.empty()) {
      std::error_code ec;
      fs::remove(out_ / "failure_report.json", ec);
      note(sub_ + ": pass");
      return 0;
    }
    write_json(out_ / "failure_report.json",
               {{"subcommand", sub_}, {"status", "fail"}, {"config", opt_.config}, {"failures", failures_}});
    std::cerr << sub_ << ": " << failures_.size() << " check(s) failed, see "
              << (out_ / "failure_report.json").string() << "\n";
    return 1;
  }

 private:
  std::string sub_;
  Options opt_;
  fs::path out_;
  std::vector<json> failures_;
};

std::uint64_t probe_seed(const Options& opt, const ExperimentConfig& cfg) { return opt.seed.value_or(cfg.init.seed); }

int cmd_risk(Run& run, const ExperimentConfig& cfg) {
  const double L = risk(cfg.problem(), cfg.initial_theta());
  std::cout << fmt(L) << "\n";
  write_json(run.out() / "risk.json", {{"risk", L}});
  run.check(std::isfinite(L) && L >= 0.0, "risk finite and nonnegative", {{"risk", finite_or_null(L)}});
  return run.finish();
}

int cmd_grad(Run& run, const ExperimentConfig& cfg) {
  const std::vector<double> g = gradient(cfg.problem(), cfg.initial_theta());
  std::string line;
  bool finite = true;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (k) line += " ";
    line += fmt(g[k]);
    finite = finite && std::isfinite(g[k]);
  }
  std::cout << line << "\n";
  write_json(run.out() / "grad.json", {{"gradient", g}, {"norm", norm2(g)}});
  run.check(finite, "gradient finite");
  return run.finish();
}

int cmd_gradcheck(Run& run, const ExperimentConfig& cfg, const Options& opt) {
  const std::size_t n = cfg.diagnostics.instances;
  const std::uint64_t base = opt.seed.value_or(0);
  const auto start = std::chrono::steady_clock::now();
  std::vector<GradCheck> results(n);
  std::vector<double> separation(n);
  parallel_for(n, [&](std::size_t k) {
    const Instance inst = gradcheck_instance(base + k);
    results[k] = gradcheck(inst.problem, inst.theta);
    separation[k] = kink_separation(inst.problem, inst.theta);
  });
  json rows = json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    worst = std::max(worst, results[k].max_rel_error);
    rows.push_back({{"seed", base + k},
                    {"max_rel_error", results[k].max_rel_error},
                    {"worst_component", results[k].worst_component + 1},
                    {"kink_separation", finite_or_null(separation[k])}});
    run.check(results[k].max_rel_error <= 1e-5, "gradcheck relative error <= 1e-5",
              {{"seed", base + k}, {"max_rel_error", results[k].max_rel_error},
               {"component", results[k].worst_component + 1}});
  }
  json report{{"h", 1e-5}, {"instances", rows}, {"max_rel_error", worst}};
  const Problem problem = cfg.problem();
  const ParamVector theta = cfg.initial_theta();
  if (problem.shape().d == 1 && degenerate_set(theta).empty()) {
    const GradCheck own = gradcheck(problem, theta);
    report["config_instance"] = {{"max_rel_error", own.max_rel_error}, {"worst_component", own.worst_component + 1}};
    run.check(own.max_rel_error <= 1e-5, "gradcheck relative error <= 1e-5 on the configured instance",
              {{"max_rel_error", own.max_rel_error}});
  }
  write_json(run.out() / "gradcheck.json", report);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.note("max relative error " + fmt(worst) + " over " + std::to_string(n) + " instances (" + fmt(secs) + " s)");
  return run.finish();
}

void audit_checks(Run& run, const TrajectoryAudit& a, double L0) {
  for (const auto& v : a.violations) run.check(false, "trajectory invariant", {{"detail", v}});
  run.check(a.energy_residual <= 1e-6 * (1.0 + L0), "energy identity",
            {{"residual", finite_or_null(a.energy_residual)}, {"bound", 1e-6 * (1.0 + L0)}});
}

void stop_checks(Run& run, const Trajectory& traj) {
  run.check(traj.stop != StopReason::NonFinite && traj.stop != StopReason::StepUnderflow, "solver terminated normally",
            {{"stop_reason", to_string(traj.stop)}, {"t_end", traj.t_end()}});
}

int cmd_simulate(Run& run, const ExperimentConfig& cfg) {
  const Problem problem = cfg.problem();
  const Trajectory traj = solve(problem, cfg.initial_theta(), cfg.solver);
  const TrajectoryAudit a = audit(problem, traj);
  write_trajectory_csv(run.out() / "trajectory.csv", traj);
  json ev = events_json(traj);
  ev["energy_residual"] = finite_or_null(a.energy_residual);
  write_json(run.out() / "events.json", ev);
  stop_checks(run, traj);
  audit_checks(run, a, traj.samples.front().loss);
  run.note("t_end " + fmt(traj.t_end()) + ", loss " + fmt(traj.final_sample().loss) + ", " +
           std::to_string(traj.events.size()) + " event(s), stop " + std::string(to_string(traj.stop)));
  return run.finish();
}

struct RatesOutcome {
  Trajectory traj;
  LimitDetection limit;
  RateCertificate cert;
  DenseRecheck dense;
};

RatesOutcome run_rates(Run& run, const ExperimentConfig& cfg) {
  const Problem problem = cfg.problem();
  RatesOutcome o{solve(problem, cfg.initial_theta(), cfg.solver), {}, {}, {}};
  stop_checks(run, o.traj);
  o.limit = detect_limit(problem, o.traj);
  o.cert = fit_rates(problem, o.traj, o.limit.limit, cfg.diagnostics.fit_window_fraction);
  o.dense = recheck_dense(problem, o.traj, o.cert);
  run.check(o.limit.converged, "trajectory converged", {{"reason", o.limit.reason}, {"gnorm", o.limit.gnorm}});
  return o;
}

json rates_extras(const RatesOutcome& o) {
  return {{"converged", o.limit.converged},
          {"limit_reason", o.limit.reason},
          {"loss_at_limit", o.cert.loss_at_limit},
          {"window_samples", o.cert.window_samples},
          {"degenerate_certificate", o.cert.degenerate},
          {"dense_recheck",
           {{"C_loss", finite_or_null(o.dense.C_loss)},
            {"C_param", finite_or_null(o.dense.C_param)},
            {"loss_inflation", finite_or_null(o.dense.loss_inflation)},
            {"param_inflation", finite_or_null(o.dense.param_inflation)},
            {"points", o.dense.points}}}};
}

int cmd_rates(Run& run, const ExperimentConfig& cfg) {
  const Problem problem = cfg.problem();
  const RatesOutcome o = run_rates(run, cfg);
  json cert = certificate_json(o.cert, nullptr);
  cert.update(rates_extras(o));
  write_json(run.out() / "certificate.json", cert);
  run.check(o.cert.passed, "rate certificate passes",
            {{"C_loss", finite_or_null(o.cert.C_loss)}, {"beta_hat", finite_or_null(o.cert.beta_hat)}});
  run.check(o.dense.loss_inflation <= 0.05, "dense recheck of C_loss within 5%",
            {{"inflation", finite_or_null(o.dense.loss_inflation)}});
  const std::vector<double> tail = tail_lengths(problem, o.traj);
  bool monotone = true;
  for (std::size_t k = 1; k < tail.size(); ++k) monotone = monotone && tail[k] <= tail[k - 1];
  run.check(monotone, "tail length non-increasing");
  run.note("C_loss " + fmt(o.cert.C_loss) + ", beta_hat " + fmt(o.cert.beta_hat) + ", C_param " + fmt(o.cert.C_param));
  return run.finish();
}

int cmd_loja(Run& run, const ExperimentConfig& cfg, const Options& opt) {
  const Problem problem = cfg.problem();
  const RatesOutcome o = run_rates(run, cfg);
  const double eps = cfg.diagnostics.probe_epsilon;
  const std::size_t n = cfg.diagnostics.probe_n;
  const std::uint64_t seed = probe_seed(opt, cfg);
  const LojaEstimate est = loja_probe(problem, o.limit.limit, eps, n, seed);
  json cert = certificate_json(o.cert, &est);
  cert.update(rates_extras(o));
  cert["loja"] = {{"epsilon", eps},
                  {"n_samples", est.n_samples},
                  {"kept", est.kept},
                  {"gradient_bounded_below", est.gradient_bounded_below},
                  {"violation", est.violation},
                  {"worst_pair",
                   {{"theta", est.worst_theta}, {"dloss", est.worst_dloss}, {"gnorm", est.worst_gnorm}}}};
  write_json(run.out() / "certificate.json", cert);
  run.check(!est.violation && std::isfinite(est.c_hat), "c_hat finite", {{"c_hat", finite_or_null(est.c_hat)}});
  run.check(est.alpha_hat > 0.0 && est.alpha_hat <= 1.0, "alpha_hat in (0, 1]", {{"alpha_hat", est.alpha_hat}});
  const double L_lim = risk(problem, o.limit.limit);
  std::size_t broken = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ParamVector theta(problem.shape(), probe_point(o.limit.limit, eps, seed, i));
    const RiskAndGradient rg = evaluate(problem, theta);
    const double dL = std::abs(rg.risk - L_lim);
    if (dL <= 1e-15) continue;
    if (std::pow(dL, est.alpha_hat) > est.c_hat * norm2(rg.gradient) * (1.0 + 1e-12)) ++broken;
  }
  run.check(broken == 0, "inequality holds on every kept sample", {{"broken", broken}});
  run.note("alpha_hat " + fmt(est.alpha_hat) + ", c_hat " + fmt(est.c_hat) + ", kept " + std::to_string(est.kept) +
           "/" + std::to_string(n));
  return run.finish();
}

int cmd_witness(Run& run, const ExperimentConfig& cfg) {
  const Problem problem = cfg.problem();
  const ParamVector theta = cfg.initial_theta();
  const WitnessResult w = subdiff_witness(problem, theta, cfg.diagnostics.witness_n);
  std::vector<std::size_t> deg;
  for (std::size_t i : degenerate_set(theta)) deg.push_back(i + 1);
  write_json(run.out() / "witness.json", {{"residuals", w.residuals},
                                          {"final_residual", w.final_residual},
                                          {"degenerate", deg},
                                          {"perturbed_nondegenerate", w.perturbed_nondegenerate}});
  bool monotone = true;
  for (std::size_t n = 4; n < w.residuals.size(); ++n) monotone = monotone && w.residuals[n] <= w.residuals[n - 1];
  run.check(monotone, "residuals non-increasing for n >= 4");
  run.check(w.final_residual <= 1e-6, "final residual <= 1e-6", {{"final_residual", w.final_residual}});
  run.check(w.perturbed_nondegenerate, "perturbed parameters are non-degenerate");
  run.note("final residual " + fmt(w.final_residual) + " (" + std::to_string(deg.size()) + " degenerate neuron(s))");
  return run.finish();
}

struct Agreement {
  double risk_a = 0.0;
  double risk_b = 0.0;
  double gradient_gap = 0.0;
};

Agreement compare(const Problem& problem, const ParamVector& theta, Evaluator a, Evaluator b) {
  const RiskAndGradient ra = evaluate_with(problem, theta, a);
  const RiskAndGradient rb = evaluate_with(problem, theta, b);
  double gap = 0.0;
  for (std::size_t k = 0; k < ra.gradient.size(); ++k) gap = std::max(gap, std::abs(ra.gradient[k] - rb.gradient[k]));
  return {ra.risk, rb.risk, gap};
}

int cmd_crosscheck(Run& run, const ExperimentConfig& cfg, const Options& opt) {
  struct Suite {
    std::size_t d;
    Evaluator evaluator;
    std::size_t count;
    double tol;
  };
  const std::size_t n = cfg.diagnostics.instances;
  const std::vector<Suite> suites{{1, Evaluator::Exact1D, n / 2, 1e-7},
                                  {2, Evaluator::Elimination, n / 4, 1e-6},
                                  {3, Evaluator::Elimination, n / 4, 1e-6}};
  const std::uint64_t base = opt.seed.value_or(0);
  const auto start = std::chrono::steady_clock::now();
  json report = json::object();
  for (const Suite& s : suites) {
    std::vector<Agreement> res(s.count);
    parallel_for(s.count, [&](std::size_t k) {
      const Instance inst = crosscheck_instance(base + k, s.d, s.evaluator);
      res[k] = compare(inst.problem, inst.theta, s.evaluator, Evaluator::Quadrature);
    });
    json rows = json::array();
    double worst = 0.0;
    for (std::size_t k = 0; k < s.count; ++k) {
      const double scaled = std::abs(res[k].risk_a - res[k].risk_b) / (1.0 + std::abs(res[k].risk_b));
      worst = std::max(worst, scaled);
      rows.push_back({{"seed", base + k}, {"risk", res[k].risk_a}, {"quadrature", res[k].risk_b},
                      {"scaled_gap", scaled}, {"gradient_gap", res[k].gradient_gap}});
      run.check(scaled <= s.tol, "evaluator agreement d=" + std::to_string(s.d),
                {{"seed", base + k}, {"scaled_gap", scaled}, {"tolerance", s.tol}});
    }
    report["d" + std::to_string(s.d)] = {{"evaluator", name(s.evaluator)}, {"tolerance", s.tol},
                                         {"worst_scaled_gap", worst}, {"instances", rows}};
    run.note("d=" + std::to_string(s.d) + " " + name(s.evaluator) + " vs quadrature: worst " + fmt(worst));
  }
  const Problem problem = cfg.problem();
  if (problem.evaluator() != Evaluator::Quadrature) {
    const Agreement own = compare(problem, cfg.initial_theta(), problem.evaluator(), Evaluator::Quadrature);
    const double scaled = std::abs(own.risk_a - own.risk_b) / (1.0 + std::abs(own.risk_b));
    const double tol = problem.evaluator() == Evaluator::Exact1D ? 1e-7 : 1e-6;
    report["config_instance"] = {{"risk", own.risk_a}, {"quadrature", own.risk_b}, {"scaled_gap", scaled}};
    run.check(scaled <= tol, "evaluator agreement on the configured instance", {{"scaled_gap", scaled}});
  }
  write_json(run.out() / "crosscheck.json", report);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.note("crosscheck finished in " + fmt(secs) + " s");
  return run.finish();
}

void write_error(const Options& opt, const std::string& sub, const json& error) {
  try {
    fs::create_directories(opt.out);
    write_json(fs::path(opt.out) / "failure_report.json",
               {{"subcommand", sub}, {"status", "error"}, {"config", opt.config}, {"error", error}});
  } catch (const std::exception&) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-flow laboratory for one-hidden-layer ReLU networks"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> subs{
      {"risk", "print the risk at the initial parameters"},
      {"grad", "print the generalized gradient at the initial parameters"},
      {"gradcheck", "finite-difference suite on seeded d = 1 instances"},
      {"simulate", "integrate the flow, write trajectory.csv and events.json"},
      {"rates", "integrate, detect the limit and write a rate certificate"},
      {"loja", "probe the Lojasiewicz inequality around the limit"},
      {"witness", "subdifferential witness sequence at the initial parameters"},
      {"crosscheck", "evaluator agreement suite"}};
  for (const auto& [name, help] : subs) {
    CLI::App* sc = app.add_subcommand(name, help);
    sc->add_option("--config", opt.config, "experiment JSON")->required()->check(CLI::ExistingFile);
    sc->add_option("--out", opt.out, "output directory")->required();
    sc->add_option("--seed", opt.seed, "seed override");
    sc->add_option("--t-max", opt.t_max, "horizon override");
    sc->add_flag("--quiet", opt.quiet, "suppress progress output");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  try {
    cfg = load_config(opt.config);
    if (opt.t_max) cfg.solver.t_max = *opt.t_max;
    if (opt.seed) cfg.init.seed = *opt.seed;
    cfg.solver.validate();
    fs::create_directories(opt.out);
    write_json(fs::path(opt.out) / "resolved_config.json", resolved_json(cfg));
  } catch (const ConfigError& e) {
    std::cerr << "config error in " << e.field << ": " << e.what() << "\n";
    write_error(opt, sub, {{"kind", "config"}, {"field", e.field}, {"message", e.what()}});
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    write_error(opt, sub, {{"kind", "config"}, {"message", e.what()}});
    return 2;
  }
  if (!opt.quiet)
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";

  Run run(sub, opt);
  try {
    if (sub == "risk") return cmd_risk(run, cfg);
    if (sub == "grad") return cmd_grad(run, cfg);
    if (sub == "gradcheck") return cmd_gradcheck(run, cfg, opt);
    if (sub == "simulate") return cmd_simulate(run, cfg);
    if (sub == "rates") return cmd_rates(run, cfg);
    if (sub == "loja") return cmd_loja(run, cfg, opt);
    if (sub == "witness") return cmd_witness(run, cfg);
    return cmd_crosscheck(run, cfg, opt);
  } catch (const std::exception& e) {
    std::cerr << sub << ": " << e.what() << "\n";
    write_error(opt, sub, {{"kind", "runtime"}, {"message", e.what()}});
    return 3;
  }
}

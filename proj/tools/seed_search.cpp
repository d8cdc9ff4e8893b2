#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "reluflow/config.hpp"
#include "reluflow/gf_solver.hpp"
#include "reluflow/instances.hpp"

using namespace reluflow;

// Finds a seed whose candidate run freezes a neuron in finite time and
// optionally writes a ready-to-run config for it.
int main(int argc, char** argv) {
  CLI::App app{"Search for a finite-time degeneration run"};
  std::uint64_t start = 0;
  std::size_t tries = 100;
  double t_max = 10.0;
  std::string out;
  app.add_option("--start", start, "first seed");
  app.add_option("--tries", tries, "number of seeds to try");
  app.add_option("--t-max", t_max, "horizon");
  app.add_option("--out", out, "write the engineered config here");
  CLI11_PARSE(app, argc, argv);

  const auto seed = find_degenerating_seed(start, tries, t_max);
  if (!seed) {
    std::cerr << "no degenerating seed in [" << start << ", " << start + tries << ")\n";
    return 1;
  }
  const Instance inst = degeneration_candidate(*seed);
  SolverConfig cfg;
  cfg.t_max = t_max;
  const Trajectory traj = solve(inst.problem, inst.theta, cfg);
  std::printf("seed %llu: neuron %zu frozen at t = %.17g\n", static_cast<unsigned long long>(*seed),
              traj.events.front().neuron + 1, traj.events.front().t);

  if (!out.empty()) {
    ExperimentConfig c;
    c.shape = inst.problem.shape();
    c.target = inst.problem.target();
    c.density = inst.problem.density();
    c.evaluator = inst.problem.evaluator();
    c.init.theta = inst.theta.vec();
    c.init.seed = *seed;
    c.solver = cfg;
    write_json(out, resolved_json(c));
  }
  return 0;
}

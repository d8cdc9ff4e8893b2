#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "reluflow/network.hpp"
#include "reluflow/problem.hpp"
#include "reluflow/risk.hpp"

namespace reluflow {

struct SolverConfig {
  double t_max = 10.0;
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double eps_deg = 1e-12;  // threshold on |b_i| + sum_j |w_ij|
  double g_tol = 1e-10;    // stop once ||G|| <= g_tol
  std::size_t max_steps = 200000;

  void validate() const;  // throws std::invalid_argument naming the field
};

struct Sample {
  double t = 0.0;
  std::vector<double> theta;
  double loss = 0.0;
  double gnorm = 0.0;
  std::vector<std::size_t> degenerate;  // 0-based, sorted
};

struct DegenerationEvent {
  double t = 0.0;
  std::size_t neuron = 0;  // 0-based
};

/// Continuous extension of one accepted step on [t0, t1], t1 <= t0 + h
/// (shorter when the step was cut at an event).
struct DenseSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  double h = 0.0;
  std::array<std::vector<double>, 5> coeffs;
  std::vector<std::size_t> frozen;

  [[nodiscard]] std::vector<double> at(double t) const;
};

enum class StopReason { TMax, GradientTolerance, Stationary, MaxSteps, StepUnderflow, NonFinite };
std::string to_string(StopReason r);

struct Trajectory {
  NetworkShape shape;
  SolverConfig config;
  std::vector<Sample> samples;
  std::vector<DegenerationEvent> events;
  std::vector<DenseSegment> segments;
  StopReason stop = StopReason::TMax;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  [[nodiscard]] double t_end() const { return samples.back().t; }
  [[nodiscard]] const Sample& final_sample() const { return samples.back(); }
  // Dense state for t in [0, t_end]; outside the stored segments the
  // nearest sample is returned.
  [[nodiscard]] ParamVector state_at(double t) const;
  [[nodiscard]] std::vector<std::size_t> frozen_at(double t) const;
};

/// G(theta) with the w and b components of every neuron in `frozen` set to 0.
std::vector<double> frozen_field(const Problem& problem, const ParamVector& theta,
                                 std::span<const std::size_t> frozen);
RiskAndGradient frozen_evaluate(const Problem& problem, const ParamVector& theta,
                                std::span<const std::size_t> frozen);

/// Integrates theta' = -frozen_field(theta, D) by Dormand–Prince 5(4) with
/// dense output, freezing a neuron (and restarting) whenever its input mass
/// falls to eps_deg.
Trajectory solve(const Problem& problem, const ParamVector& theta0, const SolverConfig& config);

/// |L(theta_0) - L(theta_end) - int ||G||^2 dt| with the integral taken by
/// Gauss–Legendre quadrature over every dense segment.
double energy_residual(const Problem& problem, const Trajectory& traj);

/// Stored-sample invariants of a trajectory. `violations` is empty when all
/// hold; risk monotonicity uses the slack 1e-10 (1 + L(theta_0)).
struct TrajectoryAudit {
  bool time_increasing = true;
  bool loss_nonincreasing = true;
  bool degeneracy_monotone = true;
  bool events_frozen = true;
  bool finite = true;
  double energy_residual = 0.0;
  std::vector<std::string> violations;
};
TrajectoryAudit audit(const Problem& problem, const Trajectory& traj);

}  // namespace reluflow

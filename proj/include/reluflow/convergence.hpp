#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "reluflow/gf_solver.hpp"
#include "reluflow/network.hpp"
#include "reluflow/problem.hpp"

namespace reluflow {

struct LimitDetection {
  bool converged = false;
  ParamVector limit;  // final state, reported either way
  double gnorm = 0.0;
  double diameter = 0.0;  // max ||theta_t - theta_end|| over t >= t_end / 2
  std::string reason;     // empty when converged
};

LimitDetection detect_limit(const Problem& problem, const Trajectory& traj);

struct RateCertificate {
  ParamVector limit;
  double gnorm_at_limit = 0.0;
  double loss_at_limit = 0.0;
  double C_loss = 0.0;
  double beta_hat = 0.0;  // +inf when the fit window is empty
  double C_param = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::size_t window_samples = 0;
  bool degenerate = false;
  bool passed = false;
};

/// The exponent is fitted over t in [window_fraction * t_end, t_end].
RateCertificate fit_rates(const Problem& problem, const Trajectory& traj, const ParamVector& limit,
                          double window_fraction = 0.1);

/// Constants recomputed on a grid `refine` times denser than the samples,
/// using the dense output between consecutive samples.
struct DenseRecheck {
  double C_loss = 0.0;
  double C_param = 0.0;
  double loss_inflation = 0.0;   // C_loss_dense / C_loss - 1 (0 when both vanish)
  double param_inflation = 0.0;
  std::size_t points = 0;
};
DenseRecheck recheck_dense(const Problem& problem, const Trajectory& traj, const RateCertificate& cert,
                           std::size_t refine = 10);

struct LojaEstimate {
  double alpha_hat = 1.0;
  double c_hat = 0.0;
  double epsilon = 0.0;
  std::size_t n_samples = 0;
  std::size_t kept = 0;
  std::uint64_t seed = 0;
  bool gradient_bounded_below = false;
  bool violation = false;  // a kept sample had G = 0
  std::vector<double> worst_theta;
  double worst_dloss = 0.0;
  double worst_gnorm = 0.0;
};

/// Uniform samples in the ball of radius epsilon around `limit`.
LojaEstimate loja_probe(const Problem& problem, const ParamVector& limit, double epsilon, std::size_t n,
                        std::uint64_t seed);

/// The theta of probe sample `index`; a pure function of (seed, index).
std::vector<double> probe_point(const ParamVector& center, double epsilon, std::uint64_t seed, std::size_t index);

/// int_t^{t_end} ||G(theta_s)|| ds at every sample time.
std::vector<double> tail_lengths(const Problem& problem, const Trajectory& traj);

}  // namespace reluflow

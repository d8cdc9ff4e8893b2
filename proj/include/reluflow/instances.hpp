#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "reluflow/gf_solver.hpp"
#include "reluflow/network.hpp"
#include "reluflow/problem.hpp"

namespace reluflow {

// Seeded problem generators shared by the CLI suites, the tests and the
// seed-search tool. Every generator is a pure function of its arguments.

struct Instance {
  Problem problem;
  ParamVector theta;
};

/// d = 1, H <= 4, target with <= 3 pieces, density with <= 2 pieces, no
/// degenerate neuron, kinks at least 2e-3 away from breakpoints, domain
/// endpoints and each other.
Instance gradcheck_instance(std::uint64_t seed);

/// Like gradcheck_instance, with at least one neuron made degenerate.
Instance degenerate_instance(std::uint64_t seed);

/// Random instance for evaluator agreement, d in {1, 2, 3}.
Instance crosscheck_instance(std::uint64_t seed, std::size_t d, Evaluator evaluator);

/// d = 1, H = 3, random data and initialization (energy and tolerance runs).
Instance flow_instance(std::uint64_t seed);

/// d = 1 on [0, 1], every kink interior and at least 0.05 from breakpoints
/// and other kinks, 1 <= |w| <= 2, 0.25 <= |v| <= 1.
Instance smoothing_instance(std::uint64_t seed);

/// Target realized by a teacher network; the student starts near it.
Instance teacher_instance(std::uint64_t seed);

/// f = 0, p = 1 on [0, 1], theta0 = (0, 0, 0, 1): only c moves, c(t) = e^{-2t}.
Instance c_only_instance();

/// f(x) = x, p = 1 on [0, 1], theta = (1, 0, 1, 0): a zero-risk critical point.
Instance perfect_fit_instance();

/// Candidate for finite-time degeneration on [-1, 1]: H = 1, w = 0,
/// small b > 0, f = 1, p = 1, residual pushing b down.
Instance degeneration_candidate(std::uint64_t seed);

/// First seed >= start (within `tries`) whose candidate run freezes its
/// neuron before t_max.
std::optional<std::uint64_t> find_degenerating_seed(std::uint64_t start, std::size_t tries, double t_max = 10.0);

/// Distance from every kink in (a, b) to the nearest breakpoint of f or p,
/// domain endpoint or other kink (d = 1). +inf without interior kinks.
double kink_separation(const Problem& problem, const ParamVector& theta);

}  // namespace reluflow

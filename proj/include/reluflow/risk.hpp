#pragma once

#include <vector>

#include "reluflow/network.hpp"
#include "reluflow/problem.hpp"
#include "reluflow/quadrature.hpp"
#include "reluflow/rational.hpp"

namespace reluflow {

/// Risk L(theta) and the generalized gradient G(theta) from one pass.
struct RiskAndGradient {
  double risk = 0.0;
  std::vector<double> gradient;
};

/// Dispatches on problem.evaluator().
RiskAndGradient evaluate(const Problem& problem, const ParamVector& theta);
RiskAndGradient evaluate_with(const Problem& problem, const ParamVector& theta, Evaluator evaluator);
double risk(const Problem& problem, const ParamVector& theta);
std::vector<double> gradient(const Problem& problem, const ParamVector& theta);

// Exact closed form for d = 1. The domain is cut at the kinks -b_i / w_i and
// at the breakpoints of f and p; on each cell the integrands are single
// polynomials integrated through their antiderivatives.
RiskAndGradient evaluate_exact_1d(const Problem& problem, const ParamVector& theta);

/// Same partition in exact rational arithmetic; theta is read exactly.
struct ExactRiskAndGradient {
  Rational risk;
  std::vector<Rational> gradient;
};
ExactRiskAndGradient evaluate_exact_1d_rational(const Problem& problem, const ParamVector& theta);

/// Independent oracle: pointwise evaluation of (N - f)^2 p and the gradient
/// integrands under sectioned Gauss–Legendre quadrature. Order 30 for
/// d <= 2, order 10 for d >= 3 unless overridden.
RiskAndGradient evaluate_quadrature(const Problem& problem, const ParamVector& theta, int gauss_order = 0);

/// C^1 activations R_r converging to max(x, 0) with R_r' -> 1_(0,inf)
/// pointwise, including R_r'(0) -> 0.
///
/// QuadraticRamp:   0 on x <= 0, r x^2 / 2 on [0, 1/r], x - 1/(2r) beyond.
/// ShiftedSoftplus: log(1 + exp(r (x - r^-gamma))) / r.
struct SmoothedFamily {
  enum class Kind { QuadraticRamp, ShiftedSoftplus };
  Kind kind = Kind::QuadraticRamp;
  double gamma = 0.5;  // ShiftedSoftplus only

  [[nodiscard]] double value(double r, double x) const;
  [[nodiscard]] double derivative(double r, double x) const;
  // Points where the activation changes regime, relative to the ReLU kink.
  [[nodiscard]] std::vector<double> transition_offsets(double r) const;
};

/// Gradient of the smoothed risk L_r by adaptive Gauss–Kronrod quadrature
/// (absolute tolerance `tolerance`). Throws QuadratureError with the worst
/// cell when the tolerance cannot be met.
std::vector<double> smoothed_gradient(const Problem& problem, const ParamVector& theta, double r,
                                      const SmoothedFamily& family = {}, double tolerance = 1e-10);

/// Limiting-subdifferential witness: theta_n equals theta except that b_i is
/// lowered by 1/n on every degenerate neuron.
struct WitnessResult {
  std::vector<double> residuals;  // ||G(theta_n) - G(theta)||, n = 1..N
  double final_residual = 0.0;
  bool perturbed_nondegenerate = true;  // D^{theta_n} is empty for every n
};
WitnessResult subdiff_witness(const Problem& problem, const ParamVector& theta, std::size_t N);

/// Central differences of the exact rational risk (d = 1) against G.
/// Relative error per component is |fd - G| / max(|G|, 1e-6).
struct GradCheck {
  std::vector<double> analytic;
  std::vector<double> finite_difference;
  double max_rel_error = 0.0;
  std::size_t worst_component = 0;
};
GradCheck gradcheck(const Problem& problem, const ParamVector& theta, double h = 1e-5);

double norm2(std::span<const double> v);

}  // namespace reluflow

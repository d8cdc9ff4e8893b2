#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "reluflow/network.hpp"
#include "reluflow/piecewise.hpp"
#include "reluflow/problem.hpp"
#include "reluflow/rational.hpp"
#include "reluflow/risk.hpp"

namespace reluflow {

/// Indicator 1_A(affine(x)) with A = {0}, [0, inf) or (0, inf).
struct Indicator {
  enum class Kind { Eq0, Ge0, Gt0 };
  Kind kind = Kind::Ge0;
  AffineConstraint affine;

  [[nodiscard]] bool holds(std::span<const double> x) const;
  [[nodiscard]] bool holds(std::span<const Rational> x) const;
  friend bool operator==(const Indicator&, const Indicator&) = default;
};

/// rcoef * q(x) * prod_k 1_{A_k}(affine_k(x)).
struct AmnTerm {
  Rational rcoef{1};
  Poly q;
  std::vector<Indicator> factors;
};

/// Sum of AmnTerms over the box [a, b]^dim.
struct AmnTermSet {
  std::size_t dim = 0;
  Rational a{0};
  Rational b{1};
  std::vector<AmnTerm> terms;

  [[nodiscard]] double evaluate(std::span<const double> x) const;
  [[nodiscard]] Rational evaluate(std::span<const Rational> x) const;
  AmnTermSet& operator+=(const AmnTermSet& rhs);
};

/// x -> int_a^b ts(x with x_k inserted) dx_k, as a term set in dim - 1
/// variables. Correct almost everywhere; values on tie sets of the
/// candidate bounds may differ.
AmnTermSet eliminate_var(const AmnTermSet& ts, std::size_t k);
inline AmnTermSet eliminate_last(const AmnTermSet& ts) { return eliminate_var(ts, ts.dim - 1); }

/// Integral over the whole box. `order` lists original variable indices in
/// elimination order; empty means last to first.
Rational integrate_all(const AmnTermSet& ts, std::span<const std::size_t> order = {});

/// (N - f)^2 p at fixed theta, parameters read exactly.
AmnTermSet risk_integrand(const Problem& problem, const ParamVector& theta);

Rational risk_by_elimination_exact(const Problem& problem, const ParamVector& theta);
double risk_by_elimination(const Problem& problem, const ParamVector& theta);

/// Risk and generalized gradient, all integrals eliminated together.
RiskAndGradient evaluate_by_elimination(const Problem& problem, const ParamVector& theta);
ExactRiskAndGradient evaluate_by_elimination_exact(const Problem& problem, const ParamVector& theta);

}  // namespace reluflow

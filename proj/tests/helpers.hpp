#pragma once

#include <vector>

#include "reluflow/piecewise.hpp"
#include "reluflow/problem.hpp"

namespace testing {

using namespace reluflow;

inline Poly monomial(std::size_t nvars, std::vector<int> exps, const Rational& coef) {
  Poly p(nvars);
  p.add_term(Monomial(exps), coef);
  return p;
}

inline PiecewisePoly whole(const Poly& p) { return PiecewisePoly(p.nvars(), {PolyPiece{{}, p}}); }

inline PiecewisePoly constant_pp(std::size_t d, const Rational& c) { return PiecewisePoly::constant(d, c); }

// f = x_1 (d = 1) on [0, 1].
inline PiecewisePoly identity_1d() { return whole(monomial(1, {1}, 1)); }

inline Problem unit_problem(std::size_t d, std::size_t H, PiecewisePoly f, Evaluator e = Evaluator::Exact1D) {
  return Problem(NetworkShape(d, H, 0.0, 1.0), std::move(f), constant_pp(d, 1), e);
}

}  // namespace testing

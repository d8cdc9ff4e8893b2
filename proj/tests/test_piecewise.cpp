#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "reluflow/piecewise.hpp"
#include "reluflow/rational.hpp"

using namespace reluflow;
using namespace testing;

namespace {

AffineConstraint ge(const Rational& t) { return AffineConstraint{{Rational(1)}, Rational(-t)}; }

double at(const PiecewisePoly& g, double x) { return eval_pp(g, {&x, 1}); }

}  // namespace

TEST_CASE("rational parsing") {
  CHECK(parse_rational("3/4") == Rational(3, 4));
  CHECK(parse_rational("-1/3") == Rational(-1, 3));
  CHECK(parse_rational("0.25") == Rational(1, 4));
  CHECK(parse_rational("-1e-3") == Rational(-1, 1000));
  CHECK(parse_rational("7") == Rational(7));
  CHECK_THROWS(parse_rational("1/0"));
  CHECK_THROWS(parse_rational("abc"));
  CHECK(to_string(Rational(6, 8)) == "3/4");
  CHECK(from_double(0.1).get_d() == 0.1);
}

TEST_CASE("poly invariants") {
  Poly p(2);
  p.add_term(Monomial(std::vector<int>{1, 0}), 2);
  p.add_term(Monomial(std::vector<int>{1, 0}), -2);
  CHECK(p.is_zero());
  p.add_term(Monomial(std::vector<int>{1, 1}), Rational(1, 2));
  CHECK(p.term_count() == 1);
  CHECK_THROWS((void)Monomial(std::vector<int>{33}).times(Monomial(std::vector<int>{1})));
  const Poly x = Poly::variable(1, 0);
  CHECK((x * x).antiderivative(0) == monomial(1, {3}, Rational(1, 3)));
}

TEST_CASE("eval_pp sum semantics") {
  const Poly x2 = monomial(1, {2}, 1);
  CHECK(at(whole(x2), 0.5) == 0.25);
  const PiecewisePoly g(1, {PolyPiece{{ge(Rational(1, 2))}, x2}});
  CHECK(at(g, 0.25) == 0.0);
  CHECK(at(g, 0.75) == 0.5625);
  CHECK(at(g, 0.5) == 0.25);
  const PiecewisePoly two(1, {PolyPiece{{}, Poly::constant(1, 1)}, PolyPiece{{ge(Rational(1, 2))}, Poly::constant(1, 1)}});
  CHECK(at(two, 0.75) == 2.0);
}

TEST_CASE("trivial constraints") {
  const PiecewisePoly yes(1, {PolyPiece{{AffineConstraint{{Rational(0)}, Rational(0)}}, Poly::constant(1, 3)}});
  const PiecewisePoly no(1, {PolyPiece{{AffineConstraint{{Rational(0)}, Rational(-1)}}, Poly::constant(1, 3)}});
  CHECK(at(yes, 0.3) == 3.0);
  CHECK(at(no, 0.3) == 0.0);
}

TEST_CASE("integrate_poly_1d") {
  CHECK(integrate_poly_1d(monomial(1, {2}, 1), 0.0, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(integrate_poly_1d(monomial(1, {2}, 1), Rational(0), Rational(1)) == Rational(1, 3));
  CHECK(integrate_poly_1d(Poly::constant(1, 1), 0.3, 0.3) == 0.0);
  CHECK(integrate_poly_1d(monomial(1, {1}, 2), 0.5, 1.0) == 0.75);
  CHECK_THROWS(integrate_poly_1d(Poly::constant(1, 1), 1.0, 0.0));
}

TEST_CASE("integrate_poly_1d is additive") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int rep = 0; rep < 200; ++rep) {
    Poly p(1);
    for (int e = 0; e <= 4; ++e) p.add_term(Monomial(std::vector<int>{e}), from_double(u(rng)));
    double lo = u(rng), mid = u(rng), hi = u(rng);
    if (lo > mid) std::swap(lo, mid);
    if (mid > hi) std::swap(mid, hi);
    if (lo > mid) std::swap(lo, mid);
    const double whole_int = integrate_poly_1d(p, lo, hi);
    const double split = integrate_poly_1d(p, lo, mid) + integrate_poly_1d(p, mid, hi);
    CHECK(std::abs(split - whole_int) <= 1e-12 * std::max(1.0, std::abs(whole_int)));
    const Rational rl = from_double(lo), rm = from_double(mid), rh = from_double(hi);
    CHECK(integrate_poly_1d(p, rl, rm) + integrate_poly_1d(p, rm, rh) == integrate_poly_1d(p, rl, rh));
  }
}

TEST_CASE("canonicalize_1d") {
  const Poly x2 = monomial(1, {2}, 1);
  auto line = canonicalize_1d(PiecewisePoly(1, {PolyPiece{{ge(Rational(1, 2))}, x2}}), 0, 1);
  CHECK(line.breakpoints == std::vector<Rational>{0, Rational(1, 2), 1});
  REQUIRE(line.polys.size() == 2);
  CHECK(line.polys[0].empty());
  CHECK(line.polys[1] == std::vector<Rational>{0, 0, 1});

  line = canonicalize_1d(constant_pp(1, 1), 0, 1);
  CHECK(line.breakpoints == std::vector<Rational>{0, 1});
  CHECK(line.polys[0] == std::vector<Rational>{1});

  const PiecewisePoly g(1, {PolyPiece{{ge(Rational(1, 4))}, Poly::constant(1, 1)},
                            PolyPiece{{ge(Rational(3, 4))}, Poly::variable(1, 0)}});
  line = canonicalize_1d(g, 0, 1);
  CHECK(line.breakpoints == std::vector<Rational>{0, Rational(1, 4), Rational(3, 4), 1});
  CHECK(line.polys[0].empty());
  CHECK(line.polys[1] == std::vector<Rational>{1});
  CHECK(line.polys[2] == std::vector<Rational>{1, 1});

  CHECK_THROWS(canonicalize_1d(constant_pp(2, 1), 0, 1));
}

TEST_CASE("canonical form agrees with eval_pp at interior points") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> k(-16, 16);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<PolyPiece> pieces;
    const int n = 1 + rep % 3;
    for (int p = 0; p < n; ++p) {
      Poly q(1);
      for (int e = 0; e <= 2; ++e) q.add_term(Monomial(std::vector<int>{e}), (Rational(k(rng)) / 8));
      std::vector<AffineConstraint> cons;
      if (p > 0) cons.push_back(AffineConstraint{{Rational(k(rng) >= 0 ? 1 : -1)}, (Rational(k(rng)) / 16)});
      pieces.push_back(PolyPiece{cons, q});
    }
    const PiecewisePoly g(1, pieces);
    const Breakline1D line = canonicalize_1d(g, 0, 1);
    const double x = u(rng);
    bool on_break = false;
    for (const auto& t : line.breakpoints) on_break = on_break || t.get_d() == x;
    if (on_break) continue;
    const Rational xr = from_double(x);
    const std::size_t cell = line.locate(x);
    Rational via_line(0);
    Rational xp(1);
    for (const auto& c : line.polys[cell]) {
      via_line += c * xp;
      xp *= xr;
    }
    CHECK(via_line == g.exact({&xr, 1}));
  }
}

TEST_CASE("density audit") {
  CHECK(audit_nonnegative(constant_pp(1, 1), 0, 1).passed);
  const auto bad = audit_nonnegative(constant_pp(1, Rational(-1, 3)), 0, 1);
  CHECK_FALSE(bad.passed);
  CHECK(bad.min_value == doctest::Approx(-1.0 / 3.0));
  CHECK(audit_nonnegative(constant_pp(2, 1), -1, 1).samples == 10000);
}

TEST_CASE("JSON literal round trip") {
  const PiecewisePoly g(2, {PolyPiece{{AffineConstraint{{Rational(1), Rational(-1, 3)}, Rational(1, 7)}},
                                      monomial(2, {1, 2}, Rational(-5, 3))},
                            PolyPiece{{}, Poly::constant(2, Rational(1, 2))}});
  const auto j = to_json(g);
  CHECK(piecewise_from_json(j) == g);
  CHECK(j["pieces"][0]["constraints"][0]["normal"][1] == "-1/3");
  CHECK_THROWS(piecewise_from_json(nlohmann::json{{"dim", 1}, {"pieces", {{{"poly", {{{"exps", {1, 2}}, {"coef", "1"}}}}}}}}));
}

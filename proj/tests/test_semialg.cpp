#include <doctest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "reluflow/instances.hpp"
#include "reluflow/semialg.hpp"

using namespace reluflow;
using namespace testing;

namespace {

Indicator ind(Indicator::Kind kind, std::vector<Rational> normal, const Rational& offset) {
  return Indicator{kind, AffineConstraint{std::move(normal), offset}};
}

AmnTermSet single(std::size_t dim, Poly q, std::vector<Indicator> factors) {
  AmnTermSet ts;
  ts.dim = dim;
  ts.terms.push_back(AmnTerm{Rational(1), std::move(q), std::move(factors)});
  return ts;
}

AmnTermSet random_set(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_int_distribution<int> k(-4, 4);
  std::uniform_int_distribution<int> nf(0, 4);
  std::uniform_int_distribution<int> kind(0, 2);
  AmnTermSet ts;
  ts.dim = dim;
  for (int t = 0; t < 2; ++t) {
    Poly q(dim);
    q.add_term(Monomial{}, (Rational(k(rng)) / 4));
    for (std::size_t j = 0; j < dim; ++j) {
      q.add_term(Monomial{}.with_exponent(j, 1), (Rational(k(rng)) / 4));
      q.add_term(Monomial{}.with_exponent(j, 2), (Rational(k(rng)) / 4));
    }
    std::vector<Indicator> factors;
    const int n = nf(rng);
    for (int f = 0; f < n; ++f) {
      std::vector<Rational> normal;
      for (std::size_t j = 0; j < dim; ++j) normal.emplace_back(k(rng), 4);
      factors.push_back(ind(static_cast<Indicator::Kind>(kind(rng)), normal, (Rational(k(rng)) / 8)));
    }
    ts.terms.push_back(AmnTerm{(Rational(k(rng) == 0 ? 1 : k(rng)) / 3), q, factors});
  }
  return ts;
}

// int_0^1 ts(x', y) dy, split at every factor root in y.
double numeric_last(const AmnTermSet& ts, std::vector<double> xp) {
  std::vector<double> cuts{0.0, 1.0};
  const std::size_t last = ts.dim - 1;
  for (const auto& term : ts.terms)
    for (const auto& f : term.factors) {
      const double c = f.affine.normal[last].get_d();
      if (c == 0.0) continue;
      double rest = f.affine.offset.get_d();
      for (std::size_t j = 0; j < last; ++j) rest += f.affine.normal[j].get_d() * xp[j];
      const double root = -rest / c;
      if (root > 0.0 && root < 1.0) cuts.push_back(root);
    }
  std::sort(cuts.begin(), cuts.end());
  xp.push_back(0.0);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    auto f = [&](double y) {
      xp.back() = y;
      return ts.evaluate(xp);
    };
    total += boost::math::quadrature::gauss<double, 20>::integrate(f, cuts[k], cuts[k + 1]);
  }
  return total;
}

}  // namespace

TEST_CASE("eliminate_last examples") {
  // x2 * 1[x1 - x2 >= 0] on [0, 1]^2
  const AmnTermSet ts = single(2, monomial(2, {0, 1}, 1), {ind(Indicator::Kind::Ge0, {1, -1}, 0)});
  const AmnTermSet out = eliminate_last(ts);
  CHECK(out.dim == 1);
  for (int k = 1; k < 16; ++k) {
    Rational x(k, 16);
    x.canonicalize();
    CHECK(out.evaluate(std::span<const Rational>(&x, 1)) == x * x / 2);
  }

  const AmnTermSet one = single(1, Poly::constant(1, 1), {});
  CHECK(integrate_all(one) == 1);
  const AmnTermSet empty = single(1, Poly::constant(1, 1), {ind(Indicator::Kind::Ge0, {-1}, 0)});
  CHECK(integrate_all(empty) == 0);
  const AmnTermSet eq = single(1, Poly::constant(1, 1), {ind(Indicator::Kind::Eq0, {1}, Rational(-1, 2))});
  CHECK(integrate_all(eq) == 0);
  const AmnTermSet half = single(1, Poly::constant(1, 1), {ind(Indicator::Kind::Gt0, {1}, Rational(-1, 2))});
  CHECK(integrate_all(half) == Rational(1, 2));
}

TEST_CASE("risk by elimination examples") {
  const Problem p = unit_problem(2, 1, constant_pp(2, 0), Evaluator::Elimination);
  CHECK(risk_by_elimination_exact(p, ParamVector(p.shape(), {1, 0, 0, 1, 0})) == Rational(1, 3));
  // u = x1 - x2 has density 1 - u on [0, 1]: int u^2 (1 - u) du
  CHECK(risk_by_elimination_exact(p, ParamVector(p.shape(), {1, -1, 0, 1, 0})) == Rational(1, 12));
  const Problem p1 = unit_problem(1, 1, constant_pp(1, 0), Evaluator::Elimination);
  CHECK(risk_by_elimination_exact(p1, ParamVector(p1.shape(), {1, 0, 1, 0})) == Rational(1, 3));
}

TEST_CASE("pointwise elimination matches numeric integration") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t dim = 1; dim <= 3; ++dim) {
    for (int rep = 0; rep < 8; ++rep) {
      const AmnTermSet ts = random_set(rng, dim);
      const AmnTermSet out = eliminate_last(ts);
      if (dim == 1) {
        CHECK(std::abs(out.evaluate(std::span<const double>{}) - numeric_last(ts, {})) <= 1e-9);
        continue;
      }
      for (int pt = 0; pt < 100; ++pt) {
        std::vector<double> xp(dim - 1);
        for (double& x : xp) x = u(rng);
        CHECK(std::abs(out.evaluate(xp) - numeric_last(ts, xp)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("elimination is linear") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 10; ++rep) {
    const AmnTermSet a = random_set(rng, 2);
    const AmnTermSet b = random_set(rng, 2);
    AmnTermSet sum = a;
    sum += b;
    const AmnTermSet lhs = eliminate_last(sum);
    const AmnTermSet ea = eliminate_last(a);
    const AmnTermSet eb = eliminate_last(b);
    for (int pt = 0; pt < 50; ++pt) {
      const Rational x = from_double(u(rng));
      const std::span<const Rational> xs(&x, 1);
      CHECK(lhs.evaluate(xs) == ea.evaluate(xs) + eb.evaluate(xs));
    }
  }
}

TEST_CASE("elimination order does not change the integral") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = crosscheck_instance(seed, 3, Evaluator::Elimination);
    const AmnTermSet ts = risk_integrand(inst.problem, inst.theta);
    const Rational ref = integrate_all(ts);
    std::vector<std::size_t> order{0, 1, 2};
    do {
      const Rational v = integrate_all(ts, order);
      CHECK(std::abs(Rational(v - ref).get_d()) <= 1e-9 * std::max(1.0, std::abs(ref.get_d())));
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

TEST_CASE("elimination gradient agrees with the oracle") {
  for (std::size_t d : {2, 3}) {
    const Instance inst = crosscheck_instance(7, d, Evaluator::Elimination);
    const RiskAndGradient e = evaluate_by_elimination(inst.problem, inst.theta);
    const RiskAndGradient q = evaluate_quadrature(inst.problem, inst.theta);
    CHECK(std::abs(e.risk - q.risk) <= 1e-6 * (1 + std::abs(q.risk)));
    for (std::size_t k = 0; k < e.gradient.size(); ++k)
      CHECK(std::abs(e.gradient[k] - q.gradient[k]) <= 1e-6 * (1 + std::abs(q.gradient[k])));
  }
}

TEST_CASE("degree guard names the term") {
  const AmnTermSet ts = single(1, monomial(1, {32}, 1), {});
  try {
    (void)eliminate_last(ts);
    FAIL("expected overflow");
  } catch (const std::overflow_error& e) {
    CHECK(std::string(e.what()).find("term") != std::string::npos);
  }
}

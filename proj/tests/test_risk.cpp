#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "reluflow/instances.hpp"
#include "reluflow/risk.hpp"
#include "reluflow/semialg.hpp"

using namespace reluflow;
using namespace testing;

namespace {

void check_vec(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(tol).scale(1));
}

}  // namespace

TEST_CASE("risk and gradient examples") {
  const Problem zero = unit_problem(1, 1, constant_pp(1, 0));
  const Problem fit = unit_problem(1, 1, identity_1d());
  const NetworkShape s = zero.shape();
  for (Evaluator e : {Evaluator::Exact1D, Evaluator::Elimination, Evaluator::Quadrature}) {
    CAPTURE(to_string(e));
    const RiskAndGradient a = evaluate_with(zero, ParamVector(s, {1, 0, 1, 0}), e);
    CHECK(a.risk == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    check_vec(a.gradient, {2.0 / 3.0, 1, 2.0 / 3.0, 1}, 1e-14);
    const RiskAndGradient b = evaluate_with(zero, ParamVector(s, {0, 0, 5, 2}), e);
    CHECK(b.risk == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(b.gradient == std::vector<double>{0, 0, 0, 4});
    const RiskAndGradient c = evaluate_with(fit, ParamVector(s, {1, 0, 1, 0}), e);
    CHECK(std::abs(c.risk) <= 1e-15);
    for (double g : c.gradient) CHECK(std::abs(g) <= 1e-15);
  }
  const auto exact = evaluate_exact_1d_rational(zero, ParamVector(s, {1, 0, 1, 0}));
  CHECK(exact.risk == Rational(1, 3));
  CHECK(exact.gradient == std::vector<Rational>{Rational(2, 3), 1, Rational(2, 3), 1});
}

TEST_CASE("evaluator dimension guards") {
  const Problem p2 = unit_problem(2, 1, constant_pp(2, 0), Evaluator::Quadrature);
  CHECK_THROWS(evaluate_with(p2, ParamVector(p2.shape()), Evaluator::Exact1D));
  const Problem p4(NetworkShape(4, 1, 0, 1), constant_pp(4, 0), constant_pp(4, 1), Evaluator::Quadrature);
  CHECK_THROWS(evaluate_with(p4, ParamVector(p4.shape()), Evaluator::Elimination));
  CHECK_THROWS(Problem(NetworkShape(2, 1, 0, 1), constant_pp(1, 0), constant_pp(2, 1), Evaluator::Quadrature));
}

TEST_CASE("finite differences match the generalized gradient") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Instance inst = gradcheck_instance(seed);
    CHECK(degenerate_set(inst.theta).empty());
    CHECK(kink_separation(inst.problem, inst.theta) >= 1e-3);
    CHECK(gradcheck(inst.problem, inst.theta).max_rel_error <= 1e-5);
  }
}

TEST_CASE("degenerate components are exactly zero") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Instance inst = degenerate_instance(seed);
    const auto D = degenerate_set(inst.theta);
    REQUIRE_FALSE(D.empty());
    const auto g = gradient(inst.problem, inst.theta);
    for (std::size_t i : D) {
      CHECK(g[inst.theta.w_index(i, 0)] == 0.0);
      CHECK(g[inst.theta.b_index(i)] == 0.0);
      CHECK(g[inst.theta.v_index(i)] == 0.0);
    }
  }
}

TEST_CASE("exact evaluators agree with the quadrature oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = crosscheck_instance(seed, 1, Evaluator::Exact1D);
    const double q = evaluate_quadrature(inst.problem, inst.theta).risk;
    CHECK(std::abs(risk(inst.problem, inst.theta) - q) <= 1e-7 * (1 + std::abs(q)));
    CHECK(std::abs(risk_by_elimination(inst.problem, inst.theta) - risk(inst.problem, inst.theta)) <=
          1e-12 * std::abs(risk(inst.problem, inst.theta)));
  }
}

TEST_CASE("risk is invariant under neuron rescaling") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = gradcheck_instance(seed);
    ParamVector scaled = inst.theta;
    const double s = 1.0 + 0.37 * static_cast<double>(seed);
    for (std::size_t i = 0; i < scaled.shape().H; ++i) {
      scaled.w(i, 0) *= s;
      scaled.b(i) *= s;
      scaled.v(i) /= s;
    }
    const double L = risk(inst.problem, inst.theta);
    CHECK(std::abs(risk(inst.problem, scaled) - L) <= 1e-12 * std::max(1.0, std::abs(L)));
  }
}

TEST_CASE("generalized gradient is locally Lipschitz off the degenerate set") {
  const Instance inst = gradcheck_instance(4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    ParamVector a = inst.theta;
    ParamVector b = inst.theta;
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] += 1e-2 / std::sqrt(static_cast<double>(a.size())) * u(rng);
      b[k] += 1e-2 / std::sqrt(static_cast<double>(a.size())) * u(rng);
    }
    const auto ga = gradient(inst.problem, a);
    const auto gb = gradient(inst.problem, b);
    std::vector<double> dg(ga.size()), dt(ga.size());
    for (std::size_t k = 0; k < ga.size(); ++k) {
      dg[k] = ga[k] - gb[k];
      dt[k] = a[k] - b[k];
    }
    worst = std::max(worst, norm2(dg) / norm2(dt));
  }
  CHECK(worst < 1e6);
}

TEST_CASE("smoothing family") {
  const SmoothedFamily ramp;
  SmoothedFamily soft;
  soft.kind = SmoothedFamily::Kind::ShiftedSoftplus;
  for (const auto& fam : {ramp, soft}) {
    for (double r : {1.0, 10.0, 1e3}) {
      for (double x : {-1.0, -1e-3, 0.0, 1e-4, 0.3, 2.0}) {
        const double d = fam.derivative(r, x);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(fam.value(r, x) >= 0.0);
      }
    }
    CHECK(fam.derivative(1e8, 0.0) <= 1e-3);
    CHECK(std::abs(fam.value(1e8, 0.7) - 0.7) <= 1e-3);
    CHECK(fam.value(1e8, -0.7) <= 1e-3);
  }
  CHECK(ramp.derivative(10, 0.0) == 0.0);
  CHECK(ramp.derivative(10, 0.05) == doctest::Approx(0.5));
  CHECK(ramp.value(10, 1.0) == doctest::Approx(0.95));
}

TEST_CASE("smoothed gradient examples") {
  const Problem zero = unit_problem(1, 1, constant_pp(1, 0));
  const ParamVector th(zero.shape(), {1, 0.5, 1, 0});
  // kink at -0.5: G = (2 int x(x+1/2), 2 int (x+1/2), 2 int (x+1/2)^2, 2 int (x+1/2)) over [0, 1]
  const std::vector<double> G{7.0 / 6.0, 2.0, 13.0 / 6.0, 2.0};
  check_vec(gradient(zero, th), G, 1e-14);
  const auto g = smoothed_gradient(zero, th, 1e4);
  std::vector<double> diff(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) diff[k] = g[k] - G[k];
  CHECK(norm2(diff) <= 1e-3);

  const ParamVector deg(zero.shape(), {0, 0, 5, 2});
  for (double r : {10.0, 1e2, 1e4}) {
    const auto gd = smoothed_gradient(zero, deg, r);
    CHECK(gd[2] == doctest::Approx(4.0 * SmoothedFamily{}.value(r, 0.0)));
  }
}

TEST_CASE("smoothed gradient converges monotonically") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance inst = smoothing_instance(seed);
    const auto G = gradient(inst.problem, inst.theta);
    double prev = INFINITY;
    for (double r : {10.0, 1e2, 1e3, 1e4}) {
      const auto g = smoothed_gradient(inst.problem, inst.theta, r);
      std::vector<double> diff(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) diff[k] = g[k] - G[k];
      CHECK(norm2(diff) < prev);
      prev = norm2(diff);
    }
    CHECK(prev <= 1e-3);
  }
}

TEST_CASE("subdifferential witness examples") {
  const Problem zero = unit_problem(1, 1, constant_pp(1, 0));
  const WitnessResult nd = subdiff_witness(zero, ParamVector(zero.shape(), {1, 0, 1, 0}), 5);
  CHECK(nd.residuals == std::vector<double>(5, 0.0));
  const WitnessResult d = subdiff_witness(zero, ParamVector(zero.shape(), {0, 0, 5, 2}), 8);
  CHECK(d.residuals == std::vector<double>(8, 0.0));
  CHECK(d.perturbed_nondegenerate);

  const Problem two = unit_problem(1, 2, constant_pp(1, 0));
  const WitnessResult w = subdiff_witness(two, ParamVector(two.shape(), {1, 0, 0, 0, 1, 5, 2}), 20);
  REQUIRE(w.residuals.size() == 20);
  for (std::size_t n = 4; n < 20; ++n) CHECK(w.residuals[n] <= w.residuals[n - 1]);
  CHECK(w.final_residual <= 1e-6);
  CHECK_THROWS(subdiff_witness(zero, ParamVector(zero.shape(), {1, 0, 1, 0}), 1));
}

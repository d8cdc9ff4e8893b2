#include <doctest.h>

#include <cmath>
#include <random>

#include "reluflow/network.hpp"

using namespace reluflow;

TEST_CASE("parameter count and shape guards") {
  CHECK(NetworkShape(1, 1, 0, 1).param_count() == 4);
  CHECK(NetworkShape(3, 5, 0, 1).param_count() == 26);
  CHECK_THROWS(NetworkShape(1, 1, 1, 1));
  CHECK_THROWS(NetworkShape(0, 1, 0, 1));
  CHECK_THROWS(ParamVector(NetworkShape(1, 1, 0, 1), {1.0, 2.0}));
}

TEST_CASE("1-based mapping round-trips the 0-based layout") {
  const NetworkShape s(2, 3, 0, 1);
  std::vector<double> raw(s.param_count());
  for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = 0.1 * static_cast<double>(k) + 1.0 / 3.0;
  const ParamVector th(s, raw);
  for (std::size_t i = 1; i <= 3; ++i) {
    for (std::size_t j = 1; j <= 2; ++j) CHECK(th[th.w_index1(i, j) - 1] == th.w(i - 1, j - 1));
    CHECK(th[th.b_index1(i) - 1] == th.b(i - 1));
    CHECK(th[th.v_index1(i) - 1] == th.v(i - 1));
  }
  CHECK(th[th.c_index1() - 1] == th.c());
  CHECK(th.w_index1(2, 1) == 3);
  CHECK(th.b_index1(1) == 7);
  CHECK(th.v_index1(1) == 10);
  CHECK(th.c_index1() == 13);
}

TEST_CASE("realize") {
  const NetworkShape s1(1, 1, 0, 1);
  const double x = 0.5;
  CHECK(realize(ParamVector(s1, {1, 0, 1, 0}), {&x, 1}) == 0.5);
  const double y = 0.7;
  CHECK(realize(ParamVector(s1, {0, 0, 5, 2}), {&y, 1}) == 2.0);

  const NetworkShape s2(2, 2, 0, 1);
  // w = [[1, -1], [0, 1]], b = [0, -0.25], v = [2, -1], c = 0.5
  const ParamVector th(s2, {1, -1, 0, 1, 0, -0.25, 2, -1, 0.5});
  const std::vector<double> p{0.5, 0.25};
  CHECK(realize(th, p) == 1.0);
}

TEST_CASE("degenerate set uses exact zero") {
  const NetworkShape s1(1, 1, 0, 1);
  CHECK(degenerate_set(ParamVector(s1, {1, 0, 1, 0})).empty());
  CHECK(degenerate_set(ParamVector(s1, {0, 0, 5, 2})) == std::vector<std::size_t>{0});
  CHECK(degenerate_set(ParamVector(s1, {0, 1e-300, 5, 2})).empty());
  const NetworkShape s3(1, 3, 0, 1);
  CHECK(degenerate_set(ParamVector(s3, {0, 1, 0, 0, 0, 0, 1, 1, 1, 0})) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("degenerate neurons contribute exactly zero") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  const NetworkShape s(2, 3, -1, 1);
  for (int rep = 0; rep < 50; ++rep) {
    ParamVector th(s);
    for (double& v : th.values()) v = n(rng);
    th.w(1, 0) = th.w(1, 1) = th.b(1) = 0.0;
    ParamVector no_v = th;
    no_v.v(1) = 0.0;
    const std::vector<double> x{n(rng), n(rng)};
    CHECK(realize(th, x) == realize(no_v, x));
  }
}

TEST_CASE("active regions in one dimension") {
  const NetworkShape s(1, 1, 0, 1);
  auto r = active_region_1d(ParamVector(s, {1, -0.5, 1, 0}), 0);
  CHECK_FALSE(r.empty);
  CHECK(r.lo == 0.5);
  CHECK(r.hi == 1.0);
  r = active_region_1d(ParamVector(s, {-2, 1, 1, 0}), 0);
  CHECK(r.lo == 0.0);
  CHECK(r.hi == 0.5);
  CHECK(active_region_1d(ParamVector(s, {0, 0, 1, 0}), 0).empty);
  CHECK(active_region_1d(ParamVector(s, {0, 1, 1, 0}), 0).length() == 1.0);
  CHECK(active_region_1d(ParamVector(s, {0, -1, 1, 0}), 0).empty);
  CHECK(active_region_1d(ParamVector(s, {1, 2, 1, 0}), 0).length() == 1.0);
  CHECK(active_region_1d(ParamVector(s, {1, -2, 1, 0}), 0).empty);
}

TEST_CASE("active region is invariant under positive scaling") {
  const NetworkShape s(1, 1, -1, 2);
  for (double scale : {0.125, 0.5, 4.0, 64.0}) {
    const auto a = active_region_1d(ParamVector(s, {-1.5, 0.75, 1, 0}), 0);
    const auto b = active_region_1d(ParamVector(s, {-1.5 * scale, 0.75 * scale, 1, 0}), 0);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
  }
}

TEST_CASE("realize is locally Lipschitz in x") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  const NetworkShape s(2, 4, 0, 1);
  ParamVector th(s);
  for (double& v : th.values()) v = n(rng);
  double worst = 0.0;
  std::vector<double> ratios;
  for (int rep = 0; rep < 100; ++rep) {
    const std::vector<double> x{n(rng), n(rng)};
    const std::vector<double> u{n(rng), n(rng)};
    const double nu = std::hypot(u[0], u[1]);
    for (double h : {1e-3, 1e-4, 1e-5}) {
      const std::vector<double> xh{x[0] + h * u[0] / nu, x[1] + h * u[1] / nu};
      const double r = std::abs(realize(th, xh) - realize(th, x)) / h;
      ratios.push_back(r);
      worst = std::max(worst, r);
    }
  }
  const double L = 2.0 * worst;
  for (double r : ratios) CHECK(r <= L);
  CHECK(std::isfinite(L));
}

TEST_CASE("active-region symmetric difference is locally Lipschitz") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const NetworkShape s(1, 1, 0, 1);
  const double w0 = 1.3;
  const double b0 = -0.4;
  const double eps = 1e-2;
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const double w1 = w0 + eps * u(rng);
    const double b1 = b0 + eps * u(rng);
    const double w2 = w0 + eps * u(rng);
    const double b2 = b0 + eps * u(rng);
    const auto r1 = active_region_1d(ParamVector(s, {w1, b1, 1, 0}), 0);
    const auto r2 = active_region_1d(ParamVector(s, {w2, b2, 1, 0}), 0);
    const double dist = std::hypot(w1 - w2, b1 - b2);
    if (dist > 0) worst = std::max(worst, symmetric_difference_length(r1, r2) / dist);
  }
  CHECK(std::isfinite(worst));
  CHECK(worst < 10.0);
}

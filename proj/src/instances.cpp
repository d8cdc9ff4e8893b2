#include "reluflow/instances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace reluflow {

namespace {

constexpr double kMinSeparation = 2e-3;

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
    gen_.seed(seq);
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>()(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  bool coin() { return integer(0, 1) == 1; }

  // Multiple of 1/denom in [lo, hi].
  Rational dyadic(double lo, double hi, int denom = 16) {
    const int k = integer(static_cast<int>(std::ceil(lo * denom)), static_cast<int>(std::floor(hi * denom)));
    Rational q(k, denom);
    q.canonicalize();
    return q;
  }

 private:
  std::mt19937_64 gen_;
};

std::vector<Rational> vec(std::initializer_list<Rational> xs) { return xs; }

Poly random_poly(Rng& rng, std::size_t d, int max_degree) {
  Poly p(d);
  p.add_term(Monomial{}, rng.dyadic(-1, 1));
  if (max_degree >= 1)
    for (std::size_t j = 0; j < d; ++j)
      if (rng.coin() || d == 1) p.add_term(Monomial{}.with_exponent(j, 1), rng.dyadic(-1, 1));
  if (max_degree >= 2 && rng.coin()) {
    const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<int>(d) - 1));
    const auto k = static_cast<std::size_t>(rng.integer(0, static_cast<int>(d) - 1));
    Monomial m = Monomial{}.with_exponent(j, 1);
    m = m.times(Monomial{}.with_exponent(k, 1));
    p.add_term(m, rng.dyadic(-1, 1));
  }
  return p;
}

// Breakpoint strictly inside (a, b) on the 1/64 grid.
Rational interior_point(Rng& rng, double a, double b) {
  const double margin = (b - a) / 16.0;
  return rng.dyadic(a + margin, b - margin, 64);
}

AffineConstraint halfline(const Rational& t, bool right) {
  // right: x - t >= 0, otherwise t - x >= 0
  return right ? AffineConstraint{vec({Rational(1)}), Rational(-t)} : AffineConstraint{vec({Rational(-1)}), t};
}

PiecewisePoly random_target_1d(Rng& rng, double a, double b, int max_pieces) {
  std::vector<PolyPiece> pieces;
  pieces.push_back(PolyPiece{{}, random_poly(rng, 1, 2)});
  const int extra = rng.integer(0, max_pieces - 1);
  for (int k = 0; k < extra; ++k)
    pieces.push_back(PolyPiece{{halfline(interior_point(rng, a, b), rng.coin())}, random_poly(rng, 1, 2)});
  return PiecewisePoly(1, std::move(pieces));
}

PiecewisePoly random_density_1d(Rng& rng, double a, double b, int max_pieces) {
  // alpha + beta x with |beta| max|x| <= alpha / 2, plus an optional bump
  const Rational alpha = rng.dyadic(0.5, 1.5);
  const double xmax = std::max(std::abs(a), std::abs(b));
  const double beta_max = alpha.get_d() / (2.0 * xmax);
  Poly base(1);
  base.add_term(Monomial{}, alpha);
  base.add_term(Monomial{}.with_exponent(0, 1), rng.dyadic(-beta_max, beta_max, 64));
  std::vector<PolyPiece> pieces{PolyPiece{{}, base}};
  if (max_pieces > 1 && rng.coin())
    pieces.push_back(
        PolyPiece{{halfline(interior_point(rng, a, b), rng.coin())}, Poly::constant(1, rng.dyadic(0, 0.5))});
  return PiecewisePoly(1, std::move(pieces));
}

std::vector<double> breakpoints(const Problem& problem) {
  std::vector<double> out;
  for (const auto& q : problem.target_line().breakpoints) out.push_back(q.get_d());
  for (const auto& q : problem.density_line().breakpoints) out.push_back(q.get_d());
  return out;
}

std::pair<double, double> random_domain(Rng& rng) {
  switch (rng.integer(0, 2)) {
    case 0:
      return {0.0, 1.0};
    case 1:
      return {-1.0, 1.0};
    default:
      return {-0.5, 2.0};
  }
}

// Neurons with |w| >= 0.3 whose kinks keep kMinSeparation from `fixed`
// and from each other (kinks outside the domain are allowed).
void place_neurons(Rng& rng, ParamVector& theta, const std::vector<double>& fixed, double a, double b) {
  const std::size_t H = theta.shape().H;
  std::vector<double> taken = fixed;
  for (std::size_t i = 0; i < H; ++i) {
    double w = rng.uniform(0.3, 2.0) * (rng.coin() ? 1.0 : -1.0);
    double kink = 0.0;
    for (int attempt = 0;; ++attempt) {
      kink = rng.uniform(a - 0.3 * (b - a), b + 0.3 * (b - a));
      const bool ok = std::all_of(taken.begin(), taken.end(),
                                  [&](double t) { return std::abs(t - kink) >= 2.0 * kMinSeparation; });
      if (ok || attempt > 1000) break;
    }
    taken.push_back(kink);
    theta.w(i, 0) = w;
    theta.b(i) = -w * kink;
    theta.v(i) = rng.uniform(-1.5, 1.5);
  }
  theta.c() = rng.uniform(-1.0, 1.0);
}

PiecewisePoly constant(std::size_t d, int value) { return PiecewisePoly::constant(d, Rational(value)); }

}  // namespace

Instance gradcheck_instance(std::uint64_t seed) {
  Rng rng(seed, 1);
  const auto [a, b] = random_domain(rng);
  const auto H = static_cast<std::size_t>(rng.integer(1, 4));
  const NetworkShape shape(1, H, a, b);
  Problem problem(shape, random_target_1d(rng, a, b, 3), random_density_1d(rng, a, b, 2), Evaluator::Exact1D);
  ParamVector theta(shape);
  place_neurons(rng, theta, breakpoints(problem), a, b);
  return {std::move(problem), std::move(theta)};
}

Instance degenerate_instance(std::uint64_t seed) {
  Instance inst = gradcheck_instance(seed);
  Rng rng(seed, 2);
  const std::size_t H = inst.theta.shape().H;
  const auto first = static_cast<std::size_t>(rng.integer(0, static_cast<int>(H) - 1));
  for (std::size_t i = 0; i < H; ++i) {
    if (i != first && !rng.coin()) continue;
    inst.theta.w(i, 0) = 0.0;
    inst.theta.b(i) = 0.0;
  }
  return inst;
}

Instance crosscheck_instance(std::uint64_t seed, std::size_t d, Evaluator evaluator) {
  Rng rng(seed, static_cast<std::uint32_t>(10 + d));
  const auto [a, b] = random_domain(rng);
  if (d == 1) {
    const auto H = static_cast<std::size_t>(rng.integer(1, 4));
    const NetworkShape shape(1, H, a, b);
    Problem problem(shape, random_target_1d(rng, a, b, 3), random_density_1d(rng, a, b, 2), evaluator);
    ParamVector theta(shape);
    for (double& x : theta.values()) x = rng.normal();
    return {std::move(problem), std::move(theta)};
  }
  const auto H = static_cast<std::size_t>(rng.integer(1, d == 2 ? 3 : 2));
  const NetworkShape shape(d, H, a, b);
  const double mid = 0.5 * (a + b);
  auto random_constraint = [&] {
    AffineConstraint con;
    Rational dot(0);
    for (std::size_t j = 0; j < d; ++j) {
      con.normal.push_back(rng.dyadic(-1, 1, 8));
      dot += con.normal.back() * from_double(mid);
    }
    if (std::all_of(con.normal.begin(), con.normal.end(), [](const Rational& q) { return q == 0; }))
      con.normal[0] = 1;
    // hyperplane through a point near the box centre
    con.offset = -dot + rng.dyadic(-0.25 * (b - a), 0.25 * (b - a), 16);
    return con;
  };
  std::vector<PolyPiece> target{PolyPiece{{}, random_poly(rng, d, 2)}};
  if (rng.coin()) target.push_back(PolyPiece{{random_constraint()}, random_poly(rng, d, 1)});
  std::vector<PolyPiece> density{PolyPiece{{}, Poly::constant(d, rng.dyadic(0.5, 1.5))}};
  if (rng.coin()) density.push_back(PolyPiece{{random_constraint()}, Poly::constant(d, rng.dyadic(0, 0.5))});
  Problem problem(shape, PiecewisePoly(d, std::move(target)), PiecewisePoly(d, std::move(density)), evaluator);
  ParamVector theta(shape);
  for (double& x : theta.values()) x = rng.normal();
  return {std::move(problem), std::move(theta)};
}

Instance flow_instance(std::uint64_t seed) {
  Rng rng(seed, 3);
  const double a = 0.0;
  const double b = 1.0;
  const NetworkShape shape(1, 3, a, b);
  Problem problem(shape, random_target_1d(rng, a, b, 3), random_density_1d(rng, a, b, 2), Evaluator::Exact1D);
  ParamVector theta(shape);
  for (double& x : theta.values()) x = rng.normal();
  return {std::move(problem), std::move(theta)};
}

Instance smoothing_instance(std::uint64_t seed) {
  Rng rng(seed, 6);
  const double a = 0.0;
  const double b = 1.0;
  const auto H = static_cast<std::size_t>(rng.integer(1, 3));
  const NetworkShape shape(1, H, a, b);
  Problem problem(shape, random_target_1d(rng, a, b, 3), random_density_1d(rng, a, b, 2), Evaluator::Exact1D);
  ParamVector theta(shape);
  std::vector<double> taken = breakpoints(problem);
  for (std::size_t i = 0; i < H; ++i) {
    const double w = rng.uniform(1.0, 2.0) * (rng.coin() ? 1.0 : -1.0);
    double kink = 0.5;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      kink = rng.uniform(0.1, 0.9);
      if (std::all_of(taken.begin(), taken.end(), [&](double t) { return std::abs(t - kink) >= 0.05; })) break;
    }
    taken.push_back(kink);
    theta.w(i, 0) = w;
    theta.b(i) = -w * kink;
    theta.v(i) = rng.uniform(0.25, 1.0) * (rng.coin() ? 1.0 : -1.0);
  }
  theta.c() = rng.uniform(-0.5, 0.5);
  return {std::move(problem), std::move(theta)};
}

Instance teacher_instance(std::uint64_t seed) {
  Rng rng(seed, 4);
  const double a = 0.0;
  const double b = 1.0;
  const auto H = static_cast<std::size_t>(rng.integer(1, 2));
  const NetworkShape shape(1, H, a, b);
  std::vector<PolyPiece> pieces;
  ParamVector teacher(shape);
  const Rational c = rng.dyadic(-0.5, 0.5);
  pieces.push_back(PolyPiece{{}, Poly::constant(1, c)});
  teacher.c() = c.get_d();
  for (std::size_t i = 0; i < H; ++i) {
    const Rational w = rng.dyadic(0.5, 1.5) * (rng.coin() ? 1 : -1);
    const Rational kink = rng.dyadic(0.2, 0.8, 32);
    const Rational bias = -w * kink;
    const Rational v = rng.dyadic(0.5, 1.5) * (rng.coin() ? 1 : -1);
    Poly z(1);
    z.add_term(Monomial{}.with_exponent(0, 1), Rational(v * w));
    z.add_term(Monomial{}, Rational(v * bias));
    pieces.push_back(PolyPiece{{AffineConstraint{vec({w}), bias}}, z});
    teacher.w(i, 0) = w.get_d();
    teacher.b(i) = bias.get_d();
    teacher.v(i) = v.get_d();
  }
  Problem problem(shape, PiecewisePoly(1, std::move(pieces)), constant(1, 1), Evaluator::Exact1D);
  ParamVector theta = teacher;
  for (double& x : theta.values()) x += 0.05 * rng.normal();
  return {std::move(problem), std::move(theta)};
}

Instance c_only_instance() {
  const NetworkShape shape(1, 1, 0.0, 1.0);
  return {Problem(shape, constant(1, 0), constant(1, 1), Evaluator::Exact1D), ParamVector(shape, {0.0, 0.0, 0.0, 1.0})};
}

Instance perfect_fit_instance() {
  const NetworkShape shape(1, 1, 0.0, 1.0);
  Poly x = Poly::variable(1, 0);
  PiecewisePoly f(1, {PolyPiece{{}, x}});
  return {Problem(shape, std::move(f), constant(1, 1), Evaluator::Exact1D), ParamVector(shape, {1.0, 0.0, 1.0, 0.0})};
}

Instance degeneration_candidate(std::uint64_t seed) {
  Rng rng(seed, 5);
  const NetworkShape shape(1, 1, -1.0, 1.0);
  ParamVector theta(shape);
  theta.w(0, 0) = 0.0;
  theta.b(0) = rng.uniform(0.01, 0.4);
  theta.v(0) = rng.uniform(0.25, 2.0);
  theta.c() = rng.uniform(1.05, 2.0);
  return {Problem(shape, constant(1, 1), constant(1, 1), Evaluator::Exact1D), std::move(theta)};
}

std::optional<std::uint64_t> find_degenerating_seed(std::uint64_t start, std::size_t tries, double t_max) {
  SolverConfig cfg;
  cfg.t_max = t_max;
  for (std::uint64_t s = start; s < start + tries; ++s) {
    const Instance inst = degeneration_candidate(s);
    const Trajectory traj = solve(inst.problem, inst.theta, cfg);
    if (!traj.events.empty() && traj.events.front().t > 0.0) return s;
  }
  return std::nullopt;
}

double kink_separation(const Problem& problem, const ParamVector& theta) {
  const auto& s = problem.shape();
  std::vector<double> kinks;
  for (std::size_t i = 0; i < s.H; ++i) {
    if (theta.w(i, 0) == 0.0) continue;
    const double k = -theta.b(i) / theta.w(i, 0);
    if (k > s.a && k < s.b) kinks.push_back(k);
  }
  std::vector<double> fixed = breakpoints(problem);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kinks.size(); ++i) {
    for (double t : fixed) best = std::min(best, std::abs(kinks[i] - t));
    for (std::size_t j = 0; j < kinks.size(); ++j)
      if (j != i) best = std::min(best, std::abs(kinks[i] - kinks[j]));
  }
  return best;
}

}  // namespace reluflow

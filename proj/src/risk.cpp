#include "reluflow/risk.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "reluflow/parallel.hpp"
#include "reluflow/semialg.hpp"

namespace reluflow {

namespace {

template <class T>
T from_binary64(double x);
template <>
double from_binary64<double>(double x) {
  return x;
}
template <>
Rational from_binary64<Rational>(double x) {
  return from_double(x);
}

template <class T>
T from_exact(const Rational& q);
template <>
double from_exact<double>(const Rational& q) {
  return q.get_d();
}
template <>
Rational from_exact<Rational>(const Rational& q) {
  return q;
}

template <class T>
void exact_1d(const Problem& problem, const ParamVector& theta, T& risk_out, std::vector<T>& grad) {
  const auto& shape = problem.shape();
  if (shape.d != 1) throw std::invalid_argument("the exact-1d evaluator needs d = 1");
  if (theta.shape() != shape) throw std::invalid_argument("parameter vector does not match the problem shape");
  const std::size_t H = shape.H;

  std::vector<T> w(H), bias(H), v(H), kink(H);
  for (std::size_t i = 0; i < H; ++i) {
    w[i] = from_binary64<T>(theta.w(i, 0));
    bias[i] = from_binary64<T>(theta.b(i));
    v[i] = from_binary64<T>(theta.v(i));
  }
  const T c = from_binary64<T>(theta.c());
  const T a = from_exact<T>(problem.a_exact());
  const T b = from_exact<T>(problem.b_exact());

  const auto& fl = problem.target_line();
  const auto& pl = problem.density_line();
  auto convert_points = [](const Breakline1D& line) {
    std::vector<T> out;
    out.reserve(line.breakpoints.size());
    for (const auto& q : line.breakpoints) out.push_back(from_exact<T>(q));
    return out;
  };
  auto convert_polys = [](const Breakline1D& line) {
    std::vector<std::vector<T>> out;
    for (const auto& poly : line.polys) {
      std::vector<T> coeffs;
      for (const auto& q : poly) coeffs.push_back(from_exact<T>(q));
      out.push_back(std::move(coeffs));
    }
    return out;
  };
  const std::vector<T> fpts = convert_points(fl);
  const std::vector<T> ppts = convert_points(pl);
  const auto fpoly = convert_polys(fl);
  const auto ppoly = convert_polys(pl);

  std::vector<T> pts(fpts);
  pts.insert(pts.end(), ppts.begin(), ppts.end());
  for (std::size_t i = 0; i < H; ++i) {
    if (w[i] == 0) continue;
    kink[i] = -bias[i] / w[i];
    if (a < kink[i] && kink[i] < b) pts.push_back(kink[i]);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  risk_out = T(0);
  grad.assign(theta.size(), T(0));
  std::size_t kf = 0;
  std::size_t kp = 0;
  std::vector<T> r, rp, moments;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const T& lo = pts[k];
    const T& hi = pts[k + 1];
    while (kf + 1 < fpoly.size() && fpts[kf + 1] <= lo) ++kf;
    while (kp + 1 < ppoly.size() && ppts[kp + 1] <= lo) ++kp;

    T n0 = c;
    T n1 = T(0);
    std::vector<bool> active(H, false);
    for (std::size_t i = 0; i < H; ++i) {
      if (w[i] > 0)
        active[i] = kink[i] <= lo;
      else if (w[i] < 0)
        active[i] = kink[i] >= hi;
      else
        active[i] = bias[i] > 0;
      if (active[i]) {
        n0 += v[i] * bias[i];
        n1 += v[i] * w[i];
      }
    }

    const auto& fq = fpoly[kf];
    const auto& pq = ppoly[kp];
    if (pq.empty()) continue;
    r.assign(std::max<std::size_t>(2, fq.size()), T(0));
    r[0] = n0;
    r[1] = n1;
    for (std::size_t j = 0; j < fq.size(); ++j) r[j] -= fq[j];
    rp.assign(r.size() + pq.size() - 1, T(0));
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < pq.size(); ++j) rp[i + j] += r[i] * pq[j];

    // moments[m] = int_lo^hi x^m dx
    const std::size_t max_pow = r.size() + rp.size();
    moments.assign(max_pow + 1, T(0));
    T hp = hi;
    T lp = lo;
    for (std::size_t m = 0; m <= max_pow; ++m) {
      moments[m] = (hp - lp) / T(static_cast<long>(m + 1));
      hp *= hi;
      lp *= lo;
    }
    T i0 = T(0);
    T i1 = T(0);
    T rr = T(0);
    for (std::size_t m = 0; m < rp.size(); ++m) {
      i0 += rp[m] * moments[m];
      i1 += rp[m] * moments[m + 1];
    }
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i] == 0) continue;
      for (std::size_t m = 0; m < rp.size(); ++m) rr += r[i] * rp[m] * moments[i + m];
    }

    risk_out += rr;
    grad[theta.c_index()] += T(2) * i0;
    for (std::size_t i = 0; i < H; ++i) {
      if (!active[i]) continue;
      grad[theta.w_index(i, 0)] += T(2) * v[i] * i1;
      grad[theta.b_index(i)] += T(2) * v[i] * i0;
      grad[theta.v_index(i)] += T(2) * (bias[i] * i0 + w[i] * i1);
    }
  }
}

std::vector<Hyperplane> neuron_planes(const ParamVector& theta, std::span<const double> shifts) {
  std::vector<Hyperplane> out;
  const auto& s = theta.shape();
  for (std::size_t i = 0; i < s.H; ++i) {
    const auto row = theta.w_row(i);
    if (std::all_of(row.begin(), row.end(), [](double x) { return x == 0.0; })) continue;
    for (double shift : shifts) out.push_back(Hyperplane{std::vector<double>(row.begin(), row.end()), theta.b(i) - shift});
  }
  return out;
}

void check_shape(const Problem& problem, const ParamVector& theta) {
  if (theta.shape() != problem.shape())
    throw std::invalid_argument("parameter vector does not match the problem shape");
}

}  // namespace

GradCheck gradcheck(const Problem& problem, const ParamVector& theta, double h) {
  GradCheck out;
  out.analytic = gradient(problem, theta);
  const std::size_t D = theta.size();
  out.finite_difference.assign(D, 0.0);
  parallel_for(D, [&](std::size_t k) {
    ParamVector plus = theta;
    ParamVector minus = theta;
    plus[k] += h;
    minus[k] -= h;
    const Rational diff = evaluate_exact_1d_rational(problem, plus).risk - evaluate_exact_1d_rational(problem, minus).risk;
    out.finite_difference[k] = Rational(diff / (from_double(plus[k]) - from_double(minus[k]))).get_d();
  });
  for (std::size_t k = 0; k < D; ++k) {
    const double err =
        std::abs(out.finite_difference[k] - out.analytic[k]) / std::max(std::abs(out.analytic[k]), 1e-6);
    if (err > out.max_rel_error || k == 0) {
      out.max_rel_error = err;
      out.worst_component = k;
    }
  }
  return out;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

RiskAndGradient evaluate_exact_1d(const Problem& problem, const ParamVector& theta) {
  RiskAndGradient out;
  exact_1d<double>(problem, theta, out.risk, out.gradient);
  return out;
}

ExactRiskAndGradient evaluate_exact_1d_rational(const Problem& problem, const ParamVector& theta) {
  ExactRiskAndGradient out;
  exact_1d<Rational>(problem, theta, out.risk, out.gradient);
  return out;
}

RiskAndGradient evaluate_quadrature(const Problem& problem, const ParamVector& theta, int gauss_order) {
  check_shape(problem, theta);
  const auto& s = problem.shape();
  const std::size_t D = theta.size();
  std::vector<Hyperplane> planes = problem.data_planes();
  const std::array<double, 1> zero{0.0};
  for (auto& h : neuron_planes(theta, zero)) planes.push_back(std::move(h));

  std::vector<double> z(s.H);
  const auto& target = problem.target();
  const auto& density = problem.density();
  VectorIntegrand integrand = [&](std::span<const double> x, std::span<double> out) {
    double n = theta.c();
    for (std::size_t i = 0; i < s.H; ++i) {
      double zi = theta.b(i);
      for (std::size_t j = 0; j < s.d; ++j) zi += theta.w(i, j) * x[j];
      z[i] = zi;
      n += theta.v(i) * std::max(zi, 0.0);
    }
    const double p = density(x);
    const double rp = (n - target(x)) * p;
    out[0] = (n - target(x)) * rp;
    out[1 + theta.c_index()] = 2.0 * rp;
    for (std::size_t i = 0; i < s.H; ++i) {
      if (z[i] <= 0.0) continue;
      const double g = 2.0 * theta.v(i) * rp;
      for (std::size_t j = 0; j < s.d; ++j) out[1 + theta.w_index(i, j)] = g * x[j];
      out[1 + theta.b_index(i)] = g;
      out[1 + theta.v_index(i)] = 2.0 * z[i] * rp;
    }
  };
  QuadratureOptions opt;
  opt.gauss_order = gauss_order > 0 ? gauss_order : (s.d <= 2 ? 30 : 10);
  const auto vals = integrate_sectioned(s.d, s.a, s.b, planes, D + 1, integrand, opt);
  RiskAndGradient out;
  out.risk = vals[0];
  out.gradient.assign(vals.begin() + 1, vals.end());
  return out;
}

RiskAndGradient evaluate_with(const Problem& problem, const ParamVector& theta, Evaluator evaluator) {
  check_shape(problem, theta);
  switch (evaluator) {
    case Evaluator::Exact1D:
      return evaluate_exact_1d(problem, theta);
    case Evaluator::Elimination:
      return evaluate_by_elimination(problem, theta);
    case Evaluator::Quadrature:
      return evaluate_quadrature(problem, theta);
  }
  throw std::invalid_argument("unknown evaluator");
}

RiskAndGradient evaluate(const Problem& problem, const ParamVector& theta) {
  return evaluate_with(problem, theta, problem.evaluator());
}

double risk(const Problem& problem, const ParamVector& theta) {
  if (problem.evaluator() == Evaluator::Elimination) return risk_by_elimination(problem, theta);
  return evaluate(problem, theta).risk;
}

std::vector<double> gradient(const Problem& problem, const ParamVector& theta) {
  return evaluate(problem, theta).gradient;
}

// ------------------------------------------------------------ smoothing

double SmoothedFamily::value(double r, double x) const {
  if (kind == Kind::QuadraticRamp) {
    if (x <= 0.0) return 0.0;
    if (x <= 1.0 / r) return 0.5 * r * x * x;
    return x - 0.5 / r;
  }
  const double y = r * (x - std::pow(r, -gamma));
  // log(1 + e^y) without overflow
  const double softplus = std::max(y, 0.0) + std::log1p(std::exp(-std::abs(y)));
  return softplus / r;
}

double SmoothedFamily::derivative(double r, double x) const {
  if (kind == Kind::QuadraticRamp) {
    if (x <= 0.0) return 0.0;
    if (x <= 1.0 / r) return r * x;
    return 1.0;
  }
  const double y = r * (x - std::pow(r, -gamma));
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

std::vector<double> SmoothedFamily::transition_offsets(double r) const {
  if (kind == Kind::QuadraticRamp) return {0.0, 1.0 / r};
  return {std::pow(r, -gamma)};
}

std::vector<double> smoothed_gradient(const Problem& problem, const ParamVector& theta, double r,
                                      const SmoothedFamily& family, double tolerance) {
  check_shape(problem, theta);
  if (!(r >= 1.0)) throw std::invalid_argument("smoothed_gradient needs r >= 1");
  const auto& s = problem.shape();
  std::vector<Hyperplane> planes = problem.data_planes();
  for (auto& h : neuron_planes(theta, family.transition_offsets(r))) planes.push_back(std::move(h));

  std::vector<double> z(s.H);
  const auto& target = problem.target();
  const auto& density = problem.density();
  VectorIntegrand integrand = [&](std::span<const double> x, std::span<double> out) {
    double n = theta.c();
    for (std::size_t i = 0; i < s.H; ++i) {
      double zi = theta.b(i);
      for (std::size_t j = 0; j < s.d; ++j) zi += theta.w(i, j) * x[j];
      z[i] = zi;
      n += theta.v(i) * family.value(r, zi);
    }
    const double rp = (n - target(x)) * density(x);
    out[theta.c_index()] = 2.0 * rp;
    for (std::size_t i = 0; i < s.H; ++i) {
      const double g = 2.0 * theta.v(i) * family.derivative(r, z[i]) * rp;
      for (std::size_t j = 0; j < s.d; ++j) out[theta.w_index(i, j)] = g * x[j];
      out[theta.b_index(i)] = g;
      out[theta.v_index(i)] = 2.0 * family.value(r, z[i]) * rp;
    }
  };
  QuadratureOptions opt;
  opt.rule = SegmentRule::AdaptiveGaussKronrod;
  opt.tolerance = tolerance;
  return integrate_sectioned(s.d, s.a, s.b, planes, theta.size(), integrand, opt);
}

// ------------------------------------------------------------- witness

WitnessResult subdiff_witness(const Problem& problem, const ParamVector& theta, std::size_t N) {
  if (N < 2) throw std::invalid_argument("subdiff_witness needs N >= 2");
  const auto base = gradient(problem, theta);
  const auto degenerate = degenerate_set(theta);
  WitnessResult out;
  for (std::size_t n = 1; n <= N; ++n) {
    ParamVector perturbed = theta;
    for (std::size_t i : degenerate) perturbed.b(i) -= 1.0 / static_cast<double>(n);
    if (!degenerate_set(perturbed).empty()) out.perturbed_nondegenerate = false;
    const auto g = gradient(problem, perturbed);
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s += (g[k] - base[k]) * (g[k] - base[k]);
    out.residuals.push_back(std::sqrt(s));
  }
  out.final_residual = out.residuals.back();
  return out;
}

}  // namespace reluflow

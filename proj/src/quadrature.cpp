#include "reluflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace reluflow {

namespace {

template <unsigned N>
GaussRule make_rule() {
  using boost::math::quadrature::gauss;
  const auto& abscissa = gauss<double, N>::abscissa();
  const auto& weights = gauss<double, N>::weights();
  GaussRule rule;
  for (std::size_t k = 0; k < abscissa.size(); ++k) {
    if (abscissa[k] == 0.0) {
      rule.nodes.push_back(0.0);
      rule.weights.push_back(weights[k]);
    } else {
      rule.nodes.push_back(-abscissa[k]);
      rule.weights.push_back(weights[k]);
      rule.nodes.push_back(abscissa[k]);
      rule.weights.push_back(weights[k]);
    }
  }
  return rule;
}

// Kronrod 15-point nodes with the embedded 7-point Gauss weights (zero on
// the Kronrod-only nodes).
struct KronrodRule {
  std::vector<double> nodes;
  std::vector<double> kronrod_weights;
  std::vector<double> gauss_weights;
};

const KronrodRule& kronrod15() {
  static const KronrodRule rule = [] {
    using boost::math::quadrature::gauss;
    using boost::math::quadrature::gauss_kronrod;
    const auto& ka = gauss_kronrod<double, 15>::abscissa();
    const auto& kw = gauss_kronrod<double, 15>::weights();
    const auto& gw = gauss<double, 7>::weights();
    KronrodRule r;
    for (std::size_t k = 0; k < ka.size(); ++k) {
      // Gauss nodes sit at the even Kronrod positions.
      const double g = (k % 2 == 0) ? gw[k / 2] : 0.0;
      if (ka[k] == 0.0) {
        r.nodes.push_back(0.0);
        r.kronrod_weights.push_back(kw[k]);
        r.gauss_weights.push_back(g);
      } else {
        for (double s : {-1.0, 1.0}) {
          r.nodes.push_back(s * ka[k]);
          r.kronrod_weights.push_back(kw[k]);
          r.gauss_weights.push_back(g);
        }
      }
    }
    return r;
  }();
  return rule;
}

// Solves A x = rhs in place (m <= 8); false when numerically singular.
bool solve_small(std::vector<double>& A, std::vector<double>& rhs, std::size_t m) {
  double scale = 0.0;
  for (double v : A) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return false;
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::abs(A[r * m + col]) > std::abs(A[piv * m + col])) piv = r;
    if (std::abs(A[piv * m + col]) <= 1e-12 * scale) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < m; ++c) std::swap(A[col * m + c], A[piv * m + c]);
      std::swap(rhs[col], rhs[piv]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = A[r * m + col] / A[col * m + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < m; ++c) A[r * m + c] -= f * A[col * m + c];
      rhs[r] -= f * rhs[col];
    }
  }
  for (std::size_t r = m; r-- > 0;) {
    double s = rhs[r];
    for (std::size_t c = r + 1; c < m; ++c) s -= A[r * m + c] * rhs[c];
    rhs[r] = s / A[r * m + r];
  }
  return true;
}

struct Context {
  std::size_t d;
  double a;
  double b;
  std::span<const Hyperplane> planes;
  std::size_t components;
  const VectorIntegrand* f;
  QuadratureOptions options;
  std::vector<double> x;
  std::vector<std::vector<double>> scratch;  // per level: kronrod + gauss + eval buffers
};

void integrate_level(Context& ctx, std::size_t level, std::span<double> out);

// Value of the inner integral (or the integrand itself at the last level)
// with x_level already set.
void evaluate_inner(Context& ctx, std::size_t level, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (level + 1 == ctx.d)
    (*ctx.f)(ctx.x, out);
  else
    integrate_level(ctx, level + 1, out);
}

void gauss_segment(Context& ctx, std::size_t level, double lo, double hi, std::span<double> out) {
  const auto& rule = GaussRule::get(ctx.options.gauss_order);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const std::size_t K = ctx.components;
  std::span<double> buf(ctx.scratch[level].data(), K);
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    ctx.x[level] = mid + half * rule.nodes[q];
    evaluate_inner(ctx, level, buf);
    const double w = half * rule.weights[q];
    for (std::size_t k = 0; k < K; ++k) out[k] += w * buf[k];
  }
}

void kronrod_segment(Context& ctx, std::size_t level, double lo, double hi, int depth, std::span<double> out) {
  const auto& rule = kronrod15();
  const std::size_t K = ctx.components;
  auto& sc = ctx.scratch[level];
  std::span<double> buf(sc.data(), K);
  std::span<double> kr(sc.data() + K, K);
  std::span<double> ga(sc.data() + 2 * K, K);
  std::fill(kr.begin(), kr.end(), 0.0);
  std::fill(ga.begin(), ga.end(), 0.0);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    ctx.x[level] = mid + half * rule.nodes[q];
    evaluate_inner(ctx, level, buf);
    for (std::size_t k = 0; k < K; ++k) {
      kr[k] += half * rule.kronrod_weights[q] * buf[k];
      ga[k] += half * rule.gauss_weights[q] * buf[k];
    }
  }
  double err = 0.0;
  double mag = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    err = std::max(err, std::abs(kr[k] - ga[k]));
    mag = std::max(mag, std::abs(kr[k]));
  }
  const std::size_t levels_below = ctx.d - 1 - level;
  const double local_tol = ctx.options.tolerance * (hi - lo) / (ctx.b - ctx.a) * static_cast<double>(1 + levels_below);
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * mag;
  if (err <= std::max(local_tol, noise)) {
    for (std::size_t k = 0; k < K; ++k) out[k] += kr[k];
    return;
  }
  if (depth >= ctx.options.max_depth) throw QuadratureError(lo, hi, level, err);
  kronrod_segment(ctx, level, lo, mid, depth + 1, out);
  kronrod_segment(ctx, level, mid, hi, depth + 1, out);
}

void integrate_level(Context& ctx, std::size_t level, std::span<double> out) {
  const auto pts = section_points(ctx.d, ctx.a, ctx.b, ctx.planes, std::span<const double>(ctx.x.data(), level));
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    if (!(pts[s] < pts[s + 1])) continue;
    if (ctx.options.rule == SegmentRule::Gauss)
      gauss_segment(ctx, level, pts[s], pts[s + 1], out);
    else
      kronrod_segment(ctx, level, pts[s], pts[s + 1], 0, out);
  }
}

}  // namespace

const GaussRule& GaussRule::get(int order) {
  static const std::map<int, GaussRule> rules = {
      {5, make_rule<5>()},   {7, make_rule<7>()},   {10, make_rule<10>()}, {15, make_rule<15>()},
      {20, make_rule<20>()}, {25, make_rule<25>()}, {30, make_rule<30>()},
  };
  const auto it = rules.find(order);
  if (it == rules.end()) throw std::invalid_argument("unsupported Gauss–Legendre order " + std::to_string(order));
  return it->second;
}

QuadratureError::QuadratureError(double lo_in, double hi_in, std::size_t coord, double estimate)
    : std::runtime_error("adaptive quadrature did not converge on cell [" + std::to_string(lo_in) + ", " +
                         std::to_string(hi_in) + "] of coordinate " + std::to_string(coord) +
                         " (error estimate " + std::to_string(estimate) + ")"),
      lo(lo_in),
      hi(hi_in),
      coordinate(coord),
      error_estimate(estimate) {}

std::vector<double> section_points(std::size_t d, double a, double b, std::span<const Hyperplane> planes,
                                   std::span<const double> prefix) {
  const std::size_t level = prefix.size();
  const std::size_t m = d - level;
  const double tol = 1e-12 * (b - a);

  struct Equation {
    std::vector<double> coeffs;  // in x_level..x_{d-1}
    double rhs;
  };
  std::vector<Equation> eqs;
  for (const auto& h : planes) {
    double off = h.offset;
    for (std::size_t j = 0; j < level; ++j) off += h.normal[j] * prefix[j];
    Equation e{std::vector<double>(h.normal.begin() + static_cast<std::ptrdiff_t>(level), h.normal.end()), -off};
    if (std::all_of(e.coeffs.begin(), e.coeffs.end(), [](double v) { return v == 0.0; })) continue;
    eqs.push_back(std::move(e));
  }

  std::vector<double> pts{a, b};
  if (m == 1) {
    for (const auto& e : eqs) {
      const double root = e.rhs / e.coeffs[0];
      if (root > a && root < b) pts.push_back(root);
    }
  } else {
    for (std::size_t j = 1; j < m; ++j) {
      for (double face : {a, b}) {
        Equation e{std::vector<double>(m, 0.0), face};
        e.coeffs[j] = 1.0;
        eqs.push_back(std::move(e));
      }
    }
    const std::size_t n = eqs.size();
    if (n >= m) {
      std::vector<std::size_t> pick(m);
      for (std::size_t i = 0; i < m; ++i) pick[i] = i;
      std::vector<double> A(m * m);
      std::vector<double> rhs(m);
      while (true) {
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < m; ++c) A[r * m + c] = eqs[pick[r]].coeffs[c];
          rhs[r] = eqs[pick[r]].rhs;
        }
        if (solve_small(A, rhs, m)) {
          const bool inside =
              std::all_of(rhs.begin(), rhs.end(), [&](double v) { return v >= a - tol && v <= b + tol; });
          if (inside && rhs[0] > a && rhs[0] < b) pts.push_back(rhs[0]);
        }
        // next combination
        std::size_t i = m;
        while (i > 0 && pick[i - 1] == n - m + i - 1) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t k = i; k < m; ++k) pick[k] = pick[k - 1] + 1;
      }
    }
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double p : pts) {
    if (!out.empty() && p - out.back() <= tol) continue;
    out.push_back(p);
  }
  if (out.back() != b) {
    if (b - out.back() <= tol) out.back() = b;
    else out.push_back(b);
  }
  return out;
}

std::vector<double> integrate_sectioned(std::size_t d, double a, double b, std::span<const Hyperplane> planes,
                                        std::size_t components, const VectorIntegrand& f,
                                        const QuadratureOptions& options) {
  if (d == 0) throw std::invalid_argument("integrate_sectioned needs d >= 1");
  if (!(a < b)) throw std::invalid_argument("integrate_sectioned needs a < b");
  for (const auto& h : planes)
    if (h.normal.size() != d) throw std::invalid_argument("hyperplane dimension mismatch");
  Context ctx{d, a, b, planes, components, &f, options, std::vector<double>(d, 0.0), {}};
  ctx.scratch.assign(d, std::vector<double>(3 * components, 0.0));
  std::vector<double> out(components, 0.0);
  integrate_level(ctx, 0, out);
  return out;
}

}  // namespace reluflow

#include "reluflow/gf_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "reluflow/quadrature.hpp"

namespace reluflow {

namespace {

// Dormand–Prince 5(4).
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

constexpr int kEventSamples = 16;

double dense_value(const DenseSegment& seg, std::size_t k, double s) {
  const double s1 = 1.0 - s;
  const auto& r = seg.coeffs;
  return r[0][k] + s * (r[1][k] + s1 * (r[2][k] + s * (r[3][k] + s1 * r[4][k])));
}

double input_mass_at(const DenseSegment& seg, const NetworkShape& shape, std::size_t i, double s) {
  const std::size_t d = shape.d;
  double m = std::abs(dense_value(seg, shape.H * d + i, s));
  for (std::size_t j = 0; j < d; ++j) m += std::abs(dense_value(seg, i * d + j, s));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

class Integrator {
 public:
  Integrator(const Problem& problem, const SolverConfig& cfg, Trajectory& traj)
      : problem_(problem), cfg_(cfg), traj_(traj), shape_(problem.shape()), n_(shape_.param_count()) {}

  void run(const ParamVector& theta0);

 private:
  struct Eval {
    double loss;
    std::vector<double> deriv;  // -field
    double gnorm;
  };

  Eval eval(const std::vector<double>& y) const {
    ParamVector p(shape_, y);
    auto rg = frozen_evaluate(problem_, p, frozen_);
    Eval e{rg.risk, std::move(rg.gradient), 0.0};
    e.gnorm = norm2(e.deriv);
    for (double& g : e.deriv) g = -g;
    return e;
  }

  void push_sample(double t, const std::vector<double>& y, const Eval& e) {
    ParamVector p(shape_, y);
    traj_.samples.push_back(Sample{t, y, e.loss, e.gnorm, degenerate_set(p)});
  }

  double error_scale(std::size_t k, const std::vector<double>& y0, const std::vector<double>& y1) const {
    return cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y0[k]), std::abs(y1[k]));
  }

  double initial_step(double t, const std::vector<double>& y0, const std::vector<double>& f0) const;

  // Earliest s in (0, 1] at which some live neuron reaches the threshold.
  bool find_event(const DenseSegment& seg, double& s_event) const;

  bool freeze(std::vector<double>& y, double t);

  const Problem& problem_;
  const SolverConfig& cfg_;
  Trajectory& traj_;
  NetworkShape shape_;
  std::size_t n_;
  std::vector<std::size_t> frozen_;
};

double Integrator::initial_step(double t, const std::vector<double>& y0, const std::vector<double>& f0) const {
  double dn0 = 0.0;
  double dn1 = 0.0;
  for (std::size_t k = 0; k < n_; ++k) {
    const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(y0[k]);
    dn0 += (y0[k] / sk) * (y0[k] / sk);
    dn1 += (f0[k] / sk) * (f0[k] / sk);
  }
  dn0 = std::sqrt(dn0 / static_cast<double>(n_));
  dn1 = std::sqrt(dn1 / static_cast<double>(n_));
  double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
  h0 = std::min(h0, cfg_.t_max - t);
  std::vector<double> y1(n_);
  for (std::size_t k = 0; k < n_; ++k) y1[k] = y0[k] + h0 * f0[k];
  const Eval e1v = eval(y1);
  double dn2 = 0.0;
  for (std::size_t k = 0; k < n_; ++k) {
    const double sk = cfg_.abs_tol + cfg_.rel_tol * std::abs(y0[k]);
    const double q = (e1v.deriv[k] - f0[k]) / sk;
    dn2 += q * q;
  }
  dn2 = std::sqrt(dn2 / static_cast<double>(n_)) / h0;
  const double m = std::max(dn1, dn2);
  const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 1.0 / 5.0);
  double h = std::min(100.0 * h0, h1);
  if (!std::isfinite(h) || h <= 0.0) h = 1e-6;
  return std::min(h, cfg_.t_max - t);
}

bool Integrator::find_event(const DenseSegment& seg, double& s_event) const {
  const double eps = cfg_.eps_deg;
  bool found = false;
  s_event = 2.0;
  auto first_crossing = [&](std::size_t i, double lo, double hi) {
    // mass(lo) > eps >= mass(hi)
    for (int it = 0; it < 200 && (hi - lo) * seg.h > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (input_mass_at(seg, shape_, i, mid) <= eps)
        hi = mid;
      else
        lo = mid;
    }
    return hi;
  };
  for (std::size_t i = 0; i < shape_.H; ++i) {
    if (std::binary_search(frozen_.begin(), frozen_.end(), i)) continue;
    std::array<double, kEventSamples + 1> m{};
    std::size_t hit = 0;
    for (int k = 0; k <= kEventSamples; ++k) {
      m[k] = input_mass_at(seg, shape_, i, static_cast<double>(k) / kEventSamples);
      if (k > 0 && m[k] <= eps) {
        hit = static_cast<std::size_t>(k);
        break;
      }
    }
    double s_i = 2.0;
    if (hit > 0) {
      s_i = first_crossing(i, static_cast<double>(hit - 1) / kEventSamples, static_cast<double>(hit) / kEventSamples);
    } else {
      const auto kmin = static_cast<std::size_t>(std::min_element(m.begin() + 1, m.end()) - m.begin());
      double lo = static_cast<double>(kmin - 1) / kEventSamples;
      double hi = std::min(1.0, static_cast<double>(kmin + 1) / kEventSamples);
      const double left = lo;
      // golden-section search for the minimum of the input mass
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = hi - g * (hi - lo);
      double x2 = lo + g * (hi - lo);
      double f1 = input_mass_at(seg, shape_, i, x1);
      double f2 = input_mass_at(seg, shape_, i, x2);
      for (int it = 0; it < 200 && (hi - lo) > 1e-15; ++it) {
        if (f1 <= eps || f2 <= eps) break;
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - g * (hi - lo);
          f1 = input_mass_at(seg, shape_, i, x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + g * (hi - lo);
          f2 = input_mass_at(seg, shape_, i, x2);
        }
      }
      double s_min = -1.0;
      if (f1 <= eps)
        s_min = x1;
      else if (f2 <= eps)
        s_min = x2;
      if (s_min > 0.0) s_i = first_crossing(i, left, s_min);
    }
    if (s_i <= 1.0) {
      found = true;
      s_event = std::min(s_event, s_i);
    }
  }
  return found;
}

bool Integrator::freeze(std::vector<double>& y, double t) {
  bool any = false;
  ParamVector p(shape_, y);
  for (std::size_t i = 0; i < shape_.H; ++i) {
    if (std::binary_search(frozen_.begin(), frozen_.end(), i)) continue;
    if (p.input_mass(i) > cfg_.eps_deg) continue;
    for (std::size_t j = 0; j < shape_.d; ++j) p.w(i, j) = 0.0;
    p.b(i) = 0.0;
    frozen_.insert(std::upper_bound(frozen_.begin(), frozen_.end(), i), i);
    traj_.events.push_back(DegenerationEvent{t, i});
    any = true;
  }
  y = p.vec();
  return any;
}

void Integrator::run(const ParamVector& theta0) {
  std::vector<double> y = theta0.vec();
  if (!all_finite(y)) throw std::invalid_argument("initial parameters must be finite");
  frozen_ = degenerate_set(theta0);
  double t = 0.0;
  freeze(y, t);

  Eval cur = eval(y);
  if (cur.gnorm == 0.0) {
    traj_.stop = StopReason::Stationary;
    for (int k = 0; k <= 10; ++k) push_sample(cfg_.t_max * k / 10.0, y, cur);
    return;
  }
  push_sample(t, y, cur);
  if (cur.gnorm <= cfg_.g_tol) {
    traj_.stop = StopReason::GradientTolerance;
    return;
  }

  double h = initial_step(t, y, cur.deriv);
  bool last_rejected = false;
  std::vector<std::vector<double>> k(7, std::vector<double>(n_));
  std::vector<double> ys(n_);
  std::vector<double> y1(n_);
  while (true) {
    if (traj_.accepted_steps >= cfg_.max_steps) {
      traj_.stop = StopReason::MaxSteps;
      return;
    }
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      traj_.stop = last_rejected && !all_finite(y1) ? StopReason::NonFinite : StopReason::StepUnderflow;
      return;
    }
    const bool final_step = t + h >= cfg_.t_max;
    if (final_step) h = cfg_.t_max - t;

    k[0] = cur.deriv;
    auto stage = [&](std::initializer_list<double> coef, std::size_t out) {
      for (std::size_t m = 0; m < n_; ++m) {
        double s = 0.0;
        std::size_t q = 0;
        for (double a : coef) s += a * k[q++][m];
        ys[m] = y[m] + h * s;
      }
      k[out] = eval(ys).deriv;
    };
    stage({a21}, 1);
    stage({a31, a32}, 2);
    stage({a41, a42, a43}, 3);
    stage({a51, a52, a53, a54}, 4);
    stage({a61, a62, a63, a64, a65}, 5);
    for (std::size_t m = 0; m < n_; ++m)
      y1[m] = y[m] + h * (a71 * k[0][m] + a73 * k[2][m] + a74 * k[3][m] + a75 * k[4][m] + a76 * k[5][m]);
    Eval next = eval(y1);
    k[6] = next.deriv;

    double err = 0.0;
    for (std::size_t m = 0; m < n_; ++m) {
      const double e = h * (e1 * k[0][m] + e3 * k[2][m] + e4 * k[3][m] + e5 * k[4][m] + e6 * k[5][m] + e7 * k[6][m]);
      const double q = e / error_scale(m, y, y1);
      err += q * q;
    }
    err = std::sqrt(err / static_cast<double>(n_));
    if (!std::isfinite(err) || !all_finite(y1)) {
      h *= 0.2;
      last_rejected = true;
      ++traj_.rejected_steps;
      continue;
    }
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
      ++traj_.rejected_steps;
      continue;
    }

    DenseSegment seg;
    seg.t0 = t;
    seg.h = h;
    seg.t1 = final_step ? cfg_.t_max : t + h;
    seg.frozen = frozen_;
    for (auto& c : seg.coeffs) c.resize(n_);
    for (std::size_t m = 0; m < n_; ++m) {
      const double diff = y1[m] - y[m];
      const double bspl = h * k[0][m] - diff;
      seg.coeffs[0][m] = y[m];
      seg.coeffs[1][m] = diff;
      seg.coeffs[2][m] = bspl;
      seg.coeffs[3][m] = diff - h * k[6][m] - bspl;
      seg.coeffs[4][m] = h * (d1 * k[0][m] + d3 * k[2][m] + d4 * k[3][m] + d5 * k[4][m] + d6 * k[5][m] +
                              d7 * k[6][m]);
    }
    ++traj_.accepted_steps;

    double s_event = 0.0;
    if (find_event(seg, s_event)) {
      const double te = s_event >= 1.0 ? seg.t1 : t + s_event * h;
      std::vector<double> ye(n_);
      for (std::size_t m = 0; m < n_; ++m) ye[m] = s_event >= 1.0 ? y1[m] : dense_value(seg, m, s_event);
      seg.t1 = te;
      traj_.segments.push_back(std::move(seg));
      freeze(ye, te);
      y = ye;
      t = te;
      cur = eval(y);
      push_sample(t, y, cur);
      if (t >= cfg_.t_max) {
        traj_.stop = StopReason::TMax;
        return;
      }
      if (cur.gnorm <= cfg_.g_tol) {
        traj_.stop = StopReason::GradientTolerance;
        return;
      }
      h = initial_step(t, y, cur.deriv);
      last_rejected = false;
      continue;
    }

    traj_.segments.push_back(std::move(seg));
    t = final_step ? cfg_.t_max : t + h;
    y = y1;
    cur = std::move(next);
    push_sample(t, y, cur);
    if (final_step) {
      traj_.stop = StopReason::TMax;
      return;
    }
    if (cur.gnorm <= cfg_.g_tol) {
      traj_.stop = StopReason::GradientTolerance;
      return;
    }
    double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
    h *= fac;
    last_rejected = false;
  }
}

}  // namespace

void SolverConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("solver.") + name + " must be positive");
  };
  positive(t_max, "t_max");
  positive(rel_tol, "rel_tol");
  positive(abs_tol, "abs_tol");
  positive(eps_deg, "eps_deg");
  positive(g_tol, "g_tol");
  if (max_steps == 0) throw std::invalid_argument("solver.max_steps must be positive");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::TMax:
      return "t_max";
    case StopReason::GradientTolerance:
      return "g_tol";
    case StopReason::Stationary:
      return "stationary";
    case StopReason::MaxSteps:
      return "max_steps";
    case StopReason::StepUnderflow:
      return "step_underflow";
    case StopReason::NonFinite:
      return "non_finite";
  }
  return "unknown";
}

std::vector<double> DenseSegment::at(double t) const {
  const double s = h > 0.0 ? (t - t0) / h : 0.0;
  std::vector<double> out(coeffs[0].size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = dense_value(*this, k, s);
  return out;
}

ParamVector Trajectory::state_at(double t) const {
  if (segments.empty() || t <= segments.front().t0) {
    const auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                     [](const Sample& s, double x) { return s.t < x; });
    if (it == samples.end()) return ParamVector(shape, samples.back().theta);
    return ParamVector(shape, it->theta);
  }
  if (t >= segments.back().t1) return ParamVector(shape, samples.back().theta);
  auto it = std::lower_bound(segments.begin(), segments.end(), t,
                             [](const DenseSegment& s, double x) { return s.t1 < x; });
  // at a segment end that closed with an event the projected sample wins
  const std::size_t idx = static_cast<std::size_t>(it - segments.begin());
  if (t == it->t1) return ParamVector(shape, samples[idx + 1].theta);
  return ParamVector(shape, it->at(t));
}

std::vector<std::size_t> Trajectory::frozen_at(double t) const {
  if (segments.empty()) return samples.front().degenerate;
  auto it = std::lower_bound(segments.begin(), segments.end(), t,
                             [](const DenseSegment& s, double x) { return s.t1 < x; });
  if (it == segments.end()) return samples.back().degenerate;
  return it->frozen;
}

RiskAndGradient frozen_evaluate(const Problem& problem, const ParamVector& theta,
                                std::span<const std::size_t> frozen) {
  RiskAndGradient rg = evaluate(problem, theta);
  for (std::size_t i : frozen) {
    for (std::size_t j = 0; j < theta.shape().d; ++j) rg.gradient[theta.w_index(i, j)] = 0.0;
    rg.gradient[theta.b_index(i)] = 0.0;
  }
  return rg;
}

std::vector<double> frozen_field(const Problem& problem, const ParamVector& theta,
                                 std::span<const std::size_t> frozen) {
  return frozen_evaluate(problem, theta, frozen).gradient;
}

Trajectory solve(const Problem& problem, const ParamVector& theta0, const SolverConfig& config) {
  config.validate();
  if (theta0.shape() != problem.shape()) throw std::invalid_argument("initial parameters do not match the problem shape");
  Trajectory traj;
  traj.shape = problem.shape();
  traj.config = config;
  Integrator(problem, traj.config, traj).run(theta0);
  return traj;
}

double energy_residual(const Problem& problem, const Trajectory& traj) {
  if (traj.samples.empty()) throw std::invalid_argument("energy_residual needs a nonempty trajectory");
  const auto& rule = GaussRule::get(7);
  double integral = 0.0;
  for (const auto& seg : traj.segments) {
    const double mid = 0.5 * (seg.t0 + seg.t1);
    const double half = 0.5 * (seg.t1 - seg.t0);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const ParamVector p(traj.shape, seg.at(mid + half * rule.nodes[q]));
      const double g = norm2(frozen_field(problem, p, seg.frozen));
      integral += half * rule.weights[q] * g * g;
    }
  }
  return std::abs(traj.samples.front().loss - traj.samples.back().loss - integral);
}

TrajectoryAudit audit(const Problem& problem, const Trajectory& traj) {
  TrajectoryAudit out;
  const auto& S = traj.samples;
  const double slack = 1e-10 * (1.0 + S.front().loss);
  auto fail = [&](bool& flag, const std::string& what) {
    if (flag) out.violations.push_back(what);
    flag = false;
  };
  for (std::size_t k = 0; k < S.size(); ++k) {
    for (double x : S[k].theta)
      if (!std::isfinite(x)) fail(out.finite, "non-finite state at t=" + std::to_string(S[k].t));
    if (k == 0) continue;
    if (!(S[k].t > S[k - 1].t)) fail(out.time_increasing, "sample times not increasing at index " + std::to_string(k));
    if (S[k].loss > S[k - 1].loss + slack) fail(out.loss_nonincreasing, "risk increased at t=" + std::to_string(S[k].t));
    if (!std::includes(S[k].degenerate.begin(), S[k].degenerate.end(), S[k - 1].degenerate.begin(),
                       S[k - 1].degenerate.end()))
      fail(out.degeneracy_monotone, "degenerate set shrank at t=" + std::to_string(S[k].t));
  }
  for (const auto& e : traj.events)
    for (const auto& s : S)
      if (s.t >= e.t && !std::binary_search(s.degenerate.begin(), s.degenerate.end(), e.neuron))
        fail(out.events_frozen, "neuron " + std::to_string(e.neuron + 1) + " not frozen after its event");
  out.energy_residual = out.finite ? energy_residual(problem, traj) : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace reluflow

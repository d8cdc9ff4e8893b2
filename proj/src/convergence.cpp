#include "reluflow/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "reluflow/parallel.hpp"
#include "reluflow/quadrature.hpp"
#include "reluflow/risk.hpp"

namespace reluflow {

namespace {

std::string format_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s);
}

double inflation(double dense, double sampled) {
  if (dense <= sampled) return 0.0;
  if (sampled == 0.0) return std::numeric_limits<double>::infinity();
  return dense / sampled - 1.0;
}

// Least-squares slope of y against x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

LimitDetection detect_limit(const Problem& problem, const Trajectory& traj) {
  (void)problem;
  LimitDetection out;
  if (traj.samples.empty()) {
    out.reason = "empty trajectory";
    return out;
  }
  const Sample& last = traj.final_sample();
  out.limit = ParamVector(traj.shape, last.theta);
  out.gnorm = last.gnorm;
  const double t_half = 0.5 * last.t;
  for (const auto& s : traj.samples)
    if (s.t >= t_half) out.diameter = std::max(out.diameter, distance(s.theta, last.theta));
  if (traj.samples.size() < 10) {
    out.reason = "fewer than 10 samples";
    return out;
  }
  if (!(out.gnorm <= 10.0 * traj.config.g_tol)) {
    out.reason = "gradient norm " + format_g(out.gnorm) + " above 10 * g_tol";
    return out;
  }
  if (!(out.diameter <= 1e-4 * (1.0 + norm2(last.theta)))) {
    out.reason = "trajectory still moving over the second half";
    return out;
  }
  out.converged = true;
  return out;
}

RateCertificate fit_rates(const Problem& problem, const Trajectory& traj, const ParamVector& limit,
                          double window_fraction) {
  if (traj.samples.empty()) throw std::invalid_argument("fit_rates needs a nonempty trajectory");
  RateCertificate cert;
  cert.limit = limit;
  const auto at_limit = evaluate(problem, limit);
  cert.loss_at_limit = at_limit.risk;
  cert.gnorm_at_limit = norm2(at_limit.gradient);
  for (const auto& s : traj.samples) cert.C_loss = std::max(cert.C_loss, std::abs(s.loss - cert.loss_at_limit) * (1.0 + s.t));

  const double t_end = traj.t_end();
  cert.window_lo = t_end * window_fraction;
  cert.window_hi = t_end;
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& s : traj.samples) {
    if (s.t < cert.window_lo || s.t > cert.window_hi) continue;
    const double dist = distance(s.theta, limit.values());
    if (dist < 1e-13) continue;
    lx.push_back(std::log1p(s.t));
    ly.push_back(std::log(dist));
  }
  cert.window_samples = lx.size();
  if (lx.size() < 2) {
    cert.degenerate = true;
    cert.beta_hat = std::numeric_limits<double>::infinity();
    for (const auto& s : traj.samples) cert.C_param = std::max(cert.C_param, distance(s.theta, limit.values()));
  } else {
    cert.beta_hat = -slope(lx, ly);
    for (const auto& s : traj.samples)
      cert.C_param =
          std::max(cert.C_param, distance(s.theta, limit.values()) * std::pow(1.0 + s.t, cert.beta_hat));
  }
  cert.passed = std::isfinite(cert.C_loss) && std::isfinite(cert.C_param) && cert.beta_hat > 0.0;
  return cert;
}

DenseRecheck recheck_dense(const Problem& problem, const Trajectory& traj, const RateCertificate& cert,
                           std::size_t refine) {
  DenseRecheck out;
  std::vector<double> grid;
  for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
    const double t0 = traj.samples[k].t;
    const double t1 = traj.samples[k + 1].t;
    for (std::size_t j = 0; j < refine; ++j) grid.push_back(t0 + (t1 - t0) * static_cast<double>(j) / static_cast<double>(refine));
  }
  grid.push_back(traj.t_end());
  std::vector<double> c_loss(grid.size());
  std::vector<double> c_param(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) {
    const double t = grid[k];
    const ParamVector theta = traj.state_at(t);
    c_loss[k] = std::abs(risk(problem, theta) - cert.loss_at_limit) * (1.0 + t);
    const double dist = distance(theta.values(), cert.limit.values());
    c_param[k] = cert.degenerate ? dist : dist * std::pow(1.0 + t, cert.beta_hat);
  });
  out.points = grid.size();
  out.C_loss = *std::max_element(c_loss.begin(), c_loss.end());
  out.C_param = *std::max_element(c_param.begin(), c_param.end());
  out.loss_inflation = inflation(out.C_loss, cert.C_loss);
  out.param_inflation = inflation(out.C_param, cert.C_param);
  return out;
}

std::vector<double> probe_point(const ParamVector& center, double epsilon, std::uint64_t seed, std::size_t index) {
  const auto idx = static_cast<std::uint64_t>(index);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  const std::size_t D = center.size();
  std::vector<double> dir(D);
  double nrm = 0.0;
  do {
    for (double& g : dir) g = normal(rng);
    nrm = norm2(dir);
  } while (nrm == 0.0);
  const double radius = epsilon * std::pow(uniform(rng), 1.0 / static_cast<double>(D));
  std::vector<double> out(D);
  for (std::size_t k = 0; k < D; ++k) out[k] = center[k] + radius * dir[k] / nrm;
  return out;
}

LojaEstimate loja_probe(const Problem& problem, const ParamVector& limit, double epsilon, std::size_t n,
                        std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("loja_probe needs epsilon > 0");
  if (n < 100) throw std::invalid_argument("loja_probe needs at least 100 samples");
  LojaEstimate est;
  est.epsilon = epsilon;
  est.n_samples = n;
  est.seed = seed;
  const double l_star = risk(problem, limit);

  std::vector<std::vector<double>> thetas(n);
  std::vector<double> dloss(n);
  std::vector<double> gnorm(n);
  parallel_for(n, [&](std::size_t k) {
    thetas[k] = probe_point(limit, epsilon, seed, k);
    const auto rg = evaluate(problem, ParamVector(limit.shape(), thetas[k]));
    dloss[k] = std::abs(rg.risk - l_star);
    gnorm[k] = norm2(rg.gradient);
  });

  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < n; ++k)
    if (dloss[k] > 1e-15) kept.push_back(k);
  if (kept.empty()) throw std::runtime_error("locally constant risk neighborhood");
  est.kept = kept.size();

  double gmin = std::numeric_limits<double>::infinity();
  double gmax = 0.0;
  for (std::size_t k : kept) {
    gmin = std::min(gmin, gnorm[k]);
    gmax = std::max(gmax, gnorm[k]);
  }
  est.gradient_bounded_below = gmin > 0.0 && gmin >= 0.5 * gmax;
  if (est.gradient_bounded_below) {
    est.alpha_hat = 1.0;
  } else {
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t k : kept) {
      if (gnorm[k] == 0.0) continue;
      lx.push_back(std::log(dloss[k]));
      ly.push_back(std::log(gnorm[k]));
    }
    const double s = lx.size() >= 2 ? slope(lx, ly) : 1.0;
    est.alpha_hat = std::clamp(s, 1e-3, 1.0);
  }

  est.c_hat = -1.0;
  std::size_t worst = kept.front();
  for (std::size_t k : kept) {
    if (gnorm[k] == 0.0) est.violation = true;
    const double ratio = gnorm[k] == 0.0 ? std::numeric_limits<double>::infinity()
                                         : std::pow(dloss[k], est.alpha_hat) / gnorm[k];
    if (ratio > est.c_hat) {
      est.c_hat = ratio;
      worst = k;
    }
  }
  est.worst_theta = thetas[worst];
  est.worst_dloss = dloss[worst];
  est.worst_gnorm = gnorm[worst];
  return est;
}

std::vector<double> tail_lengths(const Problem& problem, const Trajectory& traj) {
  std::vector<double> out(traj.samples.size(), 0.0);
  if (traj.segments.empty()) return out;
  const auto& rule = GaussRule::get(7);
  std::vector<double> piece(traj.segments.size(), 0.0);
  parallel_for(traj.segments.size(), [&](std::size_t s) {
    const auto& seg = traj.segments[s];
    const double mid = 0.5 * (seg.t0 + seg.t1);
    const double half = 0.5 * (seg.t1 - seg.t0);
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const ParamVector p(traj.shape, seg.at(mid + half * rule.nodes[q]));
      sum += half * rule.weights[q] * norm2(frozen_field(problem, p, seg.frozen));
    }
    piece[s] = sum;
  });
  // segment s ends at sample s + 1
  for (std::size_t s = traj.segments.size(); s-- > 0;) out[s] = out[s + 1] + piece[s];
  return out;
}

}  // namespace reluflow

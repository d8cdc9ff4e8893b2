#include "reluflow/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace reluflow {

NetworkShape::NetworkShape(std::size_t d_in, std::size_t width, double lo, double hi)
    : d(d_in), H(width), a(lo), b(hi) {
  if (d == 0 || H == 0) throw std::invalid_argument("network shape needs d >= 1 and H >= 1");
  if (!(a < b)) throw std::invalid_argument("domain needs a < b");
}

ParamVector::ParamVector(NetworkShape shape) : shape_(shape), theta_(shape.param_count(), 0.0) {}

ParamVector::ParamVector(NetworkShape shape, std::vector<double> theta)
    : shape_(shape), theta_(std::move(theta)) {
  if (theta_.size() != shape_.param_count())
    throw std::invalid_argument("parameter vector has " + std::to_string(theta_.size()) +
                                " entries, shape needs " + std::to_string(shape_.param_count()));
}

double ParamVector::input_mass(std::size_t i) const {
  double mass = std::abs(b(i));
  for (double wij : w_row(i)) mass += std::abs(wij);
  return mass;
}

double realize(const ParamVector& theta, std::span<const double> x) {
  const auto& s = theta.shape();
  double out = theta.c();
  for (std::size_t i = 0; i < s.H; ++i) {
    double z = theta.b(i);
    for (std::size_t j = 0; j < s.d; ++j) z += theta.w(i, j) * x[j];
    out += theta.v(i) * std::max(z, 0.0);
  }
  return out;
}

std::vector<std::size_t> degenerate_set(const ParamVector& theta) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < theta.shape().H; ++i)
    if (theta.input_mass(i) == 0.0) out.push_back(i);
  return out;
}

ActiveRegion1D active_region_1d(const ParamVector& theta, std::size_t i) {
  const auto& s = theta.shape();
  if (s.d != 1) throw std::invalid_argument("active_region_1d needs d = 1");
  if (i >= s.H) throw std::out_of_range("neuron index out of range");
  const double w = theta.w(i, 0);
  const double bias = theta.b(i);
  ActiveRegion1D r;
  if (w == 0.0) {
    if (bias > 0.0) r = {s.a, s.b, false};
    return r;
  }
  const double root = -bias / w;
  double lo = s.a;
  double hi = s.b;
  if (w > 0.0)
    lo = std::max(lo, root);
  else
    hi = std::min(hi, root);
  if (lo < hi) r = {lo, hi, false};
  return r;
}

ActiveHalfspace active_halfspace(const ParamVector& theta, std::size_t i) {
  if (i >= theta.shape().H) throw std::out_of_range("neuron index out of range");
  ActiveHalfspace h;
  h.normal.assign(theta.w_row(i).begin(), theta.w_row(i).end());
  h.offset = theta.b(i);
  h.empty = theta.input_mass(i) == 0.0;
  return h;
}

double symmetric_difference_length(const ActiveRegion1D& lhs, const ActiveRegion1D& rhs) {
  const double overlap =
      (lhs.empty || rhs.empty) ? 0.0 : std::max(0.0, std::min(lhs.hi, rhs.hi) - std::max(lhs.lo, rhs.lo));
  return lhs.length() + rhs.length() - 2.0 * overlap;
}

}  // namespace reluflow

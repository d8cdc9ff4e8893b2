#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace reluflow {

/// Architecture of a one-hidden-layer ReLU network on the cube [a, b]^d.
///
/// The parameter count is d*H + 2H + 1: input weights, biases, output
/// weights and the output bias, in that order.
struct NetworkShape {
  std::size_t d = 1;
  std::size_t H = 1;
  double a = 0.0;
  double b = 1.0;

  NetworkShape() = default;
  NetworkShape(std::size_t d_in, std::size_t width, double lo, double hi);

  [[nodiscard]] std::size_t param_count() const { return d * H + 2 * H + 1; }
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Flat parameter vector theta with named views.
///
/// Storage is 0-based: w(i, j) sits at i*d + j, b(i) at H*d + i, v(i) at
/// H*(d+1) + i and c at the last slot. The `*_index1` helpers return the
/// 1-based positions used when parameters are printed as theta_1..theta_D,
/// so theta_k in a CSV header is `at(k - 1)`.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(NetworkShape shape);
  ParamVector(NetworkShape shape, std::vector<double> theta);

  [[nodiscard]] const NetworkShape& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return theta_.size(); }
  [[nodiscard]] std::span<const double> values() const { return theta_; }
  [[nodiscard]] std::span<double> values() { return theta_; }
  [[nodiscard]] const std::vector<double>& vec() const { return theta_; }

  double& operator[](std::size_t k) { return theta_[k]; }
  double operator[](std::size_t k) const { return theta_[k]; }

  [[nodiscard]] std::size_t w_index(std::size_t i, std::size_t j) const { return i * shape_.d + j; }
  [[nodiscard]] std::size_t b_index(std::size_t i) const { return shape_.H * shape_.d + i; }
  [[nodiscard]] std::size_t v_index(std::size_t i) const { return shape_.H * (shape_.d + 1) + i; }
  [[nodiscard]] std::size_t c_index() const { return theta_.size() - 1; }

  // 1-based neuron/coordinate indices, 1-based result.
  [[nodiscard]] std::size_t w_index1(std::size_t i, std::size_t j) const { return (i - 1) * shape_.d + j; }
  [[nodiscard]] std::size_t b_index1(std::size_t i) const { return shape_.H * shape_.d + i; }
  [[nodiscard]] std::size_t v_index1(std::size_t i) const { return shape_.H * (shape_.d + 1) + i; }
  [[nodiscard]] std::size_t c_index1() const { return theta_.size(); }

  [[nodiscard]] double w(std::size_t i, std::size_t j) const { return theta_[w_index(i, j)]; }
  [[nodiscard]] double b(std::size_t i) const { return theta_[b_index(i)]; }
  [[nodiscard]] double v(std::size_t i) const { return theta_[v_index(i)]; }
  [[nodiscard]] double c() const { return theta_.back(); }
  double& w(std::size_t i, std::size_t j) { return theta_[w_index(i, j)]; }
  double& b(std::size_t i) { return theta_[b_index(i)]; }
  double& v(std::size_t i) { return theta_[v_index(i)]; }
  double& c() { return theta_.back(); }

  [[nodiscard]] std::span<const double> w_row(std::size_t i) const {
    return std::span<const double>(theta_).subspan(i * shape_.d, shape_.d);
  }

  // |b_i| + sum_j |w_ij|; zero exactly on degenerate neurons.
  [[nodiscard]] double input_mass(std::size_t i) const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  NetworkShape shape_;
  std::vector<double> theta_;
};

/// c + sum_i v_i max(b_i + <w_i, x>, 0), summed in index order.
double realize(const ParamVector& theta, std::span<const double> x);

/// 0-based indices i with |b_i| + sum_j |w_ij| == 0, compared exactly.
std::vector<std::size_t> degenerate_set(const ParamVector& theta);

/// {x in [a, b] : w x + b_i > 0} for d = 1. Stored as a closed interval;
/// the open/closed status of the endpoints has measure zero and is ignored.
struct ActiveRegion1D {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = true;

  [[nodiscard]] double length() const { return empty ? 0.0 : hi - lo; }
};

/// Half-space {x : <normal, x> + offset > 0} of one neuron, for d >= 2.
struct ActiveHalfspace {
  std::vector<double> normal;
  double offset = 0.0;
  bool empty = false;  // set for degenerate neurons
};

ActiveRegion1D active_region_1d(const ParamVector& theta, std::size_t i);
ActiveHalfspace active_halfspace(const ParamVector& theta, std::size_t i);

/// Lebesgue measure of the symmetric difference of two intervals.
double symmetric_difference_length(const ActiveRegion1D& lhs, const ActiveRegion1D& rhs);

}  // namespace reluflow

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "reluflow/problem.hpp"

namespace reluflow {

/// Gauss–Legendre nodes and weights on [-1, 1]. Supported orders: 5, 7, 10,
/// 15, 20, 25, 30.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  static const GaussRule& get(int order);
};

enum class SegmentRule { Gauss, AdaptiveGaussKronrod };

struct QuadratureOptions {
  SegmentRule rule = SegmentRule::Gauss;
  int gauss_order = 30;
  double tolerance = 1e-10;  // adaptive rule, absolute on the max-norm
  int max_depth = 48;
};

/// Thrown when the adaptive rule cannot meet its tolerance on some cell.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(double lo, double hi, std::size_t coordinate, double estimate);
  double lo;
  double hi;
  std::size_t coordinate;
  double error_estimate;
};

/// Vector-valued integrand: writes `out.size()` components at x.
using VectorIntegrand = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Integrates over [a, b]^d by iterated one-dimensional rules. Each
/// coordinate range is split at the projections of every vertex of the
/// hyperplane arrangement (clipped to the box), so on every segment the
/// inner integral is smooth whenever the integrand is polynomial between
/// the hyperplanes.
std::vector<double> integrate_sectioned(std::size_t d, double a, double b, std::span<const Hyperplane> planes,
                                        std::size_t components, const VectorIntegrand& f,
                                        const QuadratureOptions& options = {});

/// Sorted split points for coordinate `level` given fixed x_0..x_{level-1}.
std::vector<double> section_points(std::size_t d, double a, double b, std::span<const Hyperplane> planes,
                                   std::span<const double> prefix);

}  // namespace reluflow

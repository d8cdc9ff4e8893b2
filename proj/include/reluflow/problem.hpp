#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "reluflow/network.hpp"
#include "reluflow/piecewise.hpp"

namespace reluflow {

enum class Evaluator { Exact1D, Elimination, Quadrature };

std::string_view to_string(Evaluator e);
Evaluator parse_evaluator(std::string_view name);  // "exact-1d" | "elimination" | "quadrature"

/// A hyperplane {x : <normal, x> + offset = 0} in binary64.
struct Hyperplane {
  std::vector<double> normal;
  double offset = 0.0;
};

/// Regression problem: target f and unnormalized input density p on
/// [a, b]^d, plus the evaluator used for the risk and its gradient.
/// Immutable once constructed.
class Problem {
 public:
  Problem(NetworkShape shape, PiecewisePoly target, PiecewisePoly density, Evaluator evaluator);

  [[nodiscard]] const NetworkShape& shape() const { return shape_; }
  [[nodiscard]] const PiecewisePoly& target() const { return target_; }
  [[nodiscard]] const PiecewisePoly& density() const { return density_; }
  [[nodiscard]] Evaluator evaluator() const { return evaluator_; }
  [[nodiscard]] Problem with_evaluator(Evaluator e) const;

  [[nodiscard]] const Rational& a_exact() const { return a_exact_; }
  [[nodiscard]] const Rational& b_exact() const { return b_exact_; }

  // d = 1 only.
  [[nodiscard]] const Breakline1D& target_line() const;
  [[nodiscard]] const Breakline1D& density_line() const;

  // Constraint hyperplanes of f and p (non-trivial normals only).
  [[nodiscard]] const std::vector<Hyperplane>& data_planes() const { return data_planes_; }

 private:
  NetworkShape shape_;
  PiecewisePoly target_;
  PiecewisePoly density_;
  Evaluator evaluator_;
  Rational a_exact_;
  Rational b_exact_;
  Breakline1D target_line_;
  Breakline1D density_line_;
  std::vector<Hyperplane> data_planes_;
};

}  // namespace reluflow

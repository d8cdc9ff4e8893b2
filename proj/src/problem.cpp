#include "reluflow/problem.hpp"

#include <stdexcept>

namespace reluflow {

std::string_view to_string(Evaluator e) {
  switch (e) {
    case Evaluator::Exact1D:
      return "exact-1d";
    case Evaluator::Elimination:
      return "elimination";
    case Evaluator::Quadrature:
      return "quadrature";
  }
  return "unknown";
}

Evaluator parse_evaluator(std::string_view name) {
  if (name == "exact-1d") return Evaluator::Exact1D;
  if (name == "elimination") return Evaluator::Elimination;
  if (name == "quadrature") return Evaluator::Quadrature;
  throw std::invalid_argument("unknown evaluator '" + std::string(name) +
                              "' (expected exact-1d, elimination or quadrature)");
}

Problem::Problem(NetworkShape shape, PiecewisePoly target, PiecewisePoly density, Evaluator evaluator)
    : shape_(shape),
      target_(std::move(target)),
      density_(std::move(density)),
      evaluator_(evaluator),
      a_exact_(from_double(shape.a)),
      b_exact_(from_double(shape.b)) {
  if (target_.dim() != shape_.d) throw std::invalid_argument("target.dim does not match the input dimension");
  if (density_.dim() != shape_.d) throw std::invalid_argument("density.dim does not match the input dimension");
  if (evaluator_ == Evaluator::Exact1D && shape_.d != 1)
    throw std::invalid_argument("the exact-1d evaluator needs d = 1");
  if (evaluator_ == Evaluator::Elimination && shape_.d > 3)
    throw std::invalid_argument("the elimination evaluator supports d <= 3");
  if (shape_.d == 1) {
    target_line_ = canonicalize_1d(target_, a_exact_, b_exact_);
    density_line_ = canonicalize_1d(density_, a_exact_, b_exact_);
  }
  for (const auto* g : {&target_, &density_}) {
    for (const auto& piece : g->pieces()) {
      for (const auto& con : piece.constraints) {
        Hyperplane h;
        bool nonzero = false;
        for (const auto& q : con.normal) {
          h.normal.push_back(q.get_d());
          nonzero = nonzero || q != 0;
        }
        h.offset = con.offset.get_d();
        if (nonzero) data_planes_.push_back(std::move(h));
      }
    }
  }
}

Problem Problem::with_evaluator(Evaluator e) const { return Problem(shape_, target_, density_, e); }

const Breakline1D& Problem::target_line() const {
  if (shape_.d != 1) throw std::logic_error("target_line needs d = 1");
  return target_line_;
}

const Breakline1D& Problem::density_line() const {
  if (shape_.d != 1) throw std::logic_error("density_line needs d = 1");
  return density_line_;
}

}  // namespace reluflow

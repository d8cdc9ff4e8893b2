#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reluflow/rational.hpp"

namespace reluflow {

inline constexpr std::size_t kMaxPolyVars = 8;
inline constexpr unsigned kMaxDegreePerVar = 32;

/// Exponent multi-index packed into 8 bits per variable.
class Monomial {
 public:
  constexpr Monomial() = default;
  constexpr explicit Monomial(std::uint64_t packed) : bits_(packed) {}
  explicit Monomial(std::span<const int> exps);

  [[nodiscard]] constexpr unsigned exponent(std::size_t var) const {
    return static_cast<unsigned>((bits_ >> (8 * var)) & 0xFFu);
  }
  [[nodiscard]] Monomial with_exponent(std::size_t var, unsigned e) const;
  [[nodiscard]] Monomial times(Monomial other) const;  // checks the degree guard
  [[nodiscard]] Monomial drop_var(std::size_t var) const;
  [[nodiscard]] Monomial insert_var(std::size_t var) const;  // new var at position `var`, exponent 0
  [[nodiscard]] constexpr std::uint64_t bits() const { return bits_; }
  [[nodiscard]] unsigned total_degree(std::size_t nvars) const;

  friend constexpr auto operator<=>(const Monomial&, const Monomial&) = default;

 private:
  std::uint64_t bits_ = 0;
};

/// Sparse multivariate polynomial with exact rational coefficients.
/// Zero coefficients are never stored.
class Poly {
 public:
  Poly() = default;
  explicit Poly(std::size_t nvars);

  static Poly constant(std::size_t nvars, const Rational& value);
  static Poly variable(std::size_t nvars, std::size_t var);
  // sum_j coeffs[j] x_j + offset
  static Poly affine(std::span<const Rational> coeffs, const Rational& offset);

  [[nodiscard]] std::size_t nvars() const { return nvars_; }
  [[nodiscard]] bool is_zero() const { return terms_.empty(); }
  [[nodiscard]] std::size_t term_count() const { return terms_.size(); }
  [[nodiscard]] const std::map<Monomial, Rational>& terms() const { return terms_; }

  void add_term(Monomial m, const Rational& coeff);
  Poly& operator+=(const Poly& rhs);
  Poly& operator-=(const Poly& rhs);
  Poly& operator*=(const Rational& s);
  friend Poly operator+(Poly lhs, const Poly& rhs) { return lhs += rhs; }
  friend Poly operator-(Poly lhs, const Poly& rhs) { return lhs -= rhs; }
  friend Poly operator*(const Poly& lhs, const Poly& rhs);
  friend Poly operator*(Poly lhs, const Rational& s) { return lhs *= s; }
  friend bool operator==(const Poly&, const Poly&) = default;

  [[nodiscard]] unsigned degree_in(std::size_t var) const;
  [[nodiscard]] Poly pow(unsigned k) const;

  // Antiderivative in `var` with zero constant term.
  [[nodiscard]] Poly antiderivative(std::size_t var) const;
  // Replace x_var by `value` (a polynomial not depending on x_var); the
  // result keeps nvars() variables but no longer depends on x_var.
  [[nodiscard]] Poly substitute(std::size_t var, const Poly& value) const;
  // Drop a variable the polynomial does not depend on.
  [[nodiscard]] Poly drop_var(std::size_t var) const;
  [[nodiscard]] Poly insert_var(std::size_t var) const;

  [[nodiscard]] double evaluate(std::span<const double> x) const;
  [[nodiscard]] Rational evaluate(std::span<const Rational> x) const;

  // Dense coefficient list c_0..c_n for a univariate polynomial; empty for 0.
  [[nodiscard]] std::vector<Rational> univariate_coefficients() const;

 private:
  std::size_t nvars_ = 0;
  std::map<Monomial, Rational> terms_;
};

/// Coefficient-converted copy of a Poly for repeated binary64 evaluation.
struct NumericPoly {
  std::size_t nvars = 0;
  std::vector<std::pair<Monomial, double>> terms;

  NumericPoly() = default;
  explicit NumericPoly(const Poly& p);
  [[nodiscard]] double operator()(std::span<const double> x) const;
};

/// normal . x + offset >= 0. An all-zero normal is the constant constraint
/// "offset >= 0": trivially true for offset >= 0, trivially false otherwise.
struct AffineConstraint {
  std::vector<Rational> normal;
  Rational offset;

  [[nodiscard]] bool holds(std::span<const double> x) const;
  [[nodiscard]] bool holds(std::span<const Rational> x) const;
  friend bool operator==(const AffineConstraint&, const AffineConstraint&) = default;
};

struct PolyPiece {
  std::vector<AffineConstraint> constraints;
  Poly poly;
  friend bool operator==(const PolyPiece&, const PolyPiece&) = default;
};

/// Sum of gated polynomials: g(x) = sum over pieces whose constraints all hold
/// at x of poly(x). Pieces overlap additively; they do not partition.
/// A piece may carry any number of constraint rows.
class PiecewisePoly {
 public:
  PiecewisePoly() = default;
  PiecewisePoly(std::size_t dim, std::vector<PolyPiece> pieces);

  static PiecewisePoly constant(std::size_t dim, const Rational& value);

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] const std::vector<PolyPiece>& pieces() const { return pieces_; }
  [[nodiscard]] unsigned max_degree() const;

  [[nodiscard]] double operator()(std::span<const double> x) const;
  [[nodiscard]] Rational exact(std::span<const Rational> x) const;

  friend bool operator==(const PiecewisePoly& l, const PiecewisePoly& r) {
    return l.dim_ == r.dim_ && l.pieces_ == r.pieces_;
  }

 private:
  struct NumericPiece {
    std::vector<std::vector<double>> normals;
    std::vector<double> offsets;
    NumericPoly poly;
  };

  std::size_t dim_ = 0;
  std::vector<PolyPiece> pieces_;
  std::vector<NumericPiece> numeric_;
};

/// Closed-constraint, sum-semantics evaluation.
inline double eval_pp(const PiecewisePoly& g, std::span<const double> x) { return g(x); }

/// Integral of a univariate polynomial over [lo, hi] via its antiderivative.
/// Throws std::invalid_argument when lo > hi.
double integrate_poly_1d(const Poly& p, double lo, double hi);
Rational integrate_poly_1d(const Poly& p, const Rational& lo, const Rational& hi);

/// Canonical one-dimensional form: strictly increasing breakpoints
/// a = t_0 < ... < t_m = b and the summed active polynomial on each open
/// cell (t_k, t_{k+1}), stored as dense coefficients c_0..c_n.
struct Breakline1D {
  std::vector<Rational> breakpoints;
  std::vector<std::vector<Rational>> polys;

  [[nodiscard]] std::size_t cell_count() const { return polys.size(); }
  // Cell containing x (x on a breakpoint resolves to the right-hand cell,
  // except at b which resolves to the last cell).
  [[nodiscard]] std::size_t locate(double x) const;
  [[nodiscard]] double operator()(double x) const;
};

Breakline1D canonicalize_1d(const PiecewisePoly& g, const Rational& a, const Rational& b);

struct NonnegativityAudit {
  double min_value = 0.0;
  std::vector<double> argmin;
  std::size_t samples = 0;
  bool passed = true;
};

/// Evaluates g on `samples` Halton points of [a, b]^d and checks g >= -tol.
NonnegativityAudit audit_nonnegative(const PiecewisePoly& g, double a, double b,
                                     std::size_t samples = 10000, double tol = 1e-12);

/// JSON literal:
///   { "dim": d, "pieces": [ { "constraints": [ { "normal": ["p/q", ...],
///     "offset": "p/q" } ], "poly": [ { "exps": [ints], "coef": "p/q" } ] } ] }
/// Rationals may also be given as JSON numbers (converted exactly).
nlohmann::json to_json(const PiecewisePoly& g);
PiecewisePoly piecewise_from_json(const nlohmann::json& j);

}  // namespace reluflow

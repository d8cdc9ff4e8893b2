#include "reluflow/piecewise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace reluflow {

// ---------------------------------------------------------------- Monomial

Monomial::Monomial(std::span<const int> exps) {
  if (exps.size() > kMaxPolyVars) throw std::invalid_argument("too many polynomial variables");
  for (std::size_t i = 0; i < exps.size(); ++i) {
    if (exps[i] < 0) throw std::invalid_argument("negative exponent");
    if (static_cast<unsigned>(exps[i]) > kMaxDegreePerVar)
      throw std::invalid_argument("exponent " + std::to_string(exps[i]) + " exceeds the per-variable degree guard");
    bits_ |= static_cast<std::uint64_t>(exps[i]) << (8 * i);
  }
}

Monomial Monomial::with_exponent(std::size_t var, unsigned e) const {
  if (e > kMaxDegreePerVar) throw std::overflow_error("polynomial degree guard exceeded");
  const std::uint64_t mask = std::uint64_t{0xFF} << (8 * var);
  return Monomial((bits_ & ~mask) | (static_cast<std::uint64_t>(e) << (8 * var)));
}

Monomial Monomial::times(Monomial other) const {
  Monomial out;
  for (std::size_t v = 0; v < kMaxPolyVars; ++v) {
    const unsigned e = exponent(v) + other.exponent(v);
    if (e > kMaxDegreePerVar) throw std::overflow_error("polynomial degree guard exceeded");
    out.bits_ |= static_cast<std::uint64_t>(e) << (8 * v);
  }
  return out;
}

Monomial Monomial::drop_var(std::size_t var) const {
  const std::uint64_t low = var == 0 ? 0 : bits_ & ((std::uint64_t{1} << (8 * var)) - 1);
  const std::uint64_t high = var + 1 >= kMaxPolyVars ? 0 : bits_ >> (8 * (var + 1));
  return Monomial(low | (high << (8 * var)));
}

Monomial Monomial::insert_var(std::size_t var) const {
  const std::uint64_t low = var == 0 ? 0 : bits_ & ((std::uint64_t{1} << (8 * var)) - 1);
  const std::uint64_t high = var >= kMaxPolyVars ? 0 : bits_ >> (8 * var);
  return Monomial(low | (high << (8 * (var + 1))));
}

unsigned Monomial::total_degree(std::size_t nvars) const {
  unsigned s = 0;
  for (std::size_t v = 0; v < nvars; ++v) s += exponent(v);
  return s;
}

// -------------------------------------------------------------------- Poly

Poly::Poly(std::size_t nvars) : nvars_(nvars) {
  if (nvars > kMaxPolyVars) throw std::invalid_argument("too many polynomial variables");
}

Poly Poly::constant(std::size_t nvars, const Rational& value) {
  Poly p(nvars);
  p.add_term(Monomial{}, value);
  return p;
}

Poly Poly::variable(std::size_t nvars, std::size_t var) {
  Poly p(nvars);
  p.add_term(Monomial{}.with_exponent(var, 1), Rational(1));
  return p;
}

Poly Poly::affine(std::span<const Rational> coeffs, const Rational& offset) {
  Poly p(coeffs.size());
  p.add_term(Monomial{}, offset);
  for (std::size_t j = 0; j < coeffs.size(); ++j) p.add_term(Monomial{}.with_exponent(j, 1), coeffs[j]);
  return p;
}

void Poly::add_term(Monomial m, const Rational& coeff) {
  if (coeff == 0) return;
  auto [it, inserted] = terms_.try_emplace(m, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0) terms_.erase(it);
  }
}

Poly& Poly::operator+=(const Poly& rhs) {
  if (nvars_ < rhs.nvars_) nvars_ = rhs.nvars_;
  for (const auto& [m, c] : rhs.terms_) add_term(m, c);
  return *this;
}

Poly& Poly::operator-=(const Poly& rhs) {
  if (nvars_ < rhs.nvars_) nvars_ = rhs.nvars_;
  for (const auto& [m, c] : rhs.terms_) add_term(m, -c);
  return *this;
}

Poly& Poly::operator*=(const Rational& s) {
  if (s == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, c] : terms_) c *= s;
  return *this;
}

Poly operator*(const Poly& lhs, const Poly& rhs) {
  Poly out(std::max(lhs.nvars_, rhs.nvars_));
  Rational prod;
  for (const auto& [ml, cl] : lhs.terms_) {
    for (const auto& [mr, cr] : rhs.terms_) {
      prod = cl * cr;
      out.add_term(ml.times(mr), prod);
    }
  }
  return out;
}

unsigned Poly::degree_in(std::size_t var) const {
  unsigned deg = 0;
  for (const auto& [m, c] : terms_) deg = std::max(deg, m.exponent(var));
  return deg;
}

Poly Poly::pow(unsigned k) const {
  Poly out = constant(nvars_, Rational(1));
  for (unsigned i = 0; i < k; ++i) out = out * *this;
  return out;
}

Poly Poly::antiderivative(std::size_t var) const {
  Poly out(nvars_);
  for (const auto& [m, c] : terms_) {
    const unsigned e = m.exponent(var);
    out.add_term(m.with_exponent(var, e + 1), c / Rational(e + 1));
  }
  return out;
}

Poly Poly::substitute(std::size_t var, const Poly& value) const {
  // Group by the exponent of x_var, then Horner in `value`.
  const unsigned deg = degree_in(var);
  std::vector<Poly> by_power(deg + 1, Poly(nvars_));
  for (const auto& [m, c] : terms_) by_power[m.exponent(var)].add_term(m.with_exponent(var, 0), c);
  Poly out = by_power[deg];
  for (unsigned k = deg; k-- > 0;) {
    out = out * value;
    out += by_power[k];
  }
  out.nvars_ = nvars_;
  return out;
}

Poly Poly::drop_var(std::size_t var) const {
  Poly out(nvars_ == 0 ? 0 : nvars_ - 1);
  for (const auto& [m, c] : terms_) {
    if (m.exponent(var) != 0) throw std::logic_error("drop_var on a variable the polynomial depends on");
    out.terms_.emplace(m.drop_var(var), c);
  }
  return out;
}

Poly Poly::insert_var(std::size_t var) const {
  Poly out(nvars_ + 1);
  for (const auto& [m, c] : terms_) out.terms_.emplace(m.insert_var(var), c);
  return out;
}

double Poly::evaluate(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c.get_d();
    for (std::size_t v = 0; v < nvars_; ++v)
      for (unsigned e = m.exponent(v); e > 0; --e) t *= x[v];
    sum += t;
  }
  return sum;
}

Rational Poly::evaluate(std::span<const Rational> x) const {
  Rational sum = 0;
  Rational t;
  for (const auto& [m, c] : terms_) {
    t = c;
    for (std::size_t v = 0; v < nvars_; ++v)
      for (unsigned e = m.exponent(v); e > 0; --e) t *= x[v];
    sum += t;
  }
  return sum;
}

std::vector<Rational> Poly::univariate_coefficients() const {
  if (nvars_ > 1) throw std::invalid_argument("univariate_coefficients needs a univariate polynomial");
  if (terms_.empty()) return {};
  std::vector<Rational> out(degree_in(0) + 1, Rational(0));
  for (const auto& [m, c] : terms_) out[m.exponent(0)] = c;
  return out;
}

NumericPoly::NumericPoly(const Poly& p) : nvars(p.nvars()) {
  terms.reserve(p.term_count());
  for (const auto& [m, c] : p.terms()) terms.emplace_back(m, c.get_d());
}

double NumericPoly::operator()(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& [m, c] : terms) {
    double t = c;
    for (std::size_t v = 0; v < nvars; ++v)
      for (unsigned e = m.exponent(v); e > 0; --e) t *= x[v];
    sum += t;
  }
  return sum;
}

// --------------------------------------------------------- AffineConstraint

bool AffineConstraint::holds(std::span<const double> x) const {
  double s = offset.get_d();
  for (std::size_t j = 0; j < normal.size(); ++j) s += normal[j].get_d() * x[j];
  return s >= 0.0;
}

bool AffineConstraint::holds(std::span<const Rational> x) const {
  Rational s = offset;
  for (std::size_t j = 0; j < normal.size(); ++j) s += normal[j] * x[j];
  return s >= 0;
}

// ----------------------------------------------------------- PiecewisePoly

PiecewisePoly::PiecewisePoly(std::size_t dim, std::vector<PolyPiece> pieces)
    : dim_(dim), pieces_(std::move(pieces)) {
  if (dim_ == 0 || dim_ > kMaxPolyVars) throw std::invalid_argument("piecewise polynomial dimension out of range");
  numeric_.reserve(pieces_.size());
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    auto& piece = pieces_[k];
    if (piece.poly.nvars() > dim_)
      throw std::invalid_argument("piece " + std::to_string(k) + " polynomial has more variables than dim");
    if (piece.poly.nvars() < dim_) {
      Poly widened(dim_);
      widened += piece.poly;
      piece.poly = widened;
    }
    NumericPiece np;
    for (const auto& con : piece.constraints) {
      if (con.normal.size() != dim_)
        throw std::invalid_argument("piece " + std::to_string(k) + " constraint normal has wrong length");
      std::vector<double> n;
      for (const auto& q : con.normal) n.push_back(q.get_d());
      np.normals.push_back(std::move(n));
      np.offsets.push_back(con.offset.get_d());
    }
    np.poly = NumericPoly(piece.poly);
    numeric_.push_back(std::move(np));
  }
}

PiecewisePoly PiecewisePoly::constant(std::size_t dim, const Rational& value) {
  return PiecewisePoly(dim, {PolyPiece{{}, Poly::constant(dim, value)}});
}

unsigned PiecewisePoly::max_degree() const {
  unsigned deg = 0;
  for (const auto& piece : pieces_)
    for (const auto& [m, c] : piece.poly.terms()) deg = std::max(deg, m.total_degree(dim_));
  return deg;
}

double PiecewisePoly::operator()(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& np : numeric_) {
    bool on = true;
    for (std::size_t r = 0; r < np.offsets.size() && on; ++r) {
      double s = np.offsets[r];
      for (std::size_t j = 0; j < dim_; ++j) s += np.normals[r][j] * x[j];
      on = s >= 0.0;
    }
    if (on) sum += np.poly(x);
  }
  return sum;
}

Rational PiecewisePoly::exact(std::span<const Rational> x) const {
  Rational sum = 0;
  for (const auto& piece : pieces_) {
    const bool on = std::all_of(piece.constraints.begin(), piece.constraints.end(),
                                [&](const AffineConstraint& c) { return c.holds(x); });
    if (on) sum += piece.poly.evaluate(x);
  }
  return sum;
}

// ------------------------------------------------------------ integration

double integrate_poly_1d(const Poly& p, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("integrate_poly_1d: lo > hi");
  if (p.nvars() > 1) throw std::invalid_argument("integrate_poly_1d needs a univariate polynomial");
  double sum = 0.0;
  for (const auto& [m, c] : p.terms()) {
    const unsigned k = m.exponent(0) + 1;
    sum += c.get_d() * (std::pow(hi, k) - std::pow(lo, k)) / k;
  }
  return sum;
}

Rational integrate_poly_1d(const Poly& p, const Rational& lo, const Rational& hi) {
  if (lo > hi) throw std::invalid_argument("integrate_poly_1d: lo > hi");
  if (p.nvars() > 1) throw std::invalid_argument("integrate_poly_1d needs a univariate polynomial");
  const Poly anti = p.antiderivative(0);
  const std::array<Rational, 1> h{hi};
  const std::array<Rational, 1> l{lo};
  return anti.evaluate(std::span<const Rational>(h)) - anti.evaluate(std::span<const Rational>(l));
}

// -------------------------------------------------------------- Breakline1D

std::size_t Breakline1D::locate(double x) const {
  std::size_t lo = 0;
  std::size_t hi = polys.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (x >= breakpoints[mid].get_d())
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double Breakline1D::operator()(double x) const {
  const auto& coeffs = polys[locate(x)];
  double acc = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * x + coeffs[k].get_d();
  return acc;
}

Breakline1D canonicalize_1d(const PiecewisePoly& g, const Rational& a, const Rational& b) {
  if (g.dim() != 1) throw std::invalid_argument("canonicalize_1d needs dim = 1");
  if (!(a < b)) throw std::invalid_argument("canonicalize_1d needs a < b");
  std::vector<Rational> pts{a, b};
  for (const auto& piece : g.pieces()) {
    for (const auto& con : piece.constraints) {
      if (con.normal[0] == 0) continue;
      Rational root = -con.offset / con.normal[0];
      if (a < root && root < b) pts.push_back(std::move(root));
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  Breakline1D out;
  out.breakpoints = pts;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const std::array<Rational, 1> mid{(pts[k] + pts[k + 1]) / 2};
    Poly sum(1);
    for (const auto& piece : g.pieces()) {
      const bool on = std::all_of(piece.constraints.begin(), piece.constraints.end(),
                                  [&](const AffineConstraint& c) { return c.holds(std::span<const Rational>(mid)); });
      if (on) sum += piece.poly;
    }
    out.polys.push_back(sum.univariate_coefficients());
  }
  return out;
}

// ---------------------------------------------------------------- audit

namespace {

double radical_inverse(std::size_t index, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

NonnegativityAudit audit_nonnegative(const PiecewisePoly& g, double a, double b, std::size_t samples,
                                     double tol) {
  static constexpr std::array<unsigned, kMaxPolyVars> kPrimes{2, 3, 5, 7, 11, 13, 17, 19};
  NonnegativityAudit audit;
  audit.samples = samples;
  audit.min_value = std::numeric_limits<double>::infinity();
  std::vector<double> x(g.dim());
  for (std::size_t n = 1; n <= samples; ++n) {
    for (std::size_t j = 0; j < g.dim(); ++j) x[j] = a + (b - a) * radical_inverse(n, kPrimes[j]);
    const double val = g(x);
    if (val < audit.min_value) {
      audit.min_value = val;
      audit.argmin = x;
    }
  }
  audit.passed = audit.min_value >= -tol;
  return audit;
}

// ----------------------------------------------------------------- JSON

namespace {

Rational rational_from_json(const nlohmann::json& j, const std::string& where) {
  try {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Rational(std::to_string(j.get<long long>()));
    if (j.is_number()) return from_double(j.get<double>());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + ": " + e.what());
  }
  throw std::invalid_argument(where + ": expected a rational (\"p/q\" string or number)");
}

}  // namespace

nlohmann::json to_json(const PiecewisePoly& g) {
  nlohmann::json pieces = nlohmann::json::array();
  for (const auto& piece : g.pieces()) {
    nlohmann::json cons = nlohmann::json::array();
    for (const auto& c : piece.constraints) {
      nlohmann::json normal = nlohmann::json::array();
      for (const auto& q : c.normal) normal.push_back(to_string(q));
      cons.push_back({{"normal", normal}, {"offset", to_string(c.offset)}});
    }
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& [m, coef] : piece.poly.terms()) {
      std::vector<int> exps(g.dim());
      for (std::size_t v = 0; v < g.dim(); ++v) exps[v] = static_cast<int>(m.exponent(v));
      poly.push_back({{"exps", exps}, {"coef", to_string(coef)}});
    }
    pieces.push_back({{"constraints", cons}, {"poly", poly}});
  }
  return {{"dim", g.dim()}, {"pieces", pieces}};
}

PiecewisePoly piecewise_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("piecewise polynomial must be a JSON object");
  if (!j.contains("dim") || !j["dim"].is_number_integer() || j["dim"].get<long long>() < 1)
    throw std::invalid_argument("dim: expected a positive integer");
  const auto dim = static_cast<std::size_t>(j["dim"].get<long long>());
  if (!j.contains("pieces") || !j["pieces"].is_array()) throw std::invalid_argument("pieces: expected an array");
  std::vector<PolyPiece> pieces;
  std::size_t k = 0;
  for (const auto& jp : j["pieces"]) {
    const std::string where = "pieces[" + std::to_string(k) + "]";
    PolyPiece piece;
    piece.poly = Poly(dim);
    if (jp.contains("constraints")) {
      std::size_t r = 0;
      for (const auto& jc : jp["constraints"]) {
        const std::string cw = where + ".constraints[" + std::to_string(r++) + "]";
        AffineConstraint con;
        if (!jc.contains("normal") || !jc["normal"].is_array() || jc["normal"].size() != dim)
          throw std::invalid_argument(cw + ".normal: expected " + std::to_string(dim) + " entries");
        for (const auto& q : jc["normal"]) con.normal.push_back(rational_from_json(q, cw + ".normal"));
        con.offset = jc.contains("offset") ? rational_from_json(jc["offset"], cw + ".offset") : Rational(0);
        piece.constraints.push_back(std::move(con));
      }
    }
    if (!jp.contains("poly") || !jp["poly"].is_array()) throw std::invalid_argument(where + ".poly: expected an array");
    std::size_t t = 0;
    for (const auto& jt : jp["poly"]) {
      const std::string tw = where + ".poly[" + std::to_string(t++) + "]";
      if (!jt.contains("exps") || !jt["exps"].is_array() || jt["exps"].size() != dim)
        throw std::invalid_argument(tw + ".exps: expected " + std::to_string(dim) + " integers");
      std::vector<int> exps = jt["exps"].get<std::vector<int>>();
      if (!jt.contains("coef")) throw std::invalid_argument(tw + ".coef: missing");
      piece.poly.add_term(Monomial(exps), rational_from_json(jt["coef"], tw + ".coef"));
    }
    pieces.push_back(std::move(piece));
    ++k;
  }
  return PiecewisePoly(dim, std::move(pieces));
}

}  // namespace reluflow

#include "reluflow/semialg.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace reluflow {

namespace {

enum class Verdict { True, False, Keep };

bool kind_holds(Indicator::Kind kind, const Rational& s) {
  switch (kind) {
    case Indicator::Kind::Eq0:
      return s == 0;
    case Indicator::Kind::Ge0:
      return s >= 0;
    case Indicator::Kind::Gt0:
      return s > 0;
  }
  return false;
}

// Decides the indicator over the box up to null sets, or canonicalizes it
// (Ge0, first nonzero normal entry of magnitude 1).
Verdict classify(Indicator& ind, const Rational& a, const Rational& b) {
  auto& n = ind.affine.normal;
  const auto first = std::find_if(n.begin(), n.end(), [](const Rational& q) { return q != 0; });
  if (first == n.end()) return kind_holds(ind.kind, ind.affine.offset) ? Verdict::True : Verdict::False;
  if (ind.kind == Indicator::Kind::Eq0) return Verdict::False;
  Rational lo = ind.affine.offset;
  Rational hi = ind.affine.offset;
  for (const auto& q : n) {
    if (q > 0) {
      lo += q * a;
      hi += q * b;
    } else if (q < 0) {
      lo += q * b;
      hi += q * a;
    }
  }
  if (lo >= 0) return Verdict::True;
  if (hi <= 0) return Verdict::False;
  const Rational scale = abs(*first);
  if (scale != 1) {
    for (auto& q : n) q /= scale;
    ind.affine.offset /= scale;
  }
  ind.kind = Indicator::Kind::Ge0;
  return Verdict::Keep;
}

int compare(const AffineConstraint& l, const AffineConstraint& r) {
  for (std::size_t j = 0; j < l.normal.size(); ++j) {
    const int c = cmp(l.normal[j], r.normal[j]);
    if (c != 0) return c;
  }
  return cmp(l.offset, r.offset);
}

struct FactorLess {
  bool operator()(const std::vector<Indicator>& l, const std::vector<Indicator>& r) const {
    if (l.size() != r.size()) return l.size() < r.size();
    for (std::size_t k = 0; k < l.size(); ++k) {
      const int c = compare(l[k].affine, r[k].affine);
      if (c != 0) return c < 0;
    }
    return false;
  }
};

struct Cell {
  std::vector<Indicator> factors;
  std::vector<Poly> qs;
};

// Term set with several polynomial components sharing indicator sets.
class CellSet {
 public:
  CellSet(std::size_t dim, Rational a, Rational b, std::size_t comps)
      : dim_(dim), a_(std::move(a)), b_(std::move(b)), comps_(comps) {}

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] const Rational& a() const { return a_; }
  [[nodiscard]] const Rational& b() const { return b_; }
  [[nodiscard]] std::size_t comps() const { return comps_; }
  [[nodiscard]] const std::vector<Cell>& cells() const { return cells_; }

  // Screens and canonicalizes `factors`; false when the region is null.
  bool normalize(std::vector<Indicator>& factors) const {
    std::vector<Indicator> kept;
    kept.reserve(factors.size());
    for (auto& f : factors) {
      const Verdict v = classify(f, a_, b_);
      if (v == Verdict::False) return false;
      if (v == Verdict::Keep) kept.push_back(std::move(f));
    }
    std::sort(kept.begin(), kept.end(),
              [](const Indicator& l, const Indicator& r) { return compare(l.affine, r.affine) < 0; });
    kept.erase(std::unique(kept.begin(), kept.end(),
                           [](const Indicator& l, const Indicator& r) { return compare(l.affine, r.affine) == 0; }),
               kept.end());
    factors = std::move(kept);
    return true;
  }

  void add(std::vector<Indicator> factors, std::size_t comp, const Poly& q) {
    if (q.is_zero()) return;
    if (!normalize(factors)) return;
    Cell& cell = slot(std::move(factors));
    cell.qs[comp] += q;
  }

  // Factors already normalized.
  Cell& slot(std::vector<Indicator> factors) {
    auto [it, inserted] = index_.try_emplace(factors, cells_.size());
    if (inserted) cells_.push_back(Cell{std::move(factors), std::vector<Poly>(comps_, Poly(dim_))});
    return cells_[it->second];
  }

  CellSet eliminate(std::size_t k) const;

  [[nodiscard]] std::vector<Rational> constants() const {
    if (dim_ != 0) throw std::logic_error("constants() needs all variables eliminated");
    std::vector<Rational> out(comps_, Rational(0));
    for (const auto& cell : cells_)
      for (std::size_t c = 0; c < comps_; ++c)
        for (const auto& [m, coef] : cell.qs[c].terms()) out[c] += coef;
    return out;
  }

 private:
  std::size_t dim_;
  Rational a_;
  Rational b_;
  std::size_t comps_;
  std::vector<Cell> cells_;
  std::map<std::vector<Indicator>, std::size_t, FactorLess> index_;
};

struct Bound {
  std::vector<Rational> normal;
  Rational offset;
};

Indicator difference(const Bound& hi, const Bound& lo, Indicator::Kind kind) {
  Indicator ind;
  ind.kind = kind;
  ind.affine.normal.resize(hi.normal.size());
  for (std::size_t j = 0; j < hi.normal.size(); ++j) ind.affine.normal[j] = hi.normal[j] - lo.normal[j];
  ind.affine.offset = hi.offset - lo.offset;
  return ind;
}

Indicator drop_column(Indicator ind, std::size_t k) {
  ind.affine.normal.erase(ind.affine.normal.begin() + static_cast<std::ptrdiff_t>(k));
  return ind;
}

CellSet CellSet::eliminate(std::size_t k) const {
  if (dim_ == 0 || k >= dim_) throw std::invalid_argument("eliminate: variable index out of range");
  const std::size_t n = dim_;
  CellSet out(n - 1, a_, b_, comps_);
  for (std::size_t t = 0; t < cells_.size(); ++t) {
    const Cell& cell = cells_[t];
    try {
      std::vector<Indicator> rest;
      std::vector<Bound> lowers{{std::vector<Rational>(n, Rational(0)), a_}};
      std::vector<Bound> uppers{{std::vector<Rational>(n, Rational(0)), b_}};
      bool null_region = false;
      for (const auto& f : cell.factors) {
        const Rational& nk = f.affine.normal[k];
        if (nk == 0) {
          rest.push_back(drop_column(f, k));
          continue;
        }
        if (f.kind == Indicator::Kind::Eq0) {
          null_region = true;
          break;
        }
        Bound bound{std::vector<Rational>(n), -f.affine.offset / nk};
        for (std::size_t j = 0; j < n; ++j) bound.normal[j] = j == k ? Rational(0) : Rational(-f.affine.normal[j] / nk);
        (nk > 0 ? lowers : uppers).push_back(std::move(bound));
      }
      if (null_region) continue;
      {
        std::vector<Poly> antider;
        for (const auto& q : cell.qs) antider.push_back(q.antiderivative(k));
        auto at = [&](const Bound& bd) {
          const Poly value = Poly::affine(bd.normal, bd.offset);
          std::vector<Poly> vals;
          for (const auto& Q : antider) vals.push_back(Q.is_zero() ? Poly(n) : Q.substitute(k, value));
          return vals;
        };
        std::vector<std::vector<Poly>> at_lower;
        std::vector<std::vector<Poly>> at_upper;
        for (const auto& bd : lowers) at_lower.push_back(at(bd));
        for (const auto& bd : uppers) at_upper.push_back(at(bd));

        for (std::size_t l = 0; l < lowers.size(); ++l) {
          for (std::size_t u = 0; u < uppers.size(); ++u) {
            std::vector<Indicator> factors = rest;
            for (std::size_t m = 0; m < lowers.size(); ++m) {
              if (m == l) continue;
              factors.push_back(drop_column(
                  difference(lowers[l], lowers[m], m < l ? Indicator::Kind::Gt0 : Indicator::Kind::Ge0), k));
            }
            for (std::size_t m = 0; m < uppers.size(); ++m) {
              if (m == u) continue;
              factors.push_back(drop_column(
                  difference(uppers[m], uppers[u], m < u ? Indicator::Kind::Gt0 : Indicator::Kind::Ge0), k));
            }
            factors.push_back(drop_column(difference(uppers[u], lowers[l], Indicator::Kind::Gt0), k));
            if (!out.normalize(factors)) continue;
            Cell* target = nullptr;
            for (std::size_t c = 0; c < comps_; ++c) {
              Poly q = at_upper[u][c] - at_lower[l][c];
              if (q.is_zero()) continue;
              if (target == nullptr) target = &out.slot(factors);
              target->qs[c] += q.drop_var(k);
            }
          }
        }
      }
    } catch (const std::overflow_error&) {
      throw std::overflow_error("degree guard exceeded while eliminating x" + std::to_string(k + 1) + " from term " +
                                std::to_string(t));
    }
  }
  return out;
}

CellSet from_terms(const AmnTermSet& ts) {
  CellSet cs(ts.dim, ts.a, ts.b, 1);
  for (const auto& term : ts.terms) {
    for (const auto& f : term.factors)
      if (f.affine.normal.size() != ts.dim) throw std::invalid_argument("indicator dimension does not match the term set");
    Poly q = term.q * term.rcoef;
    if (q.nvars() > ts.dim) throw std::invalid_argument("polynomial has more variables than the term set");
    cs.add(term.factors, 0, q);
  }
  return cs;
}

AmnTermSet to_terms(const CellSet& cs) {
  AmnTermSet ts;
  ts.dim = cs.dim();
  ts.a = cs.a();
  ts.b = cs.b();
  for (const auto& cell : cs.cells()) {
    if (cell.qs[0].is_zero()) continue;
    ts.terms.push_back(AmnTerm{Rational(1), cell.qs[0], cell.factors});
  }
  return ts;
}

std::vector<Rational> integrate_cells(CellSet cs, std::span<const std::size_t> order) {
  std::vector<std::size_t> remaining(cs.dim());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::size_t> seq(order.begin(), order.end());
  if (seq.empty())
    for (std::size_t k = cs.dim(); k-- > 0;) seq.push_back(k);
  if (seq.size() != cs.dim()) throw std::invalid_argument("elimination order must list every variable once");
  for (std::size_t orig : seq) {
    const auto it = std::find(remaining.begin(), remaining.end(), orig);
    if (it == remaining.end()) throw std::invalid_argument("elimination order must list every variable once");
    const auto pos = static_cast<std::size_t>(it - remaining.begin());
    cs = cs.eliminate(pos);
    remaining.erase(it);
  }
  return cs.constants();
}

struct Gated {
  std::vector<Indicator> factors;
  Poly q;
};

Indicator ge0(std::vector<Rational> normal, Rational offset) {
  return Indicator{Indicator::Kind::Ge0, AffineConstraint{std::move(normal), std::move(offset)}};
}

std::vector<Gated> gated_pieces(const PiecewisePoly& g, const Rational& scale) {
  std::vector<Gated> out;
  for (const auto& piece : g.pieces()) {
    Gated gp;
    for (const auto& con : piece.constraints) gp.factors.push_back(ge0(con.normal, con.offset));
    gp.q = piece.poly * scale;
    out.push_back(std::move(gp));
  }
  return out;
}

std::vector<Indicator> join(const std::vector<Indicator>& l, const std::vector<Indicator>& r) {
  std::vector<Indicator> out = l;
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

struct ExactTheta {
  std::vector<std::vector<Rational>> w;
  std::vector<Rational> b;
  std::vector<Rational> v;
  Rational c;
  std::vector<bool> degenerate;
};

ExactTheta read_theta(const ParamVector& theta) {
  const auto& s = theta.shape();
  ExactTheta t;
  t.w.assign(s.H, std::vector<Rational>(s.d));
  for (std::size_t i = 0; i < s.H; ++i) {
    for (std::size_t j = 0; j < s.d; ++j) t.w[i][j] = from_double(theta.w(i, j));
    t.b.push_back(from_double(theta.b(i)));
    t.v.push_back(from_double(theta.v(i)));
    t.degenerate.push_back(theta.input_mass(i) == 0.0);
  }
  t.c = from_double(theta.c());
  return t;
}

// Components: 0 is the risk, 1 + k the k-th gradient entry.
CellSet build(const Problem& problem, const ParamVector& theta, bool with_gradient) {
  const auto& s = problem.shape();
  if (theta.shape() != s) throw std::invalid_argument("parameter vector does not match the problem shape");
  if (s.d > 3) throw std::invalid_argument("the elimination evaluator supports d <= 3");
  const std::size_t d = s.d;
  const ExactTheta t = read_theta(theta);

  std::vector<Gated> residual;
  residual.push_back(Gated{{}, Poly::constant(d, t.c)});
  std::vector<std::vector<Indicator>> gate(s.H);
  std::vector<Poly> z(s.H);
  for (std::size_t i = 0; i < s.H; ++i) {
    if (t.degenerate[i]) continue;
    z[i] = Poly::affine(t.w[i], t.b[i]);
    gate[i].push_back(ge0(t.w[i], t.b[i]));
    residual.push_back(Gated{gate[i], z[i] * t.v[i]});
  }
  for (auto& gp : gated_pieces(problem.target(), Rational(-1))) residual.push_back(std::move(gp));
  const auto density = gated_pieces(problem.density(), Rational(1));

  CellSet cs(d, problem.a_exact(), problem.b_exact(), with_gradient ? 1 + theta.size() : 1);
  const Rational two(2);
  for (const auto& rs : residual) {
    for (const auto& pu : density) {
      const auto base = join(rs.factors, pu.factors);
      const Poly rp = rs.q * pu.q;
      if (rp.is_zero()) continue;
      for (const auto& rt : residual) cs.add(join(base, rt.factors), 0, rt.q * rp);
      if (!with_gradient) continue;
      cs.add(base, 1 + theta.c_index(), rp * two);
      for (std::size_t i = 0; i < s.H; ++i) {
        if (t.degenerate[i]) continue;
        const auto factors = join(base, gate[i]);
        const Poly g = rp * Rational(two * t.v[i]);
        for (std::size_t j = 0; j < d; ++j) cs.add(factors, 1 + theta.w_index(i, j), g * Poly::variable(d, j));
        cs.add(factors, 1 + theta.b_index(i), g);
        cs.add(factors, 1 + theta.v_index(i), z[i] * rp * two);
      }
    }
  }
  return cs;
}

}  // namespace

bool Indicator::holds(std::span<const double> x) const {
  double s = affine.offset.get_d();
  for (std::size_t j = 0; j < affine.normal.size(); ++j) s += affine.normal[j].get_d() * x[j];
  switch (kind) {
    case Kind::Eq0:
      return s == 0.0;
    case Kind::Ge0:
      return s >= 0.0;
    case Kind::Gt0:
      return s > 0.0;
  }
  return false;
}

bool Indicator::holds(std::span<const Rational> x) const {
  Rational s = affine.offset;
  for (std::size_t j = 0; j < affine.normal.size(); ++j) s += affine.normal[j] * x[j];
  return kind_holds(kind, s);
}

double AmnTermSet::evaluate(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& term : terms) {
    if (!std::all_of(term.factors.begin(), term.factors.end(), [&](const Indicator& f) { return f.holds(x); }))
      continue;
    sum += term.rcoef.get_d() * term.q.evaluate(x);
  }
  return sum;
}

Rational AmnTermSet::evaluate(std::span<const Rational> x) const {
  Rational sum = 0;
  for (const auto& term : terms) {
    if (!std::all_of(term.factors.begin(), term.factors.end(), [&](const Indicator& f) { return f.holds(x); }))
      continue;
    sum += term.rcoef * term.q.evaluate(x);
  }
  return sum;
}

AmnTermSet& AmnTermSet::operator+=(const AmnTermSet& rhs) {
  if (rhs.dim != dim || rhs.a != a || rhs.b != b) throw std::invalid_argument("term sets live on different boxes");
  terms.insert(terms.end(), rhs.terms.begin(), rhs.terms.end());
  return *this;
}

AmnTermSet eliminate_var(const AmnTermSet& ts, std::size_t k) { return to_terms(from_terms(ts).eliminate(k)); }

Rational integrate_all(const AmnTermSet& ts, std::span<const std::size_t> order) {
  return integrate_cells(from_terms(ts), order)[0];
}

AmnTermSet risk_integrand(const Problem& problem, const ParamVector& theta) {
  return to_terms(build(problem, theta, false));
}

Rational risk_by_elimination_exact(const Problem& problem, const ParamVector& theta) {
  return integrate_cells(build(problem, theta, false), {})[0];
}

double risk_by_elimination(const Problem& problem, const ParamVector& theta) {
  return risk_by_elimination_exact(problem, theta).get_d();
}

ExactRiskAndGradient evaluate_by_elimination_exact(const Problem& problem, const ParamVector& theta) {
  auto vals = integrate_cells(build(problem, theta, true), {});
  ExactRiskAndGradient out;
  out.risk = vals[0];
  out.gradient.assign(vals.begin() + 1, vals.end());
  return out;
}

RiskAndGradient evaluate_by_elimination(const Problem& problem, const ParamVector& theta) {
  const auto exact = evaluate_by_elimination_exact(problem, theta);
  RiskAndGradient out;
  out.risk = exact.risk.get_d();
  for (const auto& g : exact.gradient) out.gradient.push_back(g.get_d());
  return out;
}

}  // namespace reluflow

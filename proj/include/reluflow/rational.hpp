#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

namespace reluflow {

using Rational = mpq_class;

// Parses "p/q", "p", or a plain decimal literal ("0.25", "-1e-3") exactly.
// Throws std::invalid_argument on malformed input or a zero denominator.
Rational parse_rational(std::string_view text);

// Canonical "p/q" form ("p" when q == 1).
std::string to_string(const Rational& q);

// Exact conversion; every finite binary64 value is a dyadic rational.
Rational from_double(double x);

inline double to_double(const Rational& q) { return q.get_d(); }

// Sign in {-1, 0, 1}.
inline int sign(const Rational& q) { return sgn(q); }

}  // namespace reluflow

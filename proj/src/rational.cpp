#include "reluflow/rational.hpp"

#include <cmath>
#include <stdexcept>

namespace reluflow {

namespace {

std::string normalize_minus(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    // U+2212 MINUS SIGN, as typeset in hand-written configs.
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x88 &&
        static_cast<unsigned char>(text[i + 2]) == 0x92) {
      out.push_back('-');
      i += 2;
      continue;
    }
    if (text[i] == ' ' || text[i] == '\t') continue;
    out.push_back(text[i]);
  }
  return out;
}

Rational parse_decimal(const std::string& s) {
  // [sign] digits [. digits] [e|E [sign] digits]
  std::size_t pos = 0;
  bool negative = false;
  if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) negative = s[pos++] == '-';
  std::string digits;
  long long frac_digits = 0;
  bool seen_dot = false;
  bool any_digit = false;
  for (; pos < s.size(); ++pos) {
    const char ch = s[pos];
    if (ch >= '0' && ch <= '9') {
      digits.push_back(ch);
      any_digit = true;
      if (seen_dot) ++frac_digits;
    } else if (ch == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!any_digit) throw std::invalid_argument("malformed rational literal '" + s + "'");
  long long exponent = 0;
  if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
    ++pos;
    std::size_t used = 0;
    try {
      exponent = std::stoll(s.substr(pos), &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed exponent in '" + s + "'");
    }
    pos += used;
  }
  if (pos != s.size()) throw std::invalid_argument("malformed rational literal '" + s + "'");
  if (exponent > 4000 || exponent < -4000) throw std::invalid_argument("exponent out of range in '" + s + "'");

  mpz_class num(digits, 10);
  const long long shift = exponent - frac_digits;
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(shift < 0 ? -shift : shift));
  Rational q = shift >= 0 ? Rational(num * scale) : Rational(num, scale);
  q.canonicalize();
  return negative ? Rational(-q) : q;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  const std::string s = normalize_minus(text);
  if (s.empty()) throw std::invalid_argument("empty rational literal");
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);

  const std::string num = s.substr(0, slash);
  const std::string den = s.substr(slash + 1);
  auto is_integer = [](const std::string& t, bool allow_sign) {
    std::size_t i = 0;
    if (allow_sign && i < t.size() && (t[i] == '+' || t[i] == '-')) ++i;
    if (i == t.size()) return false;
    for (; i < t.size(); ++i)
      if (t[i] < '0' || t[i] > '9') return false;
    return true;
  };
  if (!is_integer(num, true) || !is_integer(den, true))
    throw std::invalid_argument("malformed rational literal '" + s + "'");
  mpz_class n(num[0] == '+' ? num.substr(1) : num, 10);
  mpz_class d(den[0] == '+' ? den.substr(1) : den, 10);
  if (d == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
  Rational q(n, d);
  q.canonicalize();
  return q;
}

std::string to_string(const Rational& q) {
  Rational c(q);
  c.canonicalize();
  return c.get_str(10);
}

Rational from_double(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("cannot convert non-finite value to a rational");
  Rational q;
  mpq_set_d(q.get_mpq_t(), x);
  return q;
}

}  // namespace reluflow

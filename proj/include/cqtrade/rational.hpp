#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "cqtrade/error.hpp"

namespace cqtrade {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
  return Rational(BigInt(num), BigInt(den));
}

/// Renders "p/q", or "p" when the denominator is 1.
inline std::string to_string(const Rational& r) {
  const BigInt& num = boost::multiprecision::numerator(r);
  const BigInt& den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

inline Rational parse_rational(std::string_view text) {
  auto parse_int = [&](std::string_view s) -> BigInt {
    if (s.empty()) throw ValidationError("empty number in rational '" + std::string(text) + "'");
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) throw ValidationError("bad rational '" + std::string(text) + "'");
    for (std::size_t j = i; j < s.size(); ++j) {
      if (s[j] < '0' || s[j] > '9') throw ValidationError("bad rational '" + std::string(text) + "'");
    }
    return BigInt(std::string(s));
  };
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(text));
  BigInt den = parse_int(text.substr(slash + 1));
  if (den == 0) throw ValidationError("zero denominator in '" + std::string(text) + "'");
  return Rational(parse_int(text.substr(0, slash)), den);
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline BigInt floor_of(const Rational& r) {
  BigInt q = boost::multiprecision::numerator(r) / boost::multiprecision::denominator(r);
  if (r < 0 && Rational(q) != r) q -= 1;
  return q;
}

inline BigInt ceil_of(const Rational& r) {
  BigInt f = floor_of(r);
  return Rational(f) == r ? f : f + 1;
}

/// Closest rational with the given denominator (used to pin measured
/// quantities such as log ratios onto an exact grid).
inline Rational round_to_grid(double value, std::int64_t denominator) {
  return make_rational(static_cast<std::int64_t>(std::llround(value * static_cast<double>(denominator))),
                       denominator);
}

/// A product of powers  prod_i base_i ^ exponent_i  with positive rational
/// bases and rational exponents. Comparisons are exact: a long-double fast
/// path decides clear cases, otherwise both sides are raised to the lcm of
/// the exponent denominators and compared as big integers.
class PowerProduct {
 public:
  struct Factor {
    Rational base;
    Rational exponent;
  };

  PowerProduct() = default;

  static PowerProduct of(Rational base, Rational exponent = 1) {
    PowerProduct p;
    p.mul(std::move(base), std::move(exponent));
    return p;
  }

  PowerProduct& mul(Rational base, Rational exponent) {
    if (base <= 0) {
      zero_ = zero_ || exponent > 0;
      if (exponent == 0) return *this;
      if (exponent < 0) throw ValidationError("division by zero in power product");
      return *this;
    }
    if (exponent != 0 && base != 1) factors_.push_back({std::move(base), std::move(exponent)});
    return *this;
  }

  bool is_zero() const { return zero_; }
  const std::vector<Factor>& factors() const { return factors_; }

  long double log_value() const {
    if (zero_) return -INFINITY;
    long double s = 0;
    for (const auto& f : factors_) s += std::log(f.base.convert_to<long double>()) * f.exponent.convert_to<long double>();
    return s;
  }

  double value() const { return zero_ ? 0.0 : static_cast<double>(std::exp(log_value())); }

  /// Returns -1, 0, +1 for lhs <, ==, > rhs.
  friend int compare(const PowerProduct& lhs, const PowerProduct& rhs) {
    if (lhs.zero_ || rhs.zero_) {
      if (lhs.zero_ && rhs.zero_) return 0;
      return lhs.zero_ ? -1 : 1;
    }
    long double diff = lhs.log_value() - rhs.log_value();
    if (diff > 1e-9L) return 1;
    if (diff < -1e-9L) return -1;
    return exact_compare(lhs, rhs);
  }

  friend bool operator>(const PowerProduct& a, const PowerProduct& b) { return compare(a, b) > 0; }
  friend bool operator<(const PowerProduct& a, const PowerProduct& b) { return compare(a, b) < 0; }
  friend bool operator==(const PowerProduct& a, const PowerProduct& b) { return compare(a, b) == 0; }

 private:
  static int exact_compare(const PowerProduct& lhs, const PowerProduct& rhs) {
    BigInt l = 1;
    auto fold = [&](const PowerProduct& p) {
      for (const auto& f : p.factors_) {
        l = boost::multiprecision::lcm(l, boost::multiprecision::denominator(f.exponent));
      }
    };
    fold(lhs);
    fold(rhs);
    // lhs_num/lhs_den vs rhs_num/rhs_den after raising to power l.
    BigInt ln = 1, ld = 1, rn = 1, rd = 1;
    auto accumulate = [&](const PowerProduct& p, BigInt& num, BigInt& den) {
      for (const auto& f : p.factors_) {
        Rational e = f.exponent * Rational(l);
        BigInt k = boost::multiprecision::numerator(e);
        BigInt bn = boost::multiprecision::numerator(f.base);
        BigInt bd = boost::multiprecision::denominator(f.base);
        if (k < 0) {
          std::swap(bn, bd);
          k = -k;
        }
        unsigned kk = k.convert_to<unsigned>();
        num *= boost::multiprecision::pow(bn, kk);
        den *= boost::multiprecision::pow(bd, kk);
      }
    };
    accumulate(lhs, ln, ld);
    accumulate(rhs, rn, rd);
    BigInt a = ln * rd;
    BigInt b = rn * ld;
    return a < b ? -1 : (a > b ? 1 : 0);
  }

  std::vector<Factor> factors_;
  bool zero_ = false;
};

}  // namespace cqtrade

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rkforge {

/// Exact rational with 64-bit numerator/denominator, always normalized
/// (gcd 1, denominator positive). Intermediate products use 128-bit
/// arithmetic; overflow of the normalized result throws.
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  Rational operator-() const { return Rational(-num_, den_); }
  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b) = default;

  /// "p/q", or just "p" when the denominator is 1.
  std::string to_string() const;

  /// Accepts "p/q", "p", or a decimal literal (parsed via strtod and
  /// converted with best_approximation when it is not integral).
  static Rational parse(std::string_view text);

  /// Best rational approximation to x with denominator <= max_den
  /// (continued fractions, including semiconvergents).
  static Rational best_approximation(double x, std::int64_t max_den);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace rkforge

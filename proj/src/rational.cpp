#include "rkforge/rational.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rkforge {

namespace {

using Wide = __int128;

std::int64_t narrow(Wide v) {
  if (v > std::numeric_limits<std::int64_t>::max() ||
      v < std::numeric_limits<std::int64_t>::min()) {
    throw std::overflow_error("rational overflow");
  }
  return static_cast<std::int64_t>(v);
}

void normalize(Wide& num, Wide& den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  Wide a = num < 0 ? -num : num;
  Wide b = den;
  while (b != 0) {
    Wide t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
}

Rational from_wide(Wide num, Wide den) {
  normalize(num, den);
  return Rational(narrow(num), narrow(den));
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  Wide n = num, d = den;
  normalize(n, d);
  num_ = narrow(n);
  den_ = narrow(d);
}

Rational operator+(const Rational& a, const Rational& b) {
  return from_wide(Wide(a.num_) * b.den_ + Wide(b.num_) * a.den_, Wide(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return from_wide(Wide(a.num_) * b.den_ - Wide(b.num_) * a.den_, Wide(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return from_wide(Wide(a.num_) * b.num_, Wide(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw std::invalid_argument("rational division by zero");
  return from_wide(Wide(a.num_) * b.den_, Wide(a.den_) * b.num_);
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::parse(std::string_view text) {
  std::string s(text);
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    std::size_t pos1 = 0, pos2 = 0;
    std::int64_t p = std::stoll(s.substr(0, slash), &pos1);
    std::int64_t q = std::stoll(s.substr(slash + 1), &pos2);
    if (pos1 != slash || pos2 != s.size() - slash - 1) {
      throw std::invalid_argument("malformed rational: " + s);
    }
    return Rational(p, q);
  }
  if (s.find_first_of(".eE") == std::string::npos) {
    std::size_t pos = 0;
    std::int64_t p = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("malformed rational: " + s);
    return Rational(p);
  }
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw std::invalid_argument("malformed number: " + s);
  return best_approximation(v, std::int64_t(1) << 40);
}

Rational Rational::best_approximation(double x, std::int64_t max_den) {
  if (max_den < 1) throw std::invalid_argument("max denominator must be positive");
  if (!std::isfinite(x)) throw std::invalid_argument("cannot rationalize non-finite value");
  const bool neg = x < 0;
  double v = std::fabs(x);

  // Continued-fraction convergents p/q until the denominator cap.
  std::int64_t p_prev = 0, q_prev = 1;  // p_{-2}/q_{-2}
  std::int64_t p_cur = 1, q_cur = 0;    // p_{-1}/q_{-1}: first step gives floor(v)/1
  double frac = v;
  std::int64_t last_a = 0;
  for (int iter = 0; iter < 64; ++iter) {
    double af = std::floor(frac);
    if (af > 9e18) break;
    std::int64_t a = static_cast<std::int64_t>(af);
    Wide pn = Wide(a) * p_cur + p_prev;
    Wide qn = Wide(a) * q_cur + q_prev;
    if (qn > max_den) {
      last_a = a;
      break;
    }
    p_prev = p_cur;
    q_prev = q_cur;
    p_cur = narrow(pn);
    q_cur = narrow(qn);
    last_a = 0;
    double rem = frac - af;
    if (rem < 1e-18) break;
    frac = 1.0 / rem;
  }
  if (q_cur == 0) throw std::invalid_argument("value too large to rationalize");
  Rational best(neg ? -p_cur : p_cur, q_cur);
  if (last_a > 0 && q_cur > 0) {
    // Semiconvergent with the largest admissible partial quotient.
    std::int64_t k = (max_den - q_prev) / q_cur;
    if (k > 0) {
      Wide ps = Wide(k) * p_cur + p_prev;
      Wide qs = Wide(k) * q_cur + q_prev;
      Rational semi(narrow(neg ? -ps : ps), narrow(qs));
      if (std::fabs(semi.to_double() - x) < std::fabs(best.to_double() - x)) best = semi;
    }
  }
  return best;
}

}  // namespace rkforge

#pragma once

#include <compare>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hytl {

/// Exact rational time arithmetic for the timed abstraction and observer.
/// Numerators stay small (times quantized to a grid), so int64 with checked
/// normalization is plenty.
class Rational {
 public:
  constexpr Rational() : num_(0), den_(1) {}
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}
  Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) { normalize(); }

  static Rational from_decimal_string(const std::string& s);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  Rational operator-() const { return Rational(-num_, den_); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(a.num_ * b.num_, a.den_ * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return Rational(a.num_ * b.den_, a.den_ * b.num_);
  }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    // Cross-multiply in 128 bits; denominators are positive after normalize().
    __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
    __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  /// Parse "n" or "n/d".
  static Rational parse(const std::string& s) {
    auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(std::stoll(s));
    return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
  }

  static Rational min(const Rational& a, const Rational& b) { return a < b ? a : b; }
  static Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

 private:
  void normalize() {
    if (den_ == 0) throw std::domain_error("rational with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    std::int64_t g = std::gcd(std::llabs(num_), den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
    if (num_ == 0) den_ = 1;
  }

  std::int64_t num_;
  std::int64_t den_;
};

/// Round a continuous time onto the rational grid with quantum q.
/// mode < 0 rounds down, mode > 0 rounds up, mode == 0 rounds to nearest.
inline Rational quantize(double t, const Rational& q, int mode) {
  double steps = t / q.to_double();
  std::int64_t k;
  if (mode < 0)
    k = static_cast<std::int64_t>(std::floor(steps + 1e-12));
  else if (mode > 0)
    k = static_cast<std::int64_t>(std::ceil(steps - 1e-12));
  else
    k = static_cast<std::int64_t>(std::floor(steps + 0.5));
  return Rational(k) * q;
}

inline Rational Rational::from_decimal_string(const std::string& s) {
  auto dot = s.find('.');
  if (dot == std::string::npos) return Rational(std::stoll(s));
  std::string whole = s.substr(0, dot);
  std::string frac = s.substr(dot + 1);
  bool neg = !whole.empty() && whole[0] == '-';
  std::int64_t w = whole.empty() || whole == "-" ? 0 : std::stoll(whole);
  std::int64_t den = 1;
  for (size_t i = 0; i < frac.size(); ++i) den *= 10;
  std::int64_t f = frac.empty() ? 0 : std::stoll(frac);
  std::int64_t n = std::llabs(w) * den + f;
  return Rational(neg || w < 0 ? -n : n, den);
}

}  // namespace hytl

template <>
struct std::hash<hytl::Rational> {
  size_t operator()(const hytl::Rational& r) const {
    return std::hash<std::int64_t>()(r.num()) * 1000003u ^ std::hash<std::int64_t>()(r.den());
  }
};

#include <catch2/catch_amalgamated.hpp>

#include "hytl/rational.hpp"

using hytl::Rational;

TEST_CASE("rational normalization and arithmetic") {
  CHECK(Rational(6, 4) == Rational(3, 2));
  CHECK(Rational(-6, 4) == Rational(-3, 2));
  CHECK(Rational(6, -4) == Rational(-3, 2));
  CHECK(Rational(0, 5) == Rational(0));
  CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
  CHECK(Rational(17) - Rational(29) == Rational(-12));
  CHECK(Rational(1, 10) * Rational(5) == Rational(1, 2));
  CHECK(Rational(1, 2) / Rational(1, 4) == Rational(2));
  CHECK_THROWS_AS(Rational(1, 0), std::domain_error);
  CHECK_THROWS_AS(Rational(1) / Rational(0), std::domain_error);
}

TEST_CASE("rational ordering") {
  CHECK(Rational(1, 3) < Rational(1, 2));
  CHECK(Rational(-19) < Rational(-12));
  CHECK(Rational(7, 10) <= Rational(7, 10));
  CHECK(Rational::min(Rational(12), Rational(19)) == Rational(12));
  CHECK(Rational::max(Rational(-1, 2), Rational(0)) == Rational(0));
}

TEST_CASE("rational printing and parsing") {
  CHECK(Rational(17).str() == "17");
  CHECK(Rational(-12, 10).str() == "-6/5");
  CHECK(Rational::parse("17") == Rational(17));
  CHECK(Rational::parse("-6/5") == Rational(-6, 5));
  CHECK(Rational::from_decimal_string("1.35") == Rational(27, 20));
  CHECK(Rational::from_decimal_string("-0.1") == Rational(-1, 10));
}

TEST_CASE("quantization rounds outward on demand") {
  Rational q(1, 10);
  CHECK(hytl::quantize(1.3066, q, -1) == Rational(13, 10));
  CHECK(hytl::quantize(1.3966, q, +1) == Rational(14, 10));
  CHECK(hytl::quantize(1.34999, q, 0) == Rational(13, 10));
  CHECK(hytl::quantize(0.1, q, -1) == Rational(1, 10));
  CHECK(hytl::quantize(0.1, q, +1) == Rational(1, 10));
  CHECK(hytl::quantize(0.0004, Rational(1, 50), 0) == Rational(0));
}

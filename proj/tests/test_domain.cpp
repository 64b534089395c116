#include <doctest.h>

#include <cmath>
#include <limits>

#include "mmpn/refraction.hpp"
#include "mmpn/rng.hpp"

using namespace mmpn;

TEST_CASE("spherical equivalent is sphere plus half cylinder") {
  CHECK(spherical_equivalent({-2.0, -1.0, 0.0}) == doctest::Approx(-2.5));
  CHECK(spherical_equivalent({0.0, 0.0, 0.0}) == doctest::Approx(0.0));
  CHECK(spherical_equivalent({1.25, -0.50, 0.0}) == doctest::Approx(1.0));
}

TEST_CASE("spherical equivalent rejects non-finite input") {
  double inf = std::numeric_limits<double>::infinity();
  double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(spherical_equivalent({inf, 0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(spherical_equivalent({0.0, nan, 0.0}), ValidationError);
}

TEST_CASE("SER categories at the stated cutoffs") {
  CHECK(classify_ser(-0.5) == MyopiaCategory::LowMyopia);
  CHECK(classify_ser(-6.01) == MyopiaCategory::HighMyopia);
  CHECK(classify_ser(3.5) == MyopiaCategory::Hyperopia);

  // Boundary assignments.
  CHECK(classify_ser(-6.0) == MyopiaCategory::ModerateMyopia);
  CHECK(classify_ser(-3.0) == MyopiaCategory::ModerateMyopia);
  CHECK(classify_ser(3.0) == MyopiaCategory::EmmetropiaOrLowHyperopia);
  CHECK(classify_ser(0.0) == MyopiaCategory::EmmetropiaOrLowHyperopia);
  CHECK(classify_ser(-2.0) == MyopiaCategory::LowMyopia);
}

TEST_CASE("myopia predicates") {
  CHECK(is_myopic(-0.5));
  CHECK_FALSE(is_high_myopic(-6.0));
  CHECK(is_myopic(-6.0));
  CHECK(is_high_myopic(-6.0000001));
  CHECK_FALSE(is_myopic(0.0));
  CHECK_FALSE(is_high_myopic(0.0));
}

TEST_CASE("annual progression is the SER difference") {
  CHECK(annual_progression(-1.0, -1.8) == doctest::Approx(-0.8));
  CHECK(annual_progression(0.5, 0.5) == doctest::Approx(0.0));
  CHECK(annual_progression(-2.0, -1.5) == doctest::Approx(0.5));
}

TEST_CASE("progression labels") {
  CHECK(progression_label({-1.0}, true) == ProgressionLabel::Rapid);
  CHECK(progression_label({-0.2}, true) == ProgressionLabel::NonProgressive);
  CHECK(progression_label({-0.6}, true) == ProgressionLabel::Intermediate);
  // Rapid requires the myopic flag; the rate alone lands in the gap band.
  CHECK(progression_label({-1.0}, false) == ProgressionLabel::Intermediate);
  CHECK(progression_label({-0.8, -1.2}, true) == ProgressionLabel::Rapid);
  CHECK_THROWS_AS(progression_label({}, true), ValidationError);
}

TEST_CASE("classification is total and consistent with the predicates") {
  // Exhaustive scan over 1e5 grid values in [-10, +10].
  const int kSteps = 100000;
  for (int i = 0; i <= kSteps; ++i) {
    double s = -10.0 + 20.0 * double(i) / double(kSteps);
    MyopiaCategory c = classify_ser(s);
    bool in_myopic_band = c == MyopiaCategory::HighMyopia || c == MyopiaCategory::ModerateMyopia ||
                          c == MyopiaCategory::LowMyopia;
    REQUIRE(is_myopic(s) == in_myopic_band);
    REQUIRE(is_high_myopic(s) == (c == MyopiaCategory::HighMyopia));
  }
}

TEST_CASE("spherical equivalent is linear in the refraction") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Refraction r1{rng.uniform(-8, 8), rng.uniform(-3, 0), rng.uniform(0, 180)};
    Refraction r2{rng.uniform(-8, 8), rng.uniform(-3, 0), rng.uniform(0, 180)};
    double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    Refraction combo{a * r1.sphere + b * r2.sphere, a * r1.cylinder + b * r2.cylinder, 0.0};
    double lhs = spherical_equivalent(combo);
    double rhs = a * spherical_equivalent(r1) + b * spherical_equivalent(r2);
    REQUIRE(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mmpn/errors.hpp"

// Refraction arithmetic and the myopia category rules. Everything here is a
// pure function over diopters; more negative SER means more myopic.
namespace mmpn {

struct Refraction {
  double sphere = 0.0;    // D
  double cylinder = 0.0;  // D, <= 0 by convention
  double axis = 0.0;      // degrees in [0, 180)
};

enum class MyopiaCategory {
  HighMyopia,              // SER < -6.0
  ModerateMyopia,          // -6.0 <= SER <= -3.0
  LowMyopia,               // -3.0 <  SER <= -0.5
  EmmetropiaOrLowHyperopia,// -0.5 <  SER <= +3.0
  Hyperopia,               // SER > +3.0
};

enum class ProgressionLabel { Rapid, Intermediate, NonProgressive };

inline const char* to_string(MyopiaCategory c) {
  switch (c) {
    case MyopiaCategory::HighMyopia: return "high_myopia";
    case MyopiaCategory::ModerateMyopia: return "moderate_myopia";
    case MyopiaCategory::LowMyopia: return "low_myopia";
    case MyopiaCategory::EmmetropiaOrLowHyperopia: return "emmetropia_or_low_hyperopia";
    case MyopiaCategory::Hyperopia: return "hyperopia";
  }
  return "?";
}

inline const char* to_string(ProgressionLabel l) {
  switch (l) {
    case ProgressionLabel::Rapid: return "rapid";
    case ProgressionLabel::Intermediate: return "intermediate";
    case ProgressionLabel::NonProgressive: return "non_progressive";
  }
  return "?";
}

// SER = sphere + cylinder / 2.
inline double spherical_equivalent(const Refraction& r) {
  if (!std::isfinite(r.sphere) || !std::isfinite(r.cylinder)) {
    throw ValidationError("spherical_equivalent: non-finite refraction");
  }
  return r.sphere + r.cylinder / 2.0;
}

inline void check_ser(double ser, const char* who) {
  if (!std::isfinite(ser)) throw ValidationError(std::string(who) + ": non-finite SER");
}

// Boundary assignments: -6.0 is moderate (high myopia is strictly below
// -6.0), -3.0 is moderate, -0.5 is low myopia ("-0.5 D or less" is myopic),
// +3.0 is emmetropia/low hyperopia.
inline MyopiaCategory classify_ser(double ser) {
  check_ser(ser, "classify_ser");
  if (ser < -6.0) return MyopiaCategory::HighMyopia;
  if (ser <= -3.0) return MyopiaCategory::ModerateMyopia;
  if (ser <= -0.5) return MyopiaCategory::LowMyopia;
  if (ser <= 3.0) return MyopiaCategory::EmmetropiaOrLowHyperopia;
  return MyopiaCategory::Hyperopia;
}

inline bool is_myopic(double ser) {
  check_ser(ser, "is_myopic");
  return ser <= -0.5;
}

inline bool is_high_myopic(double ser) {
  check_ser(ser, "is_high_myopic");
  return ser < -6.0;
}

// Change in SER over one year; negative means a myopic shift.
inline double annual_progression(double prev_ser, double next_ser) {
  check_ser(prev_ser, "annual_progression");
  check_ser(next_ser, "annual_progression");
  return next_ser - prev_ser;
}

// Mean myopic-shift magnitude over the given annual deltas. Shifts toward
// myopia are negative deltas, so magnitude = -mean(delta). Rapid needs both
// the >0.75 D/yr rate and a myopic subject; the 0.50..0.75 band is the gap
// between the two defined extremes.
inline ProgressionLabel progression_label(const std::vector<double>& annual_deltas, bool myopic) {
  if (annual_deltas.empty()) throw ValidationError("progression_label: no annual deltas");
  double sum = 0.0;
  for (double d : annual_deltas) {
    if (!std::isfinite(d)) throw ValidationError("progression_label: non-finite delta");
    sum += d;
  }
  double magnitude = -(sum / double(annual_deltas.size()));
  if (magnitude > 0.75 && myopic) return ProgressionLabel::Rapid;
  if (magnitude < 0.50) return ProgressionLabel::NonProgressive;
  return ProgressionLabel::Intermediate;
}

}  // namespace mmpn

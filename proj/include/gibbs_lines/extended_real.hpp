#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace gibbs_lines {

// Point of the extended real line [-inf, +inf]. Boundary curves take
// infinite values, so the infinities are carried as explicit states rather
// than IEEE specials that could leak into arithmetic unchecked.
class ExtendedReal {
 public:
  ExtendedReal() : value_(0.0) {}

  // Implicit on purpose: finite doubles promote transparently. IEEE
  // infinities map to the tagged states, NaN is rejected.
  ExtendedReal(double v) : value_(v) {
    if (std::isnan(v)) throw std::invalid_argument("ExtendedReal: NaN");
  }

  static ExtendedReal neg_inf() { return ExtendedReal(-INFINITY); }
  static ExtendedReal pos_inf() { return ExtendedReal(INFINITY); }

  bool finite() const { return std::isfinite(value_); }
  bool is_neg_inf() const { return std::isinf(value_) && value_ < 0; }
  bool is_pos_inf() const { return std::isinf(value_) && value_ > 0; }

  // Finite payload. Querying an infinite value is a logic error.
  double value() const {
    if (!finite()) throw std::logic_error("ExtendedReal: value() on " + str());
    return value_;
  }

  // Raw double, +/-HUGE_VAL for the infinite states.
  double as_double() const { return value_; }

  std::string str() const {
    if (is_pos_inf()) return "inf";
    if (is_neg_inf()) return "-inf";
    return std::to_string(value_);
  }

  friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.value_ == b.value_;
  }
  friend bool operator<(const ExtendedReal& a, const ExtendedReal& b) {
    return a.value_ < b.value_;
  }
  friend bool operator<=(const ExtendedReal& a, const ExtendedReal& b) {
    return a.value_ <= b.value_;
  }

  // Difference with the usual extended-line conventions; inf - inf of the
  // same sign has no value and throws.
  friend ExtendedReal operator-(const ExtendedReal& a, const ExtendedReal& b) {
    if ((a.is_pos_inf() && b.is_pos_inf()) ||
        (a.is_neg_inf() && b.is_neg_inf()))
      throw std::domain_error("ExtendedReal: inf - inf");
    return ExtendedReal(a.value_ - b.value_);
  }

 private:
  double value_;
};

}  // namespace gibbs_lines

#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "nonplanar/dual.hpp"

namespace nonplanar {

/// Clamped cubic spline through (s_i, f_i), C2 on [s_0, s_N].
///
/// The clamp slopes are the secant slopes of the first and last intervals, so
/// linear data is reproduced exactly. Evaluation is templated so a dual-number
/// query parameter differentiates through the piecewise polynomial. Queries
/// outside the knot range extend the end polynomials.
class CubicSpline {
 public:
  CubicSpline() = default;
  /// Throws std::invalid_argument on fewer than 2 knots, size mismatch, or
  /// knots that are not strictly increasing.
  CubicSpline(std::vector<double> knots, std::vector<double> values);

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  double front() const { return knots_.front(); }
  double back() const { return knots_.back(); }
  bool empty() const { return knots_.empty(); }

  template <class T>
  T value(const T& s) const {
    const std::size_t i = interval(value_of(s));
    const T t = s - knots_[i];
    return a_[i] + t * (b_[i] + t * (c_[i] + t * d_[i]));
  }

  template <class T>
  T derivative(const T& s) const {
    const std::size_t i = interval(value_of(s));
    const T t = s - knots_[i];
    return b_[i] + t * (2.0 * c_[i] + t * (3.0 * d_[i]));
  }

  template <class T>
  T second_derivative(const T& s) const {
    const std::size_t i = interval(value_of(s));
    const T t = s - knots_[i];
    return 2.0 * c_[i] + t * (6.0 * d_[i]);
  }

  double third_derivative(double s) const { return 6.0 * d_[interval(s)]; }

  /// Integral of the spline from knots().front() to s.
  template <class T>
  T integral(const T& s) const {
    const std::size_t i = interval(value_of(s));
    const T t = s - knots_[i];
    return cumulative_[i] +
           t * (a_[i] + t * (b_[i] / 2.0 + t * (c_[i] / 3.0 + t * (d_[i] / 4.0))));
  }

  /// Index of the polynomial piece used at s.
  std::size_t interval(double s) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
    const auto idx = static_cast<std::ptrdiff_t>(it - knots_.begin()) - 1;
    const auto last = static_cast<std::ptrdiff_t>(knots_.size()) - 2;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, last));
  }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> a_, b_, c_, d_;
  std::vector<double> cumulative_;
};

}  // namespace nonplanar

#pragma once

#include <cstddef>
#include <vector>

namespace subjet {

// Piecewise cubic Hermite interpolant on a sorted knot vector.
//
// Slopes may be supplied (analytic data) or estimated with the
// Fritsch-Carlson monotone scheme (sampled data). Either way the curve is
// C^1 and, on monotone data, monotone. Evaluation outside the knot range
// clamps to the end values (derivative zero there).
class CubicHermite {
 public:
  CubicHermite() = default;

  // Knots must be strictly increasing and hold at least two entries.
  CubicHermite(std::vector<double> x, std::vector<double> y,
               std::vector<double> slope);

  // Fritsch-Carlson slope estimation; keeps monotone data monotone.
  static CubicHermite monotone(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  double deriv(double x) const;
  // Second derivative within the containing interval. Discontinuous at
  // knots; used only for Lipschitz seminorm estimates.
  double deriv2(double x) const;

  std::size_t size() const { return x_.size(); }
  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }
  const std::vector<double>& slopes() const { return d_; }

  // Integral of the interpolant from the first knot to x, clamped
  // extension outside. Exact (5-point Gauss per interval).
  double integral_from_front(double x) const;

 private:
  std::size_t interval(double x) const;
  void build_cumulative();

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> d_;
  std::vector<double> cum_;  // integral over [x_0, x_i]
  bool uniform_ = false;
  double dx_ = 0.0;
};

}  // namespace subjet

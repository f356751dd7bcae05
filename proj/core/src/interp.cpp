#include "subjet/interp.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "subjet/errors.hpp"
#include "subjet/quadrature.hpp"

namespace subjet {

CubicHermite::CubicHermite(std::vector<double> x, std::vector<double> y,
                           std::vector<double> slope)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(slope)) {
  if (x_.size() < 2 || x_.size() != y_.size() || x_.size() != d_.size())
    throw DomainError("interpolant needs >= 2 samples with matching arrays");
  for (std::size_t i = 1; i < x_.size(); ++i)
    if (!(x_[i] > x_[i - 1]))
      throw DomainError("interpolant knots must be strictly increasing");
  // Uniform-grid fast path; tolerance covers accumulated round-off.
  const double h0 = x_[1] - x_[0];
  uniform_ = true;
  for (std::size_t i = 1; i + 1 < x_.size(); ++i) {
    if (std::abs((x_[i + 1] - x_[i]) - h0) > 1e-12 * std::abs(h0)) {
      uniform_ = false;
      break;
    }
  }
  dx_ = h0;
  build_cumulative();
}

CubicHermite CubicHermite::monotone(std::vector<double> x,
                                    std::vector<double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n)
    throw DomainError("interpolant needs >= 2 samples with matching arrays");
  std::vector<double> d(n, 0.0);
  std::vector<double> del(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i)
    del[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  if (n == 2) {
    d[0] = d[1] = del[0];
  } else {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (del[i - 1] * del[i] <= 0.0) {
        d[i] = 0.0;
      } else {
        // Weighted harmonic mean keeps the interpolant monotone.
        const double h0 = x[i] - x[i - 1];
        const double h1 = x[i + 1] - x[i];
        const double w0 = 2.0 * h1 + h0;
        const double w1 = h1 + 2.0 * h0;
        d[i] = (w0 + w1) / (w0 / del[i - 1] + w1 / del[i]);
      }
    }
    // One-sided ends, clipped to preserve the first interval's monotonicity.
    auto endpoint = [](double h0, double h1, double d0, double d1) {
      double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (s * d0 <= 0.0)
        s = 0.0;
      else if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0))
        s = 3.0 * d0;
      return s;
    };
    d[0] = endpoint(x[1] - x[0], x[2] - x[1], del[0], del[1]);
    d[n - 1] = endpoint(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], del[n - 2],
                        del[n - 3]);
  }
  return CubicHermite(std::move(x), std::move(y), std::move(d));
}

std::size_t CubicHermite::interval(double x) const {
  const std::size_t n = x_.size();
  if (uniform_) {
    double f = (x - x_.front()) / dx_;
    if (f <= 0.0) return 0;
    auto i = static_cast<std::size_t>(f);
    return std::min(i, n - 2);
  }
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  if (it == x_.begin()) return 0;
  std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(i, n - 2);
}

double CubicHermite::operator()(double x) const {
  if (x <= x_.front()) return y_.front();
  if (x >= x_.back()) return y_.back();
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
}

double CubicHermite::deriv(double x) const {
  if (x <= x_.front() || x >= x_.back()) return 0.0;
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t;
  const double dh00 = (6.0 * t2 - 6.0 * t) / h;
  const double dh10 = 3.0 * t2 - 4.0 * t + 1.0;
  const double dh01 = (-6.0 * t2 + 6.0 * t) / h;
  const double dh11 = 3.0 * t2 - 2.0 * t;
  return dh00 * y_[i] + dh10 * d_[i] + dh01 * y_[i + 1] + dh11 * d_[i + 1];
}

double CubicHermite::deriv2(double x) const {
  if (x <= x_.front() || x >= x_.back()) return 0.0;
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double dd00 = (12.0 * t - 6.0) / (h * h);
  const double dd10 = (6.0 * t - 4.0) / h;
  const double dd01 = (-12.0 * t + 6.0) / (h * h);
  const double dd11 = (6.0 * t - 2.0) / h;
  return dd00 * y_[i] + dd10 * d_[i] + dd01 * y_[i + 1] + dd11 * d_[i + 1];
}

void CubicHermite::build_cumulative() {
  const std::size_t n = x_.size();
  cum_.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = x_[i + 1] - x_[i];
    // Exact for a cubic: h/2*(y0+y1) + h^2/12*(d0-d1).
    cum_[i + 1] = cum_[i] + 0.5 * h * (y_[i] + y_[i + 1]) +
                  h * h / 12.0 * (d_[i] - d_[i + 1]);
  }
}

double CubicHermite::integral_from_front(double x) const {
  if (x <= x_.front()) return (x - x_.front()) * y_.front();
  if (x >= x_.back()) return cum_.back() + (x - x_.back()) * y_.back();
  const std::size_t i = interval(x);
  double acc = cum_[i];
  acc += gauss_panel(
      [this](double s) { return (*this)(s); }, x_[i], x, 5);
  return acc;
}

}  // namespace subjet

#include "subjet/quadrature.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "subjet/errors.hpp"

namespace subjet {

namespace {

struct Rule {
  const double* x;
  const double* w;
  int n;
};

// Nodes and weights on [-1,1], nonnegative half only; x[0]=0 for odd n.
const double kX3[] = {0.0, 0.7745966692414834};
const double kW3[] = {0.8888888888888889, 0.5555555555555556};
const double kX4[] = {0.3399810435848563, 0.8611363115940526};
const double kW4[] = {0.6521451548625461, 0.3478548451374538};
const double kX5[] = {0.0, 0.5384693101056831, 0.9061798459386640};
const double kW5[] = {0.5688888888888889, 0.4786286704993665,
                      0.2369268850561891};
const double kX7[] = {0.0, 0.4058451513773972, 0.7415311855993945,
                      0.9491079123427585};
const double kW7[] = {0.4179591836734694, 0.3818300505051189,
                      0.2797053914892766, 0.1294849661688697};
const double kX15[] = {0.0,
                       0.2011940939974345,
                       0.3941513470775634,
                       0.5709721726085388,
                       0.7244177313601700,
                       0.8482065834104272,
                       0.9372733924007060,
                       0.9879925180204854};
const double kW15[] = {0.2025782419255613, 0.1984314853271116,
                       0.1861610000155622, 0.1662692058169939,
                       0.1395706779261543, 0.1071592204671719,
                       0.0703660474881081, 0.0307532419961173};

Rule rule_for(int n) {
  switch (n) {
    case 3:
      return {kX3, kW3, 3};
    case 4:
      return {kX4, kW4, 4};
    case 5:
      return {kX5, kW5, 5};
    case 7:
      return {kX7, kW7, 7};
    case 15:
      return {kX15, kW15, 15};
    default:
      throw DomainError("unsupported Gauss rule order");
  }
}

// Kronrod 15 extension of Gauss 7 for the adaptive driver.
const double kGkX[] = {0.0,
                       0.2077849550078985,
                       0.4058451513773972,
                       0.5860872354676911,
                       0.7415311855993945,
                       0.8648644233597691,
                       0.9491079123427585,
                       0.9914553711208126};
const double kGkWk[] = {0.2094821410847278, 0.2044329400752989,
                        0.1903505780647854, 0.1690047266392679,
                        0.1406532597155259, 0.1047900103222502,
                        0.0630920926299786, 0.0229353220105292};
// Gauss-7 weights aligned with the shared nodes (odd indices are
// Kronrod-only and carry zero Gauss weight).
const double kGkWg[] = {0.4179591836734694, 0.0, 0.3818300505051189, 0.0,
                        0.2797053914892766, 0.0, 0.1294849661688697, 0.0};

struct GkResult {
  double value;
  double err;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double k = 0.0;
  double g = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double fx = (i == 0) ? f(c) : f(c - h * kGkX[i]) + f(c + h * kGkX[i]);
    k += kGkWk[i] * fx;
    g += kGkWg[i] * fx;
  }
  k *= h;
  g *= h;
  const double err = std::pow(200.0 * std::abs(k - g), 1.5);
  return {k, std::min(err, std::abs(k - g) * 200.0)};
}

double adaptive_rec(const std::function<double(double)>& f, double a, double b,
                    double tol, int depth) {
  GkResult r = gk15(f, a, b);
  if (r.err <= tol || depth <= 0) {
    if (depth <= 0 && r.err > tol * 64.0)
      throw DomainError("adaptive quadrature failed to converge");
    return r.value;
  }
  const double c = 0.5 * (a + b);
  return adaptive_rec(f, a, c, 0.5 * tol, depth - 1) +
         adaptive_rec(f, c, b, 0.5 * tol, depth - 1);
}

}  // namespace

double gauss_panel(const std::function<double(double)>& f, double a, double b,
                   int n) {
  const Rule r = rule_for(n);
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const int half = (r.n + 1) / 2;
  double acc = 0.0;
  if (r.n % 2 == 1) acc += r.w[0] * f(c);
  for (int i = (r.n % 2 == 1) ? 1 : 0; i < half; ++i)
    acc += r.w[i] * (f(c - h * r.x[i]) + f(c + h * r.x[i]));
  return acc * h;
}

double gauss_composite(const std::function<double(double)>& f, double a,
                       double b, int n, int panels) {
  double acc = 0.0;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p)
    acc += gauss_panel(f, a + p * h, a + (p + 1) * h, n);
  return acc;
}

double adaptive_gk(const std::function<double(double)>& f, double a, double b,
                   double rel_tol, double abs_tol) {
  if (a == b) return 0.0;
  GkResult first = gk15(f, a, b);
  double tol = std::max(abs_tol, rel_tol * std::abs(first.value));
  if (tol == 0.0) tol = 1e-300;
  if (first.err <= tol) return first.value;
  return adaptive_rec(f, a, b, tol, 48);
}

double newton_bracketed(
    const std::function<void(double, double&, double&)>& fdf, double lo,
    double hi, double rel_tol, int max_iter) {
  double flo, fhi, dummy;
  fdf(lo, flo, dummy);
  if (flo == 0.0) return lo;
  fdf(hi, fhi, dummy);
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw DomainError("newton_bracketed: endpoints do not bracket a root");
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    double fx, dfx;
    fdf(x, fx, dfx);
    if (fx == 0.0) return x;
    if (fx * flo < 0.0) {
      hi = x;
    } else {
      lo = x;
      flo = fx;
    }
    double step = (dfx != 0.0) ? -fx / dfx : 0.0;
    double xn = x + step;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    const double scale = std::max({std::abs(x), std::abs(lo), std::abs(hi)});
    if (std::abs(xn - x) <= rel_tol * scale) return xn;
    x = xn;
  }
  return x;
}

double bisect(const std::function<double(double)>& f, double lo, double hi,
              double rel_tol, int max_iter) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  double fhi = f(hi);
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw DomainError("bisect: endpoints do not bracket a root");
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (fm * flo < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
    if (hi - lo <= rel_tol * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace subjet

#include "subjet/datum.hpp"

#include <algorithm>
#include <cmath>

#include "subjet/errors.hpp"
#include "subjet/quadrature.hpp"

namespace subjet {

namespace {

// Invert Phi_e(t, z) = c for t >= 0. Phi is strictly increasing in t.
double invert_first_integral(const ClosureTable& table, double c, double z) {
  if (c <= table.fb_weight(0.0, z))
    throw DomainError("first-integral level below the zero-momentum floor");
  double hi = table.sonic_momentum_sq(z);
  while (table.fb_weight(hi, z) < c) hi *= 2.0;
  auto fdf = [&](double t, double& f, double& df) {
    f = table.fb_weight(t, z) - c;
    df = table.fb_weight_dt(t, z);
  };
  return newton_bracketed(fdf, 0.0, hi, 1e-13);
}

// x(Q) for the first-integral level c: the height a profile at that level
// needs to climb from 0 to Q. Decreasing in c.
double height_of_level(const ClosureTable& table, double c, int panels) {
  const double q = table.q();
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = q * p / panels;
    const double b = q * (p + 1) / panels;
    acc += gauss_panel(
        [&](double z) {
          return 1.0 / std::sqrt(invert_first_integral(table, c, z));
        },
        a, b, 7);
  }
  return acc;
}

}  // namespace

double Psi1D::value(double x2) const {
  if (x2 <= 0.0) return 0.0;
  if (x2 >= height) return q;
  return std::clamp(v_of_x(x2), 0.0, q);
}

double Psi1D::slope(double x2) const {
  if (x2 <= 0.0 || x2 >= height) return 0.0;
  return v_of_x.deriv(x2);
}

Psi1D downstream_profile_1d(const ClosureTable& table, double lambda,
                            std::optional<double> fixed_height) {
  const double q = table.q();
  if (!(lambda > 0.0) ||
      !(lambda * lambda < table.sonic_momentum_sq(q)))
    throw DomainError(
        "momentum parameter must satisfy 0 < lambda^2 < sonic threshold at "
        "z = Q");

  // Floor for c: Phi(0, z) over the span, plus a safety margin so the
  // slope integrand stays finite.
  double c_floor = 0.0;
  const int scan = 256;
  for (int i = 0; i <= scan; ++i)
    c_floor = std::max(c_floor, table.fb_weight(0.0, q * i / scan));
  const double c_scale =
      std::max(1.0, table.fb_weight(table.sonic_momentum_sq(q), q));
  const double c_lo_base = c_floor + 1e-11 * c_scale;

  constexpr int kPanels = 48;
  auto solve_level = [&](double target_height) {
    // F(c) = height_of_level is strictly decreasing; bracket then bisect.
    double lo = c_lo_base;
    double f_lo = height_of_level(table, lo, kPanels);
    if (f_lo < target_height)
      throw DomainError("requested downstream height too tall for the data");
    double hi = std::max(2.0 * c_lo_base, c_scale);
    while (height_of_level(table, hi, kPanels) > target_height) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e12 * c_scale)
        throw InternalError("first-integral level search diverged");
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (height_of_level(table, mid, kPanels) > target_height)
        lo = mid;
      else
        hi = mid;
      if (hi - lo <= 1e-14 * hi) break;
    }
    return 0.5 * (lo + hi);
  };

  double height = fixed_height.value_or(std::min(0.9 * q / lambda, 0.9));
  double c = 0.0, slope_end = 0.0;
  for (;;) {
    c = solve_level(height);
    slope_end = std::sqrt(invert_first_integral(table, c, q));
    if (fixed_height || slope_end > lambda) break;
    height *= 0.5;
    if (height < 1e-3)
      throw ConfigError(
          "no downstream height below 0.9 gives an end slope above lambda");
  }

  // Tabulate x(v) with first-integral slopes, then flip to v(x).
  const int n = 6000;
  std::vector<double> xs(n + 1), vs(n + 1), sl(n + 1);
  std::vector<double> tv(n + 1);
  for (int i = 0; i <= n; ++i) {
    vs[i] = q * i / n;
    tv[i] = invert_first_integral(table, c, vs[i]);
  }
  xs[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    xs[i + 1] = xs[i] + gauss_panel(
                            [&](double z) {
                              return 1.0 / std::sqrt(
                                  invert_first_integral(table, c, z));
                            },
                            vs[i], vs[i + 1], 7);
  }
  for (int i = 0; i <= n; ++i) sl[i] = std::sqrt(tv[i]);

  Psi1D out;
  out.height = xs.back();
  out.c = c;
  out.slope_end = slope_end;
  out.q = q;
  out.v_of_x = CubicHermite(std::move(xs), std::move(vs), std::move(sl));
  return out;
}

double el_residual_1d(const Psi1D& prof, const ClosureTable& table) {
  // r(x) = d/dx[ g(t, v) v' ] - dG/dz along the first-integral flow, with
  // v and v' read from the delivered interpolant. Differentiating the flux
  // along the flow needs only first partials of the closure, so the
  // residual vanishes identically when v' matches sqrt(T(c, v)) and
  // measures exactly the slope defect of the tabulation.
  double worst = 0.0;
  const int n = 200;
  for (int i = 1; i < n; ++i) {
    const double x = prof.height * (0.02 + 0.96 * i / n);
    const double v = prof.v_of_x(x);
    const double vp = prof.v_of_x.deriv(x);
    const double t = invert_first_integral(table, prof.c, v);
    const double rt = std::sqrt(t);
    const double g = table.specific_volume_trunc(t, v);
    const double g_t = table.specific_volume_trunc_dt(t, v);
    const double g_z = table.specific_volume_trunc_dz(t, v);
    const double gdz = table.energy_G_dz(t, v);
    // T(c, z) from Phi(T, z) = c: T' = -Phi_z / Phi_t.
    const double phi_t = table.fb_weight_dt(t, v);
    const double phi_z = g_z * t - gdz;
    const double tp = -phi_z / phi_t;
    const double dw_dv = (g_t * tp + g_z) * rt + g * tp / (2.0 * rt);
    worst = std::max(worst, std::abs(vp * dw_dv - gdz));
  }
  return worst;
}

BoundaryDatum boundary_datum(const TruncatedDomain& domain,
                             const ClosureTable& table, double lambda,
                             double s,
                             std::optional<double> k_mu_override) {
  if (domain.is_strip())
    throw GeometryError("boundary datum needs a nozzle domain");
  if (!(s > 0.5 && s < 1.0))
    throw DomainError("inlet ramp exponent parameter must lie in (1/2, 1)");
  const double q = table.q();
  const double hbar = table.model().hbar();

  BoundaryDatum bd;
  bd.b_mu = domain.b_mu();
  bd.s = s;
  bd.k_mu = k_mu_override.value_or(
      std::min(0.05 * (hbar - 1.0), bd.b_mu - 1.0 - 1e-6));
  if (!(bd.k_mu > 0.0))
    throw GeometryError("inlet ramp width underflow: wall meets the outlet "
                        "height before the ramp can fit");
  bd.bp_mu = bd.b_mu - bd.k_mu;
  bd.psi_dagger = downstream_profile_1d(table, lambda);

  const auto& nodes = domain.nodes();
  bd.values.assign(nodes.size(), 0.0);
  bd.fixed.assign(nodes.size(), 0);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const BoundaryTag tag = domain.tag(k);
    if (tag == BoundaryTag::kInterior) continue;
    bd.fixed[k] = 1;
    switch (tag) {
      case BoundaryTag::kAxis:
        bd.values[k] = 0.0;
        break;
      case BoundaryTag::kWall:
      case BoundaryTag::kTop:
        bd.values[k] = q;
        break;
      case BoundaryTag::kInlet: {
        const double x2 = nodes[k].x2;
        if (x2 <= bd.bp_mu)
          bd.values[k] = 0.0;
        else if (x2 >= bd.b_mu)
          bd.values[k] = q;
        else
          bd.values[k] =
              q * std::pow((x2 - bd.bp_mu) / bd.k_mu, 1.0 + s);
        break;
      }
      case BoundaryTag::kExit:
        bd.values[k] = std::min(q, bd.psi_dagger.value(nodes[k].x2));
        break;
      default:
        break;
    }
  }
  return bd;
}

}  // namespace subjet

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "subjet/closure.hpp"
#include "subjet/geometry.hpp"
#include "subjet/interp.hpp"

namespace subjet {

// One-dimensional downstream profile: the minimizer of
// integral of G_e(|v'|^2, v) over (0, height) with v(0)=0, v(height)=Q.
// Along it the first integral Phi_e(v'^2, v) = c is constant, which is what
// the construction solves for.
struct Psi1D {
  CubicHermite v_of_x;  // profile on [0, height]
  double height = 0.0;  // H-tilde
  double c = 0.0;       // first-integral constant
  double slope_end = 0.0;
  double q = 0.0;

  // Clamped evaluation: 0 below the axis, Q above the profile height.
  double value(double x2) const;
  double slope(double x2) const;
};

// Builds the downstream profile for momentum parameter lambda. When
// fixed_height is absent the height starts at min(0.9*Q/lambda, 0.9) and is
// halved until the end slope exceeds lambda (floor 1e-3, else ConfigError).
Psi1D downstream_profile_1d(const ClosureTable& table, double lambda,
                            std::optional<double> fixed_height = {});

// Max-norm residual of the profile's optimality ODE
//   d/dx[g_e(v'^2, v) v'] = dG_e/dz(v'^2, v)
// measured by high-order finite differences of the flux along the delivered
// profile, with slopes taken from the first integral.
double el_residual_1d(const Psi1D& prof, const ClosureTable& table);

// Dirichlet data on the truncated domain: 0 on the axis, Q on wall and top,
// a power-law ramp on the inlet, and min(psi1d, Q) on the exit.
struct BoundaryDatum {
  std::vector<double> values;       // full nodal vector; 0 at interior nodes
  std::vector<std::uint8_t> fixed;  // 1 on Dirichlet (boundary) nodes
  Psi1D psi_dagger;
  double b_mu = 0.0;
  double bp_mu = 0.0;  // ramp start: b_mu - k_mu
  double k_mu = 0.0;   // ramp width
  double s = 0.0;      // ramp exponent parameter, in (1/2, 1)
};

BoundaryDatum boundary_datum(const TruncatedDomain& domain,
                             const ClosureTable& table, double lambda,
                             double s = 0.75,
                             std::optional<double> k_mu_override = {});

}  // namespace subjet

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "subjet/interp.hpp"
#include "subjet/profiles.hpp"

namespace subjet {

// Streamline closure of the upstream state, truncated below the sonic
// threshold.
//
// For stream value z the table carries the Bernoulli invariant B(z), the
// entropy-like invariant S(z) and their slopes, tabulated on a uniform
// z-grid over [-Q, 2Q] (cubic Hermite with analytic slopes; clamped
// outside). Derived per-z quantities:
//
//   max density      rho_m(z) = (B/S)^{1/(gamma-1)}      (momentum zero)
//   sonic density    rho_c(z) = (2B/((gamma+1)S))^{1/(gamma-1)}
//   sonic momentum^2 tc(z)    = momentum_sq(rho_c, z)
//
// momentum_sq(rho, z) = 2 rho^2 (B - rho^{gamma-1} S) is strictly
// decreasing in rho on (rho_c, rho_m]; its inverse on that branch gives the
// specific volume g(t, z) = 1/rho as a function of momentum squared t.
//
// The truncated volume g_trunc blends g into the constant upper bound
// g_upper across the band t/tc in (1-eps, 1-eps/2) using a quintic step,
// making every map below total and smooth across the sonic threshold.
class ClosureTable {
 public:
  ClosureTable(GasModel model, double epsilon, int z_nodes = 2048);

  const GasModel& model() const { return model_; }
  double gamma() const { return model_.gamma(); }
  double q() const { return model_.q(); }
  double epsilon() const { return eps_; }

  // Invariants along streamlines and their z-slopes.
  double bernoulli(double z) const;
  double entropy(double z) const;
  double bernoulli_slope(double z) const;
  double entropy_slope(double z) const;

  // Density bounds and the sonic momentum threshold at stream value z.
  double max_density(double z) const;
  double critical_density(double z) const;
  double sonic_momentum_sq(double z) const;
  double sonic_momentum_sq_slope(double z) const;

  // Global volume bounds: g_lower = 1/sup rho_m, g_upper = 1/inf rho_c.
  double g_lower() const { return g_lower_; }
  double g_upper() const { return g_upper_; }

  // Magnitude of the terms that cancel inside one energy_G evaluation; its
  // absolute rounding floor is a few eps times this scale. Energy
  // comparisons tighter than that are meaningless.
  double energy_rounding_scale() const { return energy_scale_; }

  // Momentum squared carried by density rho at stream value z. Requires
  // 0 < rho <= rho_m(z) (nonnegative radicand).
  double momentum_sq(double rho, double z) const;
  // Partial derivative in rho.
  double momentum_sq_drho(double rho, double z) const;

  // Subsonic-branch specific volume and partials. Requires t in [0, tc).
  double specific_volume(double t, double z) const;
  double specific_volume_dt(double t, double z) const;
  double specific_volume_dz(double t, double z) const;

  // Truncated (total) versions, defined for all t >= 0.
  double specific_volume_trunc(double t, double z) const;
  double specific_volume_trunc_dt(double t, double z) const;
  double specific_volume_trunc_dz(double t, double z) const;

  // Energy density G(t, z), its exact partials, and the free-boundary
  // weight Phi = g_trunc * t - G with dPhi/dt = g_trunc/2 + dg_trunc/dt * t.
  double energy_G(double t, double z) const;
  double energy_G_dt(double t, double z) const;
  double energy_G_dz(double t, double z) const;
  double fb_weight(double t, double z) const;
  double fb_weight_dt(double t, double z) const;

  // Indicator coefficient lambda(Lambda) = sqrt(Phi(Lambda^2, Q)).
  double fb_lambda(double lambda_momentum) const;

  // Fused gradient terms for assembly: one density inversion yields both
  // the truncated volume and the z-partial of G.
  void grad_terms(double t, double z, double& g_trunc, double& g_dz) const;

  // Free-boundary momentum parameter from the downstream pressure and its
  // inverse; exact closed forms in B(Q), S(Q).
  double momentum_on_fb(double p_down) const;
  double pressure_from_fb(double lambda_momentum) const;

  // Quintic step: 1 for s <= -1, 0 for s >= -1/2, C^2 in between.
  static double mollifier(double s);
  static double mollifier_slope(double s);

  // Serialization: gas model snapshot plus closure scalars; rebuild
  // reproduces the table bit for bit.
  std::string snapshot() const;
  static ClosureTable from_snapshot(const std::string& text);

  int z_nodes() const { return static_cast<int>(zb_.size()); }

 private:
  // Subsonic-branch density for momentum squared t (t < tc required).
  double invert_density(double t, double z, double tc) const;
  void build();

  GasModel model_;
  double eps_;
  int n_;
  double z0_ = 0.0;
  double dz_ = 0.0;
  std::vector<double> zb_;
  CubicHermite b_;
  CubicHermite s_;
  double g_lower_ = 0.0;
  double g_upper_ = 0.0;
  double g0q_pow_ = 0.0;  // rho_m(Q)^gamma * S(Q), offset in energy_G
  double energy_scale_ = 0.0;
};

}  // namespace subjet

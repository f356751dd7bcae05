#pragma once

#include <functional>
#include <string>
#include <vector>

#include "subjet/interp.hpp"

namespace subjet {

// Upstream horizontal state on [0, hbar]: density rho_bar, velocity u_bar,
// constant pressure pbar, adiabatic exponent gamma. Profiles are C^1
// interpolants; analytic presets sample exact values and slopes.
//
// Extension outside [0, hbar]: constant below 0; above hbar the density is
// constant and the velocity slope decays to zero over a cubic blend of
// width 0.1*hbar, so the extended slope stays nonnegative. The solver never
// evaluates the extension for stream values inside [0, Q]; it exists so the
// closure is total.
class GasModel {
 public:
  GasModel(double gamma, double pbar, CubicHermite rho, CubicHermite u);

  // rho_bar = u_bar = 1 on [0, hbar].
  static GasModel uniform(double gamma, double pbar, double hbar);
  // rho_bar = 1, u_bar = 1 + x2. Endpoint slope conditions do not hold;
  // closure-level diagnostics only.
  static GasModel linear_velocity(double gamma, double pbar, double hbar);
  // rho_bar = 1 + 0.1 cos(pi x2 / hbar), u_bar = 1 + x2^2 (hbar - x2)^2.
  static GasModel cosine_bump(double gamma, double pbar, double hbar);
  // Two-column whitespace files (x2 value), one per profile.
  static GasModel from_samples(double gamma, double pbar,
                               std::vector<double> x,
                               std::vector<double> rho,
                               std::vector<double> u);

  double gamma() const { return gamma_; }
  double pbar() const { return pbar_; }
  double hbar() const { return hbar_; }

  // Extended profile values and slopes, defined for all x2.
  double rho(double x2) const;
  double rho_prime(double x2) const;
  double u(double x2) const;
  double u_prime(double x2) const;

  // Total mass flux: integral of rho_bar*u_bar over [0, hbar]. Exact for
  // the stored interpolants.
  double mass_flux() const;
  double q() const { return q_; }

  // Cumulative flux psi_bar(x2) = integral of rho*u from 0, extended to all
  // x2 with the extended profiles. Strictly increasing.
  double stream_profile(double x2) const;
  double stream_profile_deriv(double x2) const { return rho(x2) * u(x2); }

  // Inverse of the cumulative flux restricted to z in [0, Q]; the height of
  // the streamline carrying flux z. Throws DomainError outside [0, Q].
  double streamline_height(double z) const;
  // Inverse over the extended range (used by the closure table).
  double streamline_height_extended(double z) const;

  // sup rho_bar*u_bar^2 / gamma; admissible models need pbar above this.
  double pressure_floor() const { return pstar_; }
  // Lipschitz seminorms of u_bar' and rho_bar' (diagnostics).
  double kappa_u() const { return kappa_u_; }
  double kappa_rho() const { return kappa_rho_; }
  // Endpoint slope conditions hold within tolerance (diagnostic, not a
  // gate; some closure-level test models violate them on purpose).
  bool endpoint_conditions_ok() const { return endpoint_ok_; }

  // Snapshot grammar: sample triples for both profiles plus scalars; see
  // README. Reload reproduces evaluators bit for bit.
  std::string snapshot() const;
  static GasModel from_snapshot(const std::string& text);

 private:
  void finalize();

  double gamma_;
  double pbar_;
  double hbar_;
  CubicHermite rho_;
  CubicHermite u_;
  double q_ = 0.0;
  double pstar_ = 0.0;
  double kappa_u_ = 0.0;
  double kappa_rho_ = 0.0;
  bool endpoint_ok_ = false;
  // Extension state above hbar.
  double blend_w_ = 0.0;
  double u_end_ = 0.0;
  double u_slope_end_ = 0.0;
  double rho_end_ = 0.0;
  double rho0_ = 0.0;
  double u0_ = 0.0;
  double q_above_ = 0.0;  // flux between hbar and hbar + blend_w_
  std::vector<double> flux_knots_;  // merged profile knots
  std::vector<double> flux_cum_;    // flux over [0, flux_knots_[i]]
};

// Sample an analytic pair (value, slope) on a uniform grid.
CubicHermite sample_profile(const std::function<double(double)>& f,
                            const std::function<double(double)>& fp, double a,
                            double b, int n);

}  // namespace subjet

#include "subjet/closure.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "subjet/errors.hpp"
#include "subjet/quadrature.hpp"
#include "subjet/textio.hpp"

namespace subjet {

namespace {
// Inner band quadrature: fixed panel count keeps results bit-reproducible.
constexpr int kBandPanels = 3;
constexpr int kBandOrder = 7;
}  // namespace

ClosureTable::ClosureTable(GasModel model, double epsilon, int z_nodes)
    : model_(std::move(model)), eps_(epsilon), n_(z_nodes) {
  if (!(eps_ > 0.0 && eps_ < 0.25))
    throw DomainError("truncation width must lie in (0, 1/4)");
  if (n_ < 16) throw DomainError("z-grid needs at least 16 nodes");
  build();
}

void ClosureTable::build() {
  const double q = model_.q();
  const double ga = model_.gamma();
  const double gp = ga * model_.pbar() / (ga - 1.0);
  // Grid covers [-Q, 2Q] and must hit 0 and Q exactly: values are frozen
  // constants below 0 and the entropy is frozen above Q, and those one-sided
  // kinks may not straddle a cell. Round the node count up to 3k + 1.
  const int m = (n_ + 1) / 3;
  n_ = 3 * m + 1;
  z0_ = -q;
  dz_ = 3.0 * q / (n_ - 1);
  zb_.resize(n_);
  std::vector<double> bv(n_), sv(n_), bp(n_), sp(n_);
  for (int i = 0; i < n_; ++i) {
    const double z = (i == m) ? 0.0 : (i == 2 * m ? q : z0_ + dz_ * i);
    zb_[i] = z;
    const double h = model_.streamline_height_extended(z);
    const double r = model_.rho(h);
    const double v = model_.u(h);
    // At the two junction nodes the stored slope is the extension side, so
    // the frozen-invariant cells interpolate exactly.
    const double rp = (i == m || i == 2 * m) ? 0.0 : model_.rho_prime(h);
    const double vp = (i == m) ? 0.0 : model_.u_prime(h);
    const double rg = std::pow(r, ga);
    bv[i] = 0.5 * v * v + gp / r;
    sv[i] = gp / rg;
    bp[i] = vp / r - gp * rp / (r * r * r * v);
    sp[i] = -ga * gp * rp / (rg * r * r * v);
    if (!(bv[i] > 0.0) || !(sv[i] > 0.0))
      throw ModelError("closure invariants must be positive");
  }
  b_ = CubicHermite(zb_, bv, bp);
  s_ = CubicHermite(zb_, sv, sp);

  double max_rm = 0.0, min_rc = 1e300, max_brm = 0.0;
  for (int i = 0; i < 2 * n_ - 1; ++i) {
    const double z = z0_ + 0.5 * dz_ * i;
    const double rm = max_density(z);
    max_rm = std::max(max_rm, rm);
    min_rc = std::min(min_rc, critical_density(z));
    max_brm = std::max(max_brm, b_(z) * rm);
  }
  g_lower_ = 1.0 / max_rm;
  g_upper_ = 1.0 / min_rc;
  g0q_pow_ = std::pow(max_density(q), ga) * entropy(q);
  // 4 B rho and 2 (gamma+1)/gamma rho^gamma S both stay below 4 B rho_m.
  energy_scale_ = 8.0 * max_brm;
}

double ClosureTable::bernoulli(double z) const { return b_(z); }
double ClosureTable::entropy(double z) const { return s_(z); }
double ClosureTable::bernoulli_slope(double z) const { return b_.deriv(z); }
double ClosureTable::entropy_slope(double z) const { return s_.deriv(z); }

double ClosureTable::max_density(double z) const {
  return std::pow(b_(z) / s_(z), 1.0 / (model_.gamma() - 1.0));
}

double ClosureTable::critical_density(double z) const {
  const double ga = model_.gamma();
  return std::pow(2.0 * b_(z) / ((ga + 1.0) * s_(z)), 1.0 / (ga - 1.0));
}

double ClosureTable::sonic_momentum_sq(double z) const {
  const double ga = model_.gamma();
  const double rc = critical_density(z);
  // B - rc^{gamma-1} S collapses to B (gamma-1)/(gamma+1).
  return 2.0 * rc * rc * b_(z) * (ga - 1.0) / (ga + 1.0);
}

double ClosureTable::sonic_momentum_sq_slope(double z) const {
  const double ga = model_.gamma();
  const double B = b_(z);
  const double S = s_(z);
  const double Bp = b_.deriv(z);
  const double Sp = s_.deriv(z);
  const double rc = critical_density(z);
  const double c = 2.0 * (ga - 1.0) / (ga + 1.0) * rc * rc;
  return c * (Bp + 2.0 * B / (ga - 1.0) * (Bp / B - Sp / S));
}

double ClosureTable::momentum_sq(double rho, double z) const {
  if (!(rho > 0.0)) throw DomainError("density must be positive");
  const double ga = model_.gamma();
  const double B = b_(z);
  double rad = B - std::pow(rho, ga - 1.0) * s_(z);
  if (rad < 0.0) {
    if (rad > -64.0 * 1e-16 * B)
      rad = 0.0;  // rho at the stagnation root, within rounding
    else
      throw DomainError("negative radicand: density above stagnation value");
  }
  return 2.0 * rho * rho * rad;
}

double ClosureTable::momentum_sq_drho(double rho, double z) const {
  const double ga = model_.gamma();
  return 4.0 * rho * b_(z) - 2.0 * (ga + 1.0) * std::pow(rho, ga) * s_(z);
}

double ClosureTable::invert_density(double t, double z, double tc) const {
  const double ga = model_.gamma();
  const double B = b_(z);
  const double S = s_(z);
  const double rm = std::pow(B / S, 1.0 / (ga - 1.0));
  if (t <= 0.0) return rm;
  if (!(t < tc * (1.0 - 1e-14)))
    throw SonicError("momentum squared at or above the sonic value", t, z);
  const double rc = std::pow(2.0 * B / ((ga + 1.0) * S), 1.0 / (ga - 1.0));
  auto fdf = [&](double rho, double& f, double& df) {
    const double rg1 = std::pow(rho, ga - 1.0);
    f = 2.0 * rho * rho * (B - rg1 * S) - t;
    df = 4.0 * rho * B - 2.0 * (ga + 1.0) * rg1 * rho * S;
  };
  return newton_bracketed(fdf, rc * (1.0 + 1e-12), rm, 1e-12);
}

double ClosureTable::specific_volume(double t, double z) const {
  return 1.0 / invert_density(t, z, sonic_momentum_sq(z));
}

double ClosureTable::specific_volume_dt(double t, double z) const {
  const double rho = invert_density(t, z, sonic_momentum_sq(z));
  const double dtd = momentum_sq_drho(rho, z);
  return -1.0 / (rho * rho * dtd);
}

double ClosureTable::specific_volume_dz(double t, double z) const {
  const double rho = invert_density(t, z, sonic_momentum_sq(z));
  const double dtd = momentum_sq_drho(rho, z);
  const double ga = model_.gamma();
  // dz g = -2 dt g (B' - g^{1-gamma} S') / g^2 with g = 1/rho.
  return 2.0 * (b_.deriv(z) - std::pow(rho, ga - 1.0) * s_.deriv(z)) / dtd;
}

double ClosureTable::mollifier(double s) {
  if (s <= -1.0) return 1.0;
  if (s >= -0.5) return 0.0;
  const double x = 2.0 * (s + 1.0);
  return 1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

double ClosureTable::mollifier_slope(double s) {
  if (s <= -1.0 || s >= -0.5) return 0.0;
  const double x = 2.0 * (s + 1.0);
  const double c = x * (1.0 - x);
  return -60.0 * c * c;
}

double ClosureTable::specific_volume_trunc(double t, double z) const {
  const double tc = sonic_momentum_sq(z);
  const double w = mollifier((t / tc - 1.0) / eps_);
  if (w == 0.0) return g_upper_;
  const double g = 1.0 / invert_density(t, z, tc);
  if (w == 1.0) return g;  // untruncated branch, reproduced exactly
  return g_upper_ + (g - g_upper_) * w;
}

double ClosureTable::specific_volume_trunc_dt(double t, double z) const {
  const double tc = sonic_momentum_sq(z);
  const double s = (t / tc - 1.0) / eps_;
  const double w = mollifier(s);
  if (w == 0.0) return 0.0;
  const double rho = invert_density(t, z, tc);
  const double g = 1.0 / rho;
  const double gt = -g * g / momentum_sq_drho(rho, z);
  const double ws = mollifier_slope(s) / (eps_ * tc);
  return gt * w + (g - g_upper_) * ws;
}

double ClosureTable::specific_volume_trunc_dz(double t, double z) const {
  const double tc = sonic_momentum_sq(z);
  const double s = (t / tc - 1.0) / eps_;
  const double w = mollifier(s);
  if (w == 0.0) return 0.0;
  const double rho = invert_density(t, z, tc);
  const double dtd = momentum_sq_drho(rho, z);
  const double ga = model_.gamma();
  const double gz =
      2.0 * (b_.deriv(z) - std::pow(rho, ga - 1.0) * s_.deriv(z)) / dtd;
  const double ws = mollifier_slope(s) * t * sonic_momentum_sq_slope(z) /
                    (eps_ * tc * tc);
  return gz * w + (g_upper_ - 1.0 / rho) * ws;
}

double ClosureTable::energy_G(double t, double z) const {
  const double ga = model_.gamma();
  const double B = b_(z);
  const double S = s_(z);
  const double tc = sonic_momentum_sq(z);
  const double t1 = (1.0 - eps_) * tc;
  const double t2 = (1.0 - 0.5 * eps_) * tc;
  const double rm = std::pow(B / S, 1.0 / (ga - 1.0));
  // Antiderivative of (1/rho) d(momentum_sq)/drho.
  auto F = [&](double rho) {
    return 4.0 * B * rho - 2.0 * (ga + 1.0) / ga * std::pow(rho, ga) * S;
  };
  const double that = std::min(t, t1);
  const double rho_hat = invert_density(that, z, tc);
  double I = F(rho_hat) - F(rm);
  if (t > t1) {
    const double hi = std::min(t, t2);
    I += gauss_composite(
        [&](double tau) { return specific_volume_trunc(tau, z); }, t1, hi,
        kBandOrder, kBandPanels);
    if (t > t2) I += g_upper_ * (t - t2);
  }
  const double offset =
      (ga - 1.0) / ga * (std::pow(rm, ga) * S - g0q_pow_);
  return 0.5 * I + offset;
}

double ClosureTable::energy_G_dt(double t, double z) const {
  return 0.5 * specific_volume_trunc(t, z);
}

double ClosureTable::energy_G_dz(double t, double z) const {
  const double ga = model_.gamma();
  const double tc = sonic_momentum_sq(z);
  const double t1 = (1.0 - eps_) * tc;
  const double Bp = b_.deriv(z);
  const double Sp = s_.deriv(z);
  const double rho_hat = invert_density(std::min(t, t1), z, tc);
  double out = Bp * rho_hat - Sp * std::pow(rho_hat, ga) / ga;
  if (t > t1 && (Bp != 0.0 || Sp != 0.0)) {
    const double t2 = (1.0 - 0.5 * eps_) * tc;
    const double hi = std::min(t, t2);
    out += 0.5 * gauss_composite(
                     [&](double tau) {
                       return specific_volume_trunc_dz(tau, z);
                     },
                     t1, hi, kBandOrder, kBandPanels);
  }
  return out;
}

void ClosureTable::grad_terms(double t, double z, double& g_trunc,
                              double& g_dz) const {
  const double ga = model_.gamma();
  const double tc = sonic_momentum_sq(z);
  const double s = (t / tc - 1.0) / eps_;
  const double w = mollifier(s);
  const double Bp = b_.deriv(z);
  const double Sp = s_.deriv(z);
  const double t1 = (1.0 - eps_) * tc;
  if (w == 0.0) {
    g_trunc = g_upper_;
    if (Bp == 0.0 && Sp == 0.0) {
      g_dz = 0.0;
      return;
    }
    const double rho_hat = invert_density(t1, z, tc);
    g_dz = Bp * rho_hat - Sp * std::pow(rho_hat, ga) / ga;
    const double t2 = (1.0 - 0.5 * eps_) * tc;
    g_dz += 0.5 * gauss_composite(
                      [&](double tau) {
                        return specific_volume_trunc_dz(tau, z);
                      },
                      t1, t2, kBandOrder, kBandPanels);
    return;
  }
  const double rho = invert_density(std::min(t, t1), z, tc);
  if (t <= t1) {
    g_trunc = 1.0 / rho;  // w == 1 below the band
    if (w != 1.0) g_trunc = g_upper_ + (1.0 / rho - g_upper_) * w;
    g_dz = (Bp == 0.0 && Sp == 0.0)
               ? 0.0
               : Bp * rho - Sp * std::pow(rho, ga) / ga;
    return;
  }
  const double g_band = 1.0 / invert_density(t, z, tc);
  g_trunc = g_upper_ + (g_band - g_upper_) * w;
  if (Bp == 0.0 && Sp == 0.0) {
    g_dz = 0.0;
    return;
  }
  const double t2 = (1.0 - 0.5 * eps_) * tc;
  g_dz = Bp * rho - Sp * std::pow(rho, ga) / ga;
  g_dz += 0.5 * gauss_composite(
                    [&](double tau) {
                      return specific_volume_trunc_dz(tau, z);
                    },
                    t1, std::min(t, t2), kBandOrder, kBandPanels);
}

double ClosureTable::fb_weight(double t, double z) const {
  return specific_volume_trunc(t, z) * t - energy_G(t, z);
}

double ClosureTable::fb_weight_dt(double t, double z) const {
  return 0.5 * specific_volume_trunc(t, z) +
         specific_volume_trunc_dt(t, z) * t;
}

double ClosureTable::fb_lambda(double lambda_momentum) const {
  const double phi = fb_weight(lambda_momentum * lambda_momentum, model_.q());
  if (!(phi > 0.0))
    throw InternalError("free-boundary weight must be positive");
  return std::sqrt(phi);
}

double ClosureTable::momentum_on_fb(double p_down) const {
  const double ga = model_.gamma();
  const double q = model_.q();
  const double Sq = entropy(q);
  const double Bq = bernoulli(q);
  const double stag = (ga - 1.0) / ga * std::pow(max_density(q), ga) * Sq;
  const double sonic = (ga - 1.0) / ga * std::pow(critical_density(q), ga) * Sq;
  if (!(p_down > sonic && p_down < stag))
    throw DomainError("downstream pressure outside (sonic, stagnation) range");
  const double rho0 = std::pow(ga * p_down / ((ga - 1.0) * Sq), 1.0 / ga);
  const double rad = 2.0 * Bq - 2.0 * std::pow(rho0, ga - 1.0) * Sq;
  if (rad <= 0.0) throw DomainError("negative radicand in momentum parameter");
  return rho0 * std::sqrt(rad);
}

double ClosureTable::pressure_from_fb(double lambda_momentum) const {
  const double ga = model_.gamma();
  const double q = model_.q();
  const double t = lambda_momentum * lambda_momentum;
  if (!(lambda_momentum > 0.0 && t < sonic_momentum_sq(q)))
    throw DomainError("momentum parameter outside the subsonic range");
  const double rho0 = invert_density(t, q, sonic_momentum_sq(q));
  return (ga - 1.0) / ga * std::pow(rho0, ga) * entropy(q);
}

std::string ClosureTable::snapshot() const {
  std::ostringstream out;
  out << kFormatPrefix << " closure\n";
  out << "epsilon " << fmt17(eps_) << "\n";
  out << "znodes " << n_ << "\n";
  out << model_.snapshot();
  return out.str();
}

ClosureTable ClosureTable::from_snapshot(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind(std::string(kFormatPrefix) + " closure", 0) != 0)
    throw IoError("closure snapshot: bad format line");
  double eps = 0.0;
  int zn = 0;
  if (!std::getline(in, line)) throw IoError("closure snapshot: truncated");
  {
    auto tok = split_ws(line);
    if (tok.size() != 2 || tok[0] != "epsilon")
      throw IoError("closure snapshot: expected epsilon");
    eps = parse_double(tok[1], "epsilon");
  }
  if (!std::getline(in, line)) throw IoError("closure snapshot: truncated");
  {
    auto tok = split_ws(line);
    if (tok.size() != 2 || tok[0] != "znodes")
      throw IoError("closure snapshot: expected znodes");
    zn = std::stoi(tok[1]);
  }
  std::ostringstream rest;
  rest << in.rdbuf();
  return ClosureTable(GasModel::from_snapshot(rest.str()), eps, zn);
}

}  // namespace subjet

#include "subjet/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "subjet/errors.hpp"
#include "subjet/quadrature.hpp"
#include "subjet/textio.hpp"

namespace subjet {

namespace {
constexpr int kPresetSamples = 801;
}

CubicHermite sample_profile(const std::function<double(double)>& f,
                            const std::function<double(double)>& fp, double a,
                            double b, int n) {
  std::vector<double> x(n), y(n), d(n);
  for (int i = 0; i < n; ++i) {
    x[i] = a + (b - a) * i / (n - 1);
    y[i] = f(x[i]);
    d[i] = fp(x[i]);
  }
  return CubicHermite(std::move(x), std::move(y), std::move(d));
}

GasModel::GasModel(double gamma, double pbar, CubicHermite rho, CubicHermite u)
    : gamma_(gamma), pbar_(pbar), rho_(std::move(rho)), u_(std::move(u)) {
  if (!(gamma_ > 1.0)) throw ModelError("gamma must exceed 1");
  if (rho_.front() != 0.0 || u_.front() != 0.0)
    throw ModelError("profiles must start at x2 = 0");
  if (std::abs(rho_.back() - u_.back()) > 1e-12 * std::abs(u_.back()))
    throw ModelError("profiles must share the channel height");
  hbar_ = u_.back();
  finalize();
}

GasModel GasModel::uniform(double gamma, double pbar, double hbar) {
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  return GasModel(gamma, pbar, sample_profile(one, zero, 0.0, hbar, 2),
                  sample_profile(one, zero, 0.0, hbar, 2));
}

GasModel GasModel::linear_velocity(double gamma, double pbar, double hbar) {
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  auto lin = [](double x) { return 1.0 + x; };
  auto lin_p = [](double) { return 1.0; };
  return GasModel(gamma, pbar, sample_profile(one, zero, 0.0, hbar, 2),
                  sample_profile(lin, lin_p, 0.0, hbar, 2));
}

GasModel GasModel::cosine_bump(double gamma, double pbar, double hbar) {
  const double pi = std::numbers::pi;
  auto r = [=](double x) { return 1.0 + 0.1 * std::cos(pi * x / hbar); };
  auto rp = [=](double x) {
    return -0.1 * pi / hbar * std::sin(pi * x / hbar);
  };
  auto v = [=](double x) {
    const double w = x * (hbar - x);
    return 1.0 + w * w;
  };
  auto vp = [=](double x) {
    const double w = x * (hbar - x);
    return 2.0 * w * (hbar - 2.0 * x);
  };
  return GasModel(gamma, pbar,
                  sample_profile(r, rp, 0.0, hbar, kPresetSamples),
                  sample_profile(v, vp, 0.0, hbar, kPresetSamples));
}

GasModel GasModel::from_samples(double gamma, double pbar,
                                std::vector<double> x, std::vector<double> rho,
                                std::vector<double> u) {
  auto xr = x;
  return GasModel(gamma, pbar,
                  CubicHermite::monotone(std::move(xr), std::move(rho)),
                  CubicHermite::monotone(std::move(x), std::move(u)));
}

void GasModel::finalize() {
  rho0_ = rho_(0.0);
  u0_ = u_(0.0);
  rho_end_ = rho_(hbar_);
  u_end_ = u_(hbar_);
  u_slope_end_ = std::max(0.0, u_.deriv(hbar_ - 1e-12 * hbar_));
  blend_w_ = 0.1 * hbar_;

  const int scan = 4096;
  double min_rho = rho0_, min_u = u0_, max_q2 = 0.0;
  double max_up = 0.0, max_upp = 0.0, max_rp = 0.0, max_rpp = 0.0;
  for (int i = 0; i <= scan; ++i) {
    const double x = hbar_ * i / scan;
    const double r = rho_(x);
    const double v = u_(x);
    if (r <= 0.0 || v <= 0.0)
      throw ModelError("profiles must be strictly positive");
    min_rho = std::min(min_rho, r);
    min_u = std::min(min_u, v);
    max_q2 = std::max(max_q2, r * v * v);
    max_up = std::max(max_up, std::abs(u_.deriv(x)));
    max_rp = std::max(max_rp, std::abs(rho_.deriv(x)));
    const double xm = std::min(hbar_ * (i + 0.5) / scan, hbar_);
    max_upp = std::max(max_upp, std::abs(u_.deriv2(xm)));
    max_rpp = std::max(max_rpp, std::abs(rho_.deriv2(xm)));
  }
  pstar_ = max_q2 / gamma_;
  kappa_u_ = max_up + max_upp;
  kappa_rho_ = max_rp + max_rpp;
  if (!(pbar_ > pstar_))
    throw ModelError("pbar must exceed the sonic admissibility floor " +
                     fmt17(pstar_));

  const double slope_tol = 1e-8 * std::max(1.0, kappa_u_ + kappa_rho_);
  endpoint_ok_ = std::abs(rho_.deriv(1e-14)) <= slope_tol &&
                 std::abs(rho_.deriv(hbar_ * (1.0 - 1e-14))) <= slope_tol &&
                 std::abs(u_.deriv(1e-14)) <= slope_tol &&
                 u_.deriv(hbar_ * (1.0 - 1e-14)) >= -slope_tol;

  // Flux integrand rho*u is piecewise degree 6 over the merged knot grid;
  // panel Gauss-4 per knot interval is exact for the interpolants.
  flux_knots_ = rho_.knots();
  flux_knots_.insert(flux_knots_.end(), u_.knots().begin(), u_.knots().end());
  std::sort(flux_knots_.begin(), flux_knots_.end());
  flux_knots_.erase(std::unique(flux_knots_.begin(), flux_knots_.end()),
                    flux_knots_.end());
  auto integrand = [this](double x) { return rho_(x) * u_(x); };
  flux_cum_.assign(flux_knots_.size(), 0.0);
  for (std::size_t i = 0; i + 1 < flux_knots_.size(); ++i)
    flux_cum_[i + 1] = flux_cum_[i] + gauss_panel(integrand, flux_knots_[i],
                                                  flux_knots_[i + 1], 4);
  q_ = flux_cum_.back();

  // Flux carried by the blend zone above hbar (rho constant there).
  q_above_ = rho_end_ * gauss_panel([this](double x) { return u(x); }, hbar_,
                                    hbar_ + blend_w_, 5);
}

double GasModel::rho(double x2) const {
  if (x2 <= 0.0) return rho0_;
  if (x2 >= hbar_) return rho_end_;
  return rho_(x2);
}

double GasModel::rho_prime(double x2) const {
  if (x2 <= 0.0 || x2 >= hbar_) return 0.0;
  return rho_.deriv(x2);
}

double GasModel::u(double x2) const {
  if (x2 <= 0.0) return u0_;
  if (x2 < hbar_) return u_(x2);
  const double s = (x2 - hbar_) / blend_w_;
  if (s >= 1.0) return u_end_ + u_slope_end_ * blend_w_ / 3.0;
  // Antiderivative of slope*(1-s)^2.
  const double c = 1.0 - s;
  return u_end_ + u_slope_end_ * blend_w_ / 3.0 * (1.0 - c * c * c);
}

double GasModel::u_prime(double x2) const {
  if (x2 <= 0.0) return 0.0;
  if (x2 < hbar_) return u_.deriv(x2);
  const double s = (x2 - hbar_) / blend_w_;
  if (s >= 1.0) return 0.0;
  const double c = 1.0 - s;
  return u_slope_end_ * c * c;
}

double GasModel::mass_flux() const { return q_; }

double GasModel::stream_profile(double x2) const {
  if (x2 <= 0.0) return rho0_ * u0_ * x2;
  if (x2 <= hbar_) {
    auto it = std::upper_bound(flux_knots_.begin(), flux_knots_.end(), x2);
    std::size_t i = static_cast<std::size_t>(it - flux_knots_.begin());
    i = (i == 0) ? 0 : std::min(i - 1, flux_knots_.size() - 2);
    double acc = flux_cum_[i];
    if (x2 > flux_knots_[i])
      acc += gauss_panel([this](double x) { return rho_(x) * u_(x); },
                         flux_knots_[i], x2, 4);
    return acc;
  }
  const double xb = hbar_ + blend_w_;
  if (x2 <= xb)
    return q_ + rho_end_ * gauss_panel([this](double x) { return u(x); },
                                       hbar_, x2, 5);
  return q_ + q_above_ + rho_end_ * u(xb) * (x2 - xb);
}

double GasModel::streamline_height(double z) const {
  const double tol = 1e-12 * std::max(1.0, q_);
  if (z < -tol || z > q_ + tol)
    throw DomainError("streamline flux outside [0, Q]");
  if (z <= 0.0) return 0.0;
  if (z >= q_) return hbar_;
  return streamline_height_extended(z);
}

double GasModel::streamline_height_extended(double z) const {
  if (z <= 0.0) return z / (rho0_ * u0_);
  if (z >= q_ + q_above_) {
    const double xb = hbar_ + blend_w_;
    return xb + (z - q_ - q_above_) / (rho_end_ * u(xb));
  }
  double lo = 0.0, hi = hbar_ + blend_w_;
  auto fdf = [this, z](double x, double& f, double& df) {
    f = stream_profile(x) - z;
    df = rho(x) * u(x);
  };
  return newton_bracketed(fdf, lo, hi, 1e-14);
}

std::string GasModel::snapshot() const {
  std::ostringstream out;
  out << kFormatPrefix << " gasmodel\n";
  out << "gamma " << fmt17(gamma_) << "\n";
  out << "pbar " << fmt17(pbar_) << "\n";
  auto dump = [&out](const char* name, const CubicHermite& c) {
    out << "profile " << name << " " << c.size() << "\n";
    for (std::size_t i = 0; i < c.size(); ++i)
      out << fmt17(c.knots()[i]) << " " << fmt17(c.values()[i]) << " "
          << fmt17(c.slopes()[i]) << "\n";
  };
  dump("rho", rho_);
  dump("u", u_);
  return out.str();
}

GasModel GasModel::from_snapshot(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind(std::string(kFormatPrefix) + " gasmodel", 0) != 0)
    throw IoError("gas model snapshot: bad format line");
  double gamma = 0.0, pbar = 0.0;
  CubicHermite rho, u;
  bool have_rho = false, have_u = false;
  while (std::getline(in, line)) {
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "gamma" && tok.size() == 2) {
      gamma = parse_double(tok[1], "gamma");
    } else if (tok[0] == "pbar" && tok.size() == 2) {
      pbar = parse_double(tok[1], "pbar");
    } else if (tok[0] == "profile" && tok.size() == 3) {
      const std::size_t n = std::stoul(tok[2]);
      std::vector<double> x(n), y(n), d(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line))
          throw IoError("gas model snapshot: truncated profile");
        auto row = split_ws(line);
        if (row.size() != 3)
          throw IoError("gas model snapshot: profile row needs 3 fields");
        x[i] = parse_double(row[0], "profile x");
        y[i] = parse_double(row[1], "profile value");
        d[i] = parse_double(row[2], "profile slope");
      }
      CubicHermite c(std::move(x), std::move(y), std::move(d));
      if (tok[1] == "rho") {
        rho = std::move(c);
        have_rho = true;
      } else if (tok[1] == "u") {
        u = std::move(c);
        have_u = true;
      } else {
        throw IoError("gas model snapshot: unknown profile " + tok[1]);
      }
    } else {
      throw IoError("gas model snapshot: unknown record '" + tok[0] + "'");
    }
  }
  if (!have_rho || !have_u)
    throw IoError("gas model snapshot: missing profile");
  return GasModel(gamma, pbar, std::move(rho), std::move(u));
}

}  // namespace subjet

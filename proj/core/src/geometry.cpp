#include "subjet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "subjet/errors.hpp"
#include "subjet/quadrature.hpp"
#include "subjet/textio.hpp"

namespace subjet {

namespace {

double tri_min_angle(const MeshNode& a, const MeshNode& b, const MeshNode& c) {
  auto corner = [](const MeshNode& p, const MeshNode& q, const MeshNode& r) {
    const double ux = q.x1 - p.x1, uy = q.x2 - p.x2;
    const double vx = r.x1 - p.x1, vy = r.x2 - p.x2;
    const double n = std::hypot(ux, uy) * std::hypot(vx, vy);
    if (n == 0.0) return 0.0;
    const double cosv = std::clamp((ux * vx + uy * vy) / n, -1.0, 1.0);
    return std::acos(cosv);
  };
  const double rad =
      std::min({corner(a, b, c), corner(b, c, a), corner(c, a, b)});
  return rad * 180.0 / 3.14159265358979323846;
}

}  // namespace

NozzleGeometry::NozzleGeometry(CubicHermite th, double hbar)
    : theta_(std::move(th)), hbar_(hbar) {
  const auto& knots = theta_.knots();
  const double x_last = knots.back();
  if (!(hbar_ > 1.0)) throw GeometryError("asymptotic height must exceed 1");
  if (!(knots.front() >= 1.0 - 1e-12) || !(x_last < hbar_))
    throw GeometryError("wall samples must lie in [1, Hbar)");
  const double at_outlet = theta_(1.0);
  if (std::abs(at_outlet) > 1e-8 * std::max(1.0, std::abs(theta_(x_last))))
    throw GeometryError("wall must meet the outlet: Theta(1) = " +
                        fmt17(at_outlet));
  mu_max_ = -theta_(x_last);
  if (!(mu_max_ > 0.0))
    throw GeometryError("wall must extend upstream (Theta < 0 in the tail)");

  // Detect the monotone tail: smallest height above which Theta' <= tol.
  const int scan = 2048;
  const double span = x_last - 1.0;
  const double tol = 1e-10 * mu_max_ / std::max(span, 1e-12);
  h_star_ = 1.0;
  for (int i = scan; i >= 0; --i) {
    const double x = 1.0 + span * i / scan;
    if (theta_.deriv(x) > tol) {
      h_star_ = x;
      break;
    }
  }
  tail_ok_ = h_star_ <= 1.0;
}

NozzleGeometry NozzleGeometry::mirrored_exponential(double hbar, double k,
                                                    double depth_cap,
                                                    int samples) {
  if (!(hbar > 1.0) || !(k > 0.0) || !(depth_cap > 0.0) || samples < 16)
    throw GeometryError("bad mirrored-exponential parameters");
  std::vector<double> x, th, sl;
  x.reserve(samples);
  th.reserve(samples);
  sl.reserve(samples);
  // Heights saturate toward Hbar; drop samples once the increment falls
  // under the spacing the interpolant can resolve.
  const double min_step = 1e-13 * std::max(1.0, hbar);
  for (int i = 0; i < samples; ++i) {
    // Uniform in depth so the sample density follows the wall's approach to
    // Hbar; x2(depth) = Hbar - (Hbar-1) e^{-k depth}.
    const double depth = depth_cap * i / (samples - 1);
    const double xi =
        (i == 0) ? 1.0 : hbar - (hbar - 1.0) * std::exp(-k * depth);
    if (!x.empty() && xi - x.back() < min_step) break;
    x.push_back(xi);
    th.push_back(-depth);
    sl.push_back(-1.0 / (k * (hbar - xi)));
  }
  return NozzleGeometry(CubicHermite(std::move(x), std::move(th),
                                     std::move(sl)),
                        hbar);
}

NozzleGeometry NozzleGeometry::from_samples(std::vector<double> x2,
                                            std::vector<double> theta,
                                            double hbar) {
  return NozzleGeometry(CubicHermite::monotone(std::move(x2),
                                               std::move(theta)),
                        hbar);
}

double NozzleGeometry::height_at_depth(double mu) const {
  if (!(mu > 0.0) || mu > mu_max_)
    throw GeometryError("inlet depth " + fmt17(mu) +
                        " outside sampled wall range (0, " + fmt17(mu_max_) +
                        "]");
  return wall_height(-mu);
}

double NozzleGeometry::wall_height(double x1) const {
  if (x1 >= 0.0) return 1.0;
  if (x1 < -mu_max_)
    throw GeometryError("abscissa below the sampled wall range");
  const auto& knots = theta_.knots();
  auto fdf = [this, x1](double y, double& f, double& df) {
    f = theta_(y) - x1;
    df = theta_.deriv(y);
  };
  return newton_bracketed(fdf, knots.front(), knots.back(), 1e-13);
}

TruncatedDomain TruncatedDomain::build(const NozzleGeometry& nozzle,
                                       double mu, double r, double h,
                                       double grading) {
  if (!(h > 0.0) || !(r > 0.0))
    throw GeometryError("mesh spacing and exit abscissa must be positive");
  if (!(grading >= 0.0 && grading < 1.0))
    throw GeometryError("grading strength must lie in [0, 1)");
  TruncatedDomain d;
  d.h_ = h;
  d.mu_ = mu;
  d.r_ = r;
  d.b_mu_ = nozzle.height_at_depth(mu);

  // Upstream columns equidistribute the graph metric max(|Theta'|, 1) db:
  // column width and wall-height jump per cell both stay near h, which
  // keeps the sheared cells under a steep wall above the angle floor.
  const int ns = 2048;
  std::vector<double> bs(ns + 1), ss(ns + 1);
  bs[0] = 1.0;
  ss[0] = 0.0;
  for (int i = 1; i <= ns; ++i) {
    bs[i] = 1.0 + (d.b_mu_ - 1.0) * i / ns;
    const double m0 = std::max(std::abs(nozzle.theta_prime(bs[i - 1])), 1.0);
    const double m1 = std::max(std::abs(nozzle.theta_prime(bs[i])), 1.0);
    ss[i] = ss[i - 1] + 0.5 * (m0 + m1) * (bs[i] - bs[i - 1]);
  }
  const double metric_len = ss.back();

  const int n_up =
      std::max(1, static_cast<int>(std::lround(metric_len / h)));
  const int n_dn = std::max(1, static_cast<int>(std::lround(r / h)));
  const int n2 = std::max(
      2, static_cast<int>(std::ceil(std::sqrt(d.b_mu_) / h)));
  d.ncols_ = n_up + n_dn + 1;
  d.nrows_ = n2 + 1;
  d.outlet_col_ = n_up;

  d.col_x1_.resize(d.ncols_);
  d.col_height_.resize(d.ncols_);
  for (int i = 0; i < d.ncols_; ++i) {
    if (i == 0) {
      d.col_x1_[i] = -mu;
      d.col_height_[i] = d.b_mu_;
    } else if (i < n_up) {
      const double target = metric_len * (n_up - i) / n_up;
      const auto it = std::upper_bound(ss.begin(), ss.end(), target);
      const int k = std::clamp(
          static_cast<int>(it - ss.begin()) - 1, 0, ns - 1);
      const double w = (target - ss[k]) / (ss[k + 1] - ss[k]);
      const double b = bs[k] + w * (bs[k + 1] - bs[k]);
      d.col_x1_[i] = nozzle.theta(b);
      d.col_height_[i] = b;
    } else if (i == n_up) {
      d.col_x1_[i] = 0.0;
      d.col_height_[i] = 1.0;
    } else {
      d.col_x1_[i] = r * (i - n_up) / n_dn;
      d.col_height_[i] = 1.0;
    }
  }
  d.eta_.resize(d.nrows_);
  for (int j = 0; j <= n2; ++j) {
    const double tau = static_cast<double>(j) / n2;
    d.eta_[j] = (j == n2) ? 1.0 : tau * (1.0 + grading * (1.0 - tau));
  }

  d.nodes_.resize(static_cast<std::size_t>(d.ncols_) * d.nrows_);
  d.tags_.assign(d.nodes_.size(), BoundaryTag::kInterior);
  for (int i = 0; i < d.ncols_; ++i) {
    for (int j = 0; j <= n2; ++j) {
      const int id = d.node_id(i, j);
      d.nodes_[id] = {d.col_x1_[i], d.col_height_[i] * d.eta_[j]};
      if (j == 0)
        d.tags_[id] = BoundaryTag::kAxis;
      else if (j == n2)
        d.tags_[id] = d.col_x1_[i] < 0.0 ? BoundaryTag::kWall
                                         : BoundaryTag::kTop;
      else if (i == 0)
        d.tags_[id] = BoundaryTag::kInlet;
      else if (i == d.ncols_ - 1)
        d.tags_[id] = BoundaryTag::kExit;
    }
  }

  // Wall fit residual through the nozzle's own chart.
  d.max_wall_dev_ = 0.0;
  for (int i = 0; i < n_up; ++i) {
    const double dev =
        std::abs(nozzle.theta(d.col_height_[i]) - d.col_x1_[i]);
    d.max_wall_dev_ = std::max(d.max_wall_dev_, dev);
  }
  if (d.max_wall_dev_ > 1e-3 * h)
    throw GeometryError("wall nodes drift off the nozzle curve");

  d.triangulate_and_validate();
  return d;
}

TruncatedDomain TruncatedDomain::strip(double h) {
  if (!(h > 0.0) || h > 0.5)
    throw GeometryError("strip spacing must lie in (0, 1/2]");
  const int n = std::max(2, static_cast<int>(std::lround(1.0 / h)));
  TruncatedDomain d;
  d.strip_ = true;
  d.h_ = h;
  d.mu_ = 0.0;
  d.r_ = 1.0;
  d.b_mu_ = 1.0;
  d.ncols_ = n + 1;
  d.nrows_ = n + 1;
  d.outlet_col_ = 0;
  d.col_x1_.resize(d.ncols_);
  d.col_height_.assign(d.ncols_, 1.0);
  d.eta_.resize(d.nrows_);
  for (int i = 0; i <= n; ++i) d.col_x1_[i] = static_cast<double>(i) / n;
  for (int j = 0; j <= n; ++j) d.eta_[j] = static_cast<double>(j) / n;

  d.nodes_.resize(static_cast<std::size_t>(d.ncols_) * d.nrows_);
  d.tags_.assign(d.nodes_.size(), BoundaryTag::kInterior);
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const int id = d.node_id(i, j);
      d.nodes_[id] = {d.col_x1_[i], d.eta_[j]};
      if (j == 0)
        d.tags_[id] = BoundaryTag::kAxis;
      else if (j == n)
        d.tags_[id] = BoundaryTag::kTop;
      else if (i == 0)
        d.tags_[id] = BoundaryTag::kInlet;
      else if (i == n)
        d.tags_[id] = BoundaryTag::kExit;
    }
  }
  d.triangulate_and_validate();
  return d;
}

void TruncatedDomain::triangulate_and_validate() {
  tris_.clear();
  tris_.reserve(2 * static_cast<std::size_t>(ncols_ - 1) * (nrows_ - 1));
  min_angle_ = 180.0;
  for (int i = 0; i + 1 < ncols_; ++i) {
    for (int j = 0; j + 1 < nrows_; ++j) {
      const int n00 = node_id(i, j);
      const int n10 = node_id(i + 1, j);
      const int n11 = node_id(i + 1, j + 1);
      const int n01 = node_id(i, j + 1);
      // Split along the diagonal with the better worst angle.
      const double a_split =
          std::min(tri_min_angle(nodes_[n00], nodes_[n10], nodes_[n11]),
                   tri_min_angle(nodes_[n00], nodes_[n11], nodes_[n01]));
      const double b_split =
          std::min(tri_min_angle(nodes_[n00], nodes_[n10], nodes_[n01]),
                   tri_min_angle(nodes_[n10], nodes_[n11], nodes_[n01]));
      if (a_split >= b_split) {
        tris_.push_back({n00, n10, n11});
        tris_.push_back({n00, n11, n01});
        min_angle_ = std::min(min_angle_, a_split);
      } else {
        tris_.push_back({n00, n10, n01});
        tris_.push_back({n10, n11, n01});
        min_angle_ = std::min(min_angle_, b_split);
      }
    }
  }
  if (min_angle_ < 20.0 - 1e-9)
    throw GeometryError("mesh degenerates below the 20 degree angle floor (" +
                        fmt17(min_angle_) + " deg); refine h or reduce "
                        "grading");
}

double TruncatedDomain::ceiling(double x1) const {
  const auto hi_it = std::upper_bound(col_x1_.begin(), col_x1_.end(), x1);
  int i = static_cast<int>(hi_it - col_x1_.begin()) - 1;
  i = std::clamp(i, 0, ncols_ - 2);
  const double xi =
      std::clamp((x1 - col_x1_[i]) / (col_x1_[i + 1] - col_x1_[i]), 0.0, 1.0);
  return (1.0 - xi) * col_height_[i] + xi * col_height_[i + 1];
}

double TruncatedDomain::interpolate(const std::vector<double>& nodal,
                                    double x1, double x2) const {
  // Column interval by binary search (two uniform bands, but keep it
  // general), then the exact inverse of the bilinear height map.
  const auto hi_it =
      std::upper_bound(col_x1_.begin(), col_x1_.end(), x1);
  int i = static_cast<int>(hi_it - col_x1_.begin()) - 1;
  i = std::clamp(i, 0, ncols_ - 2);
  const double xi =
      std::clamp((x1 - col_x1_[i]) / (col_x1_[i + 1] - col_x1_[i]), 0.0, 1.0);
  const double height =
      (1.0 - xi) * col_height_[i] + xi * col_height_[i + 1];
  const double eta_target = std::clamp(x2 / height, 0.0, 1.0);
  const auto et =
      std::upper_bound(eta_.begin(), eta_.end(), eta_target);
  int j = static_cast<int>(et - eta_.begin()) - 1;
  j = std::clamp(j, 0, nrows_ - 2);
  const double w =
      std::clamp((eta_target - eta_[j]) / (eta_[j + 1] - eta_[j]), 0.0, 1.0);
  const double v0 = (1.0 - xi) * nodal[node_id(i, j)] +
                    xi * nodal[node_id(i + 1, j)];
  const double v1 = (1.0 - xi) * nodal[node_id(i, j + 1)] +
                    xi * nodal[node_id(i + 1, j + 1)];
  return (1.0 - w) * v0 + w * v1;
}

std::string TruncatedDomain::write_text() const {
  std::ostringstream os;
  os << kFormatPrefix << " mesh\n";
  os << "nodes " << nodes_.size() << "\n";
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    os << k << ' ' << fmt17(nodes_[k].x1) << ' ' << fmt17(nodes_[k].x2) << ' '
       << static_cast<int>(tags_[k]) << "\n";
  }
  os << "elements " << tris_.size() << "\n";
  for (std::size_t k = 0; k < tris_.size(); ++k) {
    os << k << ' ' << tris_[k].a << ' ' << tris_[k].b << ' ' << tris_[k].c
       << "\n";
  }
  return os.str();
}

}  // namespace subjet

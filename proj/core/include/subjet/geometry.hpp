#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subjet/interp.hpp"

namespace subjet {

// Nozzle wall given as x1 = Theta(x2) for x2 in (1, Hbar): Theta(1) = 0 at
// the outlet edge and Theta drops to -inf as x2 approaches Hbar, so the wall
// is asymptotically horizontal far upstream.
class NozzleGeometry {
 public:
  // Theta(x2) = ln((Hbar - x2)/(Hbar - 1))/k, sampled uniformly in depth down
  // to -depth_cap with analytic slopes.
  static NozzleGeometry mirrored_exponential(double hbar, double k,
                                             double depth_cap = 40.0,
                                             int samples = 2048);
  // Monotone-cubic fit of raw (x2, Theta) samples. The first sample may sit
  // at the outlet height itself; |Theta(1)| must vanish to tolerance.
  static NozzleGeometry from_samples(std::vector<double> x2,
                                     std::vector<double> theta, double hbar);

  double theta(double x2) const { return theta_(x2); }
  double theta_prime(double x2) const { return theta_.deriv(x2); }
  double hbar() const { return hbar_; }
  // Depth of the sampled wall: height_at_depth is defined on (0, mu_max].
  double mu_max() const { return mu_max_; }
  // Height above which the sampled wall is monotone decreasing.
  double h_star() const { return h_star_; }
  bool monotone_tail_ok() const { return tail_ok_; }

  // b_mu: the wall height at inlet depth mu, i.e. Theta(b_mu) = -mu.
  double height_at_depth(double mu) const;
  // Wall curve as a height Y(x1) for x1 in [-mu_max, 0]; Y(0) = 1.
  double wall_height(double x1) const;

 private:
  NozzleGeometry(CubicHermite th, double hbar);

  CubicHermite theta_;
  double hbar_ = 0.0;
  double mu_max_ = 0.0;
  double h_star_ = 1.0;
  bool tail_ok_ = true;
};

enum class BoundaryTag : std::uint8_t {
  kInterior = 0,
  kAxis = 1,
  kWall = 2,
  kTop = 3,
  kInlet = 4,
  kExit = 5,
};

struct MeshNode {
  double x1, x2;
};

// Counterclockwise triangle over node indices.
struct MeshTri {
  int a, b, c;
};

// Boundary-fitted structured triangulation of the truncated region
// {-mu < x1 < R} between the axis, the wall (x1 < 0), and the line x2 = 1
// (x1 >= 0). Downstream columns are uniform in x1; upstream columns
// equidistribute max(|Theta'|, 1) db so steep walls keep shape regularity.
// Every column carries the same number of rows, scaled to the local height
// and mildly graded toward the upper boundary. Each quad cell is split
// along the diagonal that maximizes the smaller interior angle.
class TruncatedDomain {
 public:
  static TruncatedDomain build(const NozzleGeometry& nozzle, double mu,
                               double r, double h, double grading = 0.15);
  // Unit-square test domain (0,1)x(0,1), ungraded: exactly 2*(1/h)^2
  // triangles.
  static TruncatedDomain strip(double h);

  const std::vector<MeshNode>& nodes() const { return nodes_; }
  const std::vector<MeshTri>& tris() const { return tris_; }
  BoundaryTag tag(std::size_t node) const { return tags_[node]; }

  int ncols() const { return ncols_; }
  int nrows() const { return nrows_; }
  int node_id(int i, int j) const { return i * nrows_ + j; }
  double col_x1(int i) const { return col_x1_[i]; }
  double col_height(int i) const { return col_height_[i]; }
  double eta(int j) const { return eta_[j]; }
  // Index of the outlet column (x1 = 0); equals 0 on the strip.
  int outlet_col() const { return outlet_col_; }
  // Triangles of quad cell (i, j) sit at indices base and base + 1; the
  // second one always carries the cell's top edge.
  std::size_t cell_tri_base(int i, int j) const {
    return 2 * (static_cast<std::size_t>(i) * (nrows_ - 1) + j);
  }

  double h() const { return h_; }
  double mu() const { return mu_; }
  double r() const { return r_; }
  double b_mu() const { return b_mu_; }
  double min_angle() const { return min_angle_; }
  double max_wall_deviation() const { return max_wall_dev_; }
  bool is_strip() const { return strip_; }

  // Interpolate a nodal field at (x1, x2) through the structured mapping;
  // exact for fields linear in (x1, x2). Clamps to the domain.
  double interpolate(const std::vector<double>& nodal, double x1,
                     double x2) const;

  // Height of the mesh ceiling above x1: the chord of the top row between
  // the bracketing columns, which is what the triangulation actually covers.
  double ceiling(double x1) const;

  // Indexed node/element text format with a tag column.
  std::string write_text() const;

 private:
  TruncatedDomain() = default;
  void triangulate_and_validate();

  std::vector<MeshNode> nodes_;
  std::vector<MeshTri> tris_;
  std::vector<BoundaryTag> tags_;
  std::vector<double> col_x1_, col_height_, eta_;
  int ncols_ = 0, nrows_ = 0, outlet_col_ = 0;
  double h_ = 0.0, mu_ = 0.0, r_ = 0.0, b_mu_ = 1.0;
  double min_angle_ = 0.0, max_wall_dev_ = 0.0;
  bool strip_ = false;
};

}  // namespace subjet

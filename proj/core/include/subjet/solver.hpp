#pragma once

#include <cstddef>
#include <vector>

#include "subjet/closure.hpp"
#include "subjet/datum.hpp"
#include "subjet/geometry.hpp"

namespace subjet {

// Sentinel magnitude for a free-boundary outlet offset that does not exist:
// +kLargeGap when the coincidence plateau never forms over the truncated
// window, -kLargeGap when it swallows the topmost interior mesh row.
inline constexpr double kLargeGap = 1e300;

// C^2 quintic step: 0 for u <= 0, 1 for u >= 1, u^3(10 - 15u + 6u^2) between.
double smooth_step(double u);
double smooth_step_slope(double u);

// Discretization and optimizer knobs. All stream-function quantities share
// the units of q.
struct EnergyParams {
  double delta_chi = 0.0;     // indicator transition width, > 0
  double tol_q = 0.0;         // coincidence band below q, >= 10 eps q
  double grad_tol = 0.0;      // sup-norm stopping threshold for the gradient
  int quad_order = 3;         // points per triangle: 1, 3, or 7
  int max_iterations = 500;
  int lbfgs_memory = 8;
  double armijo_c1 = 1e-4;
  double armijo_shrink = 0.5;
  double el_threshold = 1e-3;  // nodal residual magnitude worth flagging

  // Mesh- and scale-aware defaults; lambda_e may be zero when no
  // free-boundary term is present.
  static EnergyParams defaults(double h, double lambda_e, double q);
};

// Piecewise-linear stream function on a TruncatedDomain. Dirichlet nodes
// hold their values exactly through minimization; the coincidence flag marks
// psi within tol_q of q.
struct StreamField {
  const TruncatedDomain* domain = nullptr;
  double q = 0.0;
  std::vector<double> psi;
  std::vector<char> dirichlet;
  std::vector<char> coincident;
};

struct SolveLogRow {
  int iteration;
  double energy;
  double grad_norm;
  double step;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  std::vector<SolveLogRow> log;
};

// Free boundary of the coincidence set {psi >= q - tol_q}, wall excluded.
// upsilon holds one crossing per interior mesh row (left-to-right scan),
// graph_f one crossing per column at and beyond the outlet (bottom-up scan).
struct FreeBoundaryCurve {
  std::vector<MeshNode> upsilon;
  std::vector<MeshNode> graph_f;
  double h_lower_est = 0.0;
  // Abscissa where the curve crosses the topmost interior row; +-kLargeGap
  // when that row is fully fluid (+) or fully coincident (-).
  double gap_at_outlet = 0.0;
  bool slope_trend_ok = false;
};

struct ResidualStats {
  double max_abs = 0.0;
  double l2 = 0.0;
  std::vector<int> flagged;
};

struct FbConditionStats {
  double median_rel = 0.0;
  double max_rel = 0.0;
  int samples = 0;
};

// Element geometry helpers shared by assembly, diagnostics, and field
// recovery. Shape gradients use the signed doubled area, so they are valid
// for either triangle orientation; tri_area is unsigned.
double tri_area(const TruncatedDomain& domain, std::size_t e);
void tri_shape_gradients(const TruncatedDomain& domain, std::size_t e,
                         double d1[3], double d2[3]);
void tri_gradient(const TruncatedDomain& domain,
                  const std::vector<double>& psi, std::size_t e, double& g1,
                  double& g2);

// Admissible starting guess: Dirichlet values from the datum, interior nodes
// from the upstream stream profile capped at q.
StreamField initial_field(const TruncatedDomain& domain,
                          const BoundaryDatum& datum,
                          const ClosureTable& table,
                          const EnergyParams& params);

void refresh_coincidence(StreamField& field, const EnergyParams& params);

// Truncated energy: sum over elements of the quadrature of
// G(|grad psi|^2, psi) + lambda_e^2 H((q - psi) / delta_chi).
double assemble_energy(const StreamField& field, const ClosureTable& table,
                       double lambda_e, const EnergyParams& params);

// Exact gradient of the discrete energy; Dirichlet rows are zero. The
// volumetric and indicator contributions are skipped entirely when they
// vanish, so a constant-data assembly is bit-identical to the pure
// divergence-form path.
void assemble_gradient(const StreamField& field, const ClosureTable& table,
                       double lambda_e, const EnergyParams& params,
                       std::vector<double>& grad);

// Limited-memory quasi-Newton descent with backtracking; field is the warm
// start and is updated in place (it holds the last accepted iterate even on
// failure). Backtracking that cannot decrease the energy throws SolveError;
// hitting the iteration cap returns converged = false.
SolveReport minimize(StreamField& field, const ClosureTable& table,
                     double lambda_e, const EnergyParams& params);

// minimize, then one continuation pass with delta_chi halved, warm-started
// from the first result.
SolveReport minimize_with_continuation(StreamField& field,
                                       const ClosureTable& table,
                                       double lambda_e,
                                       const EnergyParams& params);

// minimize, then realize the coincidence plateau exactly: the smoothed
// indicator only pulls the field toward q asymptotically, so nodes are
// admitted onto {psi = q} one at a time whenever pinning them there does not
// raise the sharp-indicator energy, then the fluid region is re-minimized
// around the grown set. A grow-and-equilibrate pass that fails to lower the
// global sharp energy is undone and ends the loop, so the realized set is a
// genuine descent from the smoothed minimizer. With trust_plateau the
// incoming field is taken as an already-realized solution of the same
// problem: its exact-q nodes are pinned, the fluid is re-equilibrated, and
// the plateau is never grown, which makes a re-solve of the accepted state
// an exact fixed point. No-op beyond plain minimize when lambda_e is zero.
SolveReport minimize_with_plateau(StreamField& field, const ClosureTable& table,
                                  double lambda_e, const EnergyParams& params,
                                  bool trust_plateau = false);

// Lumped-mass-normalized residual of the divergence-form operator at
// interior non-Dirichlet nodes safely below the coincidence smoothing layer
// (psi < q - 10 delta_chi). Nodes above el_threshold are flagged.
ResidualStats el_residual(const StreamField& field, const ClosureTable& table,
                          const EnergyParams& params);

// Level-set extraction of the free boundary. Throws ExtractionError when the
// coincidence set is empty or some mesh row crosses the level more than
// once.
FreeBoundaryCurve extract_free_boundary(const StreamField& field,
                                        const EnergyParams& params);

// Signed outlet offset of the coincidence plateau on the topmost interior
// mesh row: the first threshold crossing from the left, or +-kLargeGap when
// the row is fully fluid (+) or fully coincident (-). Tolerates malformed
// level sets, so fitting probes can call it without extraction guards.
double outlet_gap(const StreamField& field, const EnergyParams& params);

// One-sided gradient check |grad psi| vs lambda on the extracted curve,
// sampled from the fluid side; reports median and max of the relative
// deviation. Pure reporting, no state.
FbConditionStats fb_condition_check(const StreamField& field,
                                    const FreeBoundaryCurve& curve,
                                    const ClosureTable& table, double lambda);

}  // namespace subjet

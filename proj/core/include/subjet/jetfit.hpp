#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "subjet/closure.hpp"
#include "subjet/geometry.hpp"
#include "subjet/solver.hpp"

namespace subjet {

// Knobs for the outlet-fitting search over the momentum parameter.
struct FitParams {
  double gap_tol = 0.0;      // accept when |outlet gap| falls below this
  double bracket_tol = 0.0;  // or when the bracket width does
  int max_probes = 30;
  int max_expansions = 8;
  double lo_limit = 0.0;  // hard walls for bracket expansion
  double hi_limit = 1e300;
  double first_probe = 0.0;  // when positive, probed before the bracket ends
  // Gap the first probe produced the last time this problem was solved.  When
  // finite, reproducing it accepts the probe outright: on an unchanged mesh a
  // re-solve of an accepted stage is an exact fixed point, and a coarse mesh
  // may quantize the gap well above gap_tol, so reproduction is the only
  // reliable signature.  A changed mesh shifts the gap and the search runs.
  double first_probe_gap = std::numeric_limits<double>::quiet_NaN();
  EnergyParams energy;       // a zero delta_chi is refilled per probe

  // gap_tol = 2h (one cell each side of the lip), bracket_tol = 1e-3 q.
  static FitParams defaults(double h, double q);
};

struct FitProbe {
  double lambda;
  double gap;
};

struct FitReport {
  double lambda_fit = 0.0;
  double gap = 0.0;  // signed outlet gap at lambda_fit
  std::vector<FitProbe> probes;
  int iterations = 0;  // accepted bisection halvings
  double bracket_lo = 0.0, bracket_hi = 0.0;  // final bracket
  double initial_lo = 0.0, initial_hi = 0.0;  // bracket after expansion
  bool converged = false;
  bool fell_back = false;  // |gap| minimization replaced bisection
};

// Root search on a signed gap response. Bisection once a sign change is
// bracketed (expanding up to max_expansions times within the limits);
// golden-section on |gap| when no sign change exists anywhere. +-kLargeGap
// sentinels participate through their sign only. Throws FitError when the
// probe budget or the fallback cannot bring the gap below gap_tol.
FitReport fit_search(const std::function<double(double)>& gap_at, double lo,
                     double hi, const FitParams& params);

struct FitOutcome {
  FitReport report;
  StreamField field;
  FreeBoundaryCurve boundary;
  double lambda_e = 0.0;   // indicator coefficient at lambda_fit
  int opt_iterations = 0;  // optimizer iterations summed over all probes
};

// Fits the momentum parameter so the free boundary meets the outlet lip:
// each probe rebuilds the boundary datum, minimizes the energy (warm-started
// from the previous probe), and measures the outlet gap. The field returned
// is the accepted probe's minimizer; any sharper truncation pass is the
// caller's business.
FitOutcome continuous_fit(const TruncatedDomain& domain,
                          const ClosureTable& table, double lambda_lo,
                          double lambda_hi, const FitParams& params,
                          const StreamField* warm = nullptr);

struct SubsonicReport {
  double ratio = 0.0;  // sup over elements of |grad psi|^2 / tc(psi)
  bool pass = false;   // ratio <= 1 - eps
  std::size_t element = 0;
};

// Elementwise sonic-threshold ratio; on pass the truncation is inactive and
// the minimizer solves the untruncated equation.
SubsonicReport subsonic_check(const StreamField& field,
                              const ClosureTable& table, double eps);

struct DownstreamState {
  std::vector<double> z;    // stream values in [0, Q]
  std::vector<double> rho;  // density along the far jet
  std::vector<double> u;    // horizontal speed
  std::vector<double> x2;   // heights x2(z), cumulative widths 1/(rho u)
  double height = 0.0;
  double pressure = 0.0;
};

// Far-downstream asymptotic state carried by momentum parameter lambda:
// constant pressure across the jet, streamline profiles from the invariants,
// heights by quadrature of the mass-flux relation.
DownstreamState downstream_state(const ClosureTable& table, double lambda);

struct TruncationStage {
  double mu;
  double r;
};

struct StageLog {
  double mu = 0.0, r = 0.0;
  double lambda = 0.0;
  double dpsi = 0.0;     // sup change on the previous window, after warm start
  double dlambda = 0.0;  // momentum parameter change against previous stage
  double upstream_residual = 0.0;  // sup |psi - psibar| on the probe column
  int fit_probes = 0;
  int opt_iterations = 0;  // optimizer iterations over all stage probes
  double mach = 0.0;       // subsonic ratio of the stage solution
};

struct JetSolution {
  std::shared_ptr<const TruncatedDomain> domain;  // keeps field.domain alive
  StreamField field;
  FreeBoundaryCurve boundary;
  double lambda = 0.0;
  double mu = 0.0, r = 0.0;
  DownstreamState downstream;
  SubsonicReport mach;
  bool converged = false;
  std::vector<StageLog> stages;
};

struct ContinuationParams {
  double h = 0.0;  // target mesh size, required
  double grading = 0.15;
  double psi_tol = 1e-4;     // times q, window stabilization
  double lambda_tol = 1e-3;  // times lambda
  FitParams fit;
};

// Domain-truncation continuation: fits each (mu, R) stage warm-started from
// the previous solution interpolated onto the new mesh, re-accepting the
// previous momentum parameter when its gap still fits; stops when the field
// and the parameter both stabilize, else returns the last stage flagged
// non-converged. The accepted stage gets one indicator-width polish pass
// before the boundary and diagnostics are packaged.
JetSolution continuation(const NozzleGeometry& nozzle,
                         const ClosureTable& table, double lambda_lo,
                         double lambda_hi,
                         const std::vector<TruncationStage>& schedule,
                         const ContinuationParams& params);

struct CriticalProbe {
  double pbar = 0.0;
  double mach = 0.0;  // subsonic ratio, 0 when the solve failed
  bool pass = false;
  bool solver_failed = false;
  std::string failure;
};

struct CriticalParams {
  double width = 0.0;  // required bracket width at return
  int max_probes = 30;
};

struct CriticalReport {
  double p_lo = 0.0, p_hi = 0.0;  // final failing / passing pressures
  double p_critical = 0.0;        // bracket midpoint
  double eps = 0.0;
  std::vector<CriticalProbe> probes;
  bool monotone_ok = true;  // mach nondecreasing as pbar decreases
};

// Predicate bisection over the upstream pressure. Validates that the upper
// end passes and the lower end fails (ConfigError otherwise), then bisects
// to the requested width, recording every probe.
CriticalReport critical_search(
    const std::function<CriticalProbe(double)>& probe, double p_lo,
    double p_hi, const CriticalParams& params);

// Everything needed to restate the jet problem at a new upstream pressure.
struct JetTemplate {
  std::function<GasModel(double pbar)> gas;
  const NozzleGeometry* nozzle = nullptr;
  double closure_eps = 0.1;
  int z_nodes = 512;
  double lambda_lo_frac = 0.2;  // initial bracket, fractions of sqrt(tc(Q))
  double lambda_hi_frac = 0.85;
  std::vector<TruncationStage> schedule;
  ContinuationParams cont;
};

// Locates the pressure below which no subsonic solution is found: a probe
// rebuilds the closure at pbar and runs the full fit; any failure along the
// pipeline counts as a failed predicate rather than an error.
CriticalReport critical_pressure(const JetTemplate& tpl, double p_lo,
                                 double p_hi, const CriticalParams& params);

}  // namespace subjet

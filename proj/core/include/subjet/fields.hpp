#pragma once

#include <string>
#include <vector>

#include "subjet/closure.hpp"
#include "subjet/jetfit.hpp"
#include "subjet/solver.hpp"

namespace subjet {

// Nodal physical state recovered from a stream function. Density comes from
// the specific-volume inversion at the node's averaged gradient; velocity is
// the rotated gradient scaled by the specific volume, pressure follows from
// the entropy invariant, and vorticity is the discrete curl of the velocity.
struct PhysicalFields {
  std::vector<double> rho, u1, u2, p, mach, omega;
  // Nodes whose momentum reached the sonic bound, where the inversion is
  // saturated at the critical state instead of failing. On solved subsonic
  // flows these can only be inlet datum artifacts.
  std::vector<char> saturated;
  int saturated_count = 0;
};

// Recovers (rho, u, P, M, omega) at every node. The nodal gradient is the
// area-weighted average of the adjacent element gradients, the same operator
// the energy assembly differentiates with, so the algebraic relations between
// the recovered quantities and the tabulated invariants hold to rounding.
// The Mach number is reported as 0 on the coincidence set.
PhysicalFields recover_fields(const StreamField& field,
                              const ClosureTable& table);

// Pointwise deviation of the Bernoulli and entropy invariants rebuilt from
// (rho, u, P) against their tabulated values at the node's stream value.
// Saturated nodes are skipped; the l2 figures are area-weighted RMS values.
struct TransportResiduals {
  double bernoulli_max = 0.0, bernoulli_l2 = 0.0;
  double entropy_max = 0.0, entropy_l2 = 0.0;
};

TransportResiduals transport_residuals(const PhysicalFields& pf,
                                       const ClosureTable& table,
                                       const StreamField& field);

struct ExportOptions {
  std::vector<double> stations;  // x1 stations for cross-section profiles
  int section_samples = 257;     // vertical samples per station
};

// Paths of the artifacts a successful export wrote.
struct ExportFiles {
  std::string fields, boundary, sections, summary;
};

// Writes the field table, free-boundary polyline, cross-section profiles,
// and summary record under out_dir. All numbers carry 17 significant digits,
// orderings are deterministic, and each file is written to a temporary name
// and renamed into place so a failure leaves nothing partial behind.
ExportFiles export_solution(const JetSolution& sol, const ClosureTable& table,
                            const std::string& out_dir,
                            const ExportOptions& opt);

// Columns of an exported field table, in file order.
struct FieldTable {
  std::vector<double> x1, x2, psi, rho, u1, u2, p, mach, omega;
};

// Reads back a field table written by export_solution; numbers round-trip
// bit-exactly through the 17-digit text form.
FieldTable import_field_table(const std::string& path);

}  // namespace subjet

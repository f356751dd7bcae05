#include "subjet/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "subjet/errors.hpp"
#include "subjet/profiles.hpp"

namespace subjet {

namespace {

constexpr double kBc1[1][3] = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
constexpr double kW1[1] = {1.0};

constexpr double kBc3[3][3] = {
    {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
constexpr double kW3[3] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

// Seven-point rule, exact through degree 5.
const double kR1 = (6.0 - std::sqrt(15.0)) / 21.0;
const double kR2 = (6.0 + std::sqrt(15.0)) / 21.0;
const double kWr1 = (155.0 - std::sqrt(15.0)) / 1200.0;
const double kWr2 = (155.0 + std::sqrt(15.0)) / 1200.0;
const double kBc7[7][3] = {
    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
    {kR1, kR1, 1.0 - 2.0 * kR1},
    {kR1, 1.0 - 2.0 * kR1, kR1},
    {1.0 - 2.0 * kR1, kR1, kR1},
    {kR2, kR2, 1.0 - 2.0 * kR2},
    {kR2, 1.0 - 2.0 * kR2, kR2},
    {1.0 - 2.0 * kR2, kR2, kR2}};
const double kW7[7] = {9.0 / 40.0, kWr1, kWr1, kWr1, kWr2, kWr2, kWr2};

struct QuadRule {
  int n;
  const double (*bc)[3];
  const double* w;
};

QuadRule quad_rule(int order) {
  switch (order) {
    case 1:
      return {1, kBc1, kW1};
    case 3:
      return {3, kBc3, kW3};
    case 7:
      return {7, kBc7, kW7};
    default:
      throw ConfigError("quadrature order must be 1, 3, or 7", 0, 0);
  }
}

void check_params(const StreamField& field, const EnergyParams& params) {
  if (!field.domain)
    throw ConfigError("stream field is not attached to a domain", 0, 0);
  if (!(params.delta_chi > 0.0))
    throw ConfigError("indicator width must be positive", 0, 0);
  const double eps = std::numeric_limits<double>::epsilon();
  if (!(params.tol_q >= 10.0 * eps * field.q))
    throw ConfigError("coincidence band is below rounding resolution", 0, 0);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double sup_norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

}  // namespace

double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double smooth_step_slope(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double v = u * (1.0 - u);
  return 30.0 * v * v;
}

EnergyParams EnergyParams::defaults(double h, double lambda_e, double q) {
  EnergyParams p;
  p.delta_chi = lambda_e > 0.0 ? 2.0 * h * lambda_e : 0.05 * q;
  p.delta_chi = std::clamp(p.delta_chi, 1e-6 * q, 0.5 * q);
  p.tol_q = 1e-8 * q;
  p.grad_tol = 1e-9 * q;
  return p;
}

double tri_area(const TruncatedDomain& domain, std::size_t e) {
  const MeshTri& t = domain.tris()[e];
  const MeshNode& a = domain.nodes()[t.a];
  const MeshNode& b = domain.nodes()[t.b];
  const MeshNode& c = domain.nodes()[t.c];
  const double s =
      (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
  return 0.5 * std::abs(s);
}

void tri_shape_gradients(const TruncatedDomain& domain, std::size_t e,
                         double d1[3], double d2[3]) {
  const MeshTri& t = domain.tris()[e];
  const MeshNode& a = domain.nodes()[t.a];
  const MeshNode& b = domain.nodes()[t.b];
  const MeshNode& c = domain.nodes()[t.c];
  const double s =
      (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
  d1[0] = (b.x2 - c.x2) / s;
  d2[0] = (c.x1 - b.x1) / s;
  d1[1] = (c.x2 - a.x2) / s;
  d2[1] = (a.x1 - c.x1) / s;
  d1[2] = (a.x2 - b.x2) / s;
  d2[2] = (b.x1 - a.x1) / s;
}

void tri_gradient(const TruncatedDomain& domain,
                  const std::vector<double>& psi, std::size_t e, double& g1,
                  double& g2) {
  const MeshTri& t = domain.tris()[e];
  const MeshNode& a = domain.nodes()[t.a];
  const MeshNode& b = domain.nodes()[t.b];
  const MeshNode& c = domain.nodes()[t.c];
  const double s =
      (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
  // Edge-difference form: exactly zero for a constant field.
  const double pb = psi[t.b] - psi[t.a];
  const double pc = psi[t.c] - psi[t.a];
  g1 = (pb * (c.x2 - a.x2) - pc * (b.x2 - a.x2)) / s;
  g2 = (pc * (b.x1 - a.x1) - pb * (c.x1 - a.x1)) / s;
}

StreamField initial_field(const TruncatedDomain& domain,
                          const BoundaryDatum& datum,
                          const ClosureTable& table,
                          const EnergyParams& params) {
  StreamField f;
  f.domain = &domain;
  f.q = table.q();
  const std::size_t n = domain.nodes().size();
  f.psi.resize(n);
  f.dirichlet.assign(datum.fixed.begin(), datum.fixed.end());
  f.coincident.assign(n, 0);
  const GasModel& model = table.model();
  for (std::size_t k = 0; k < n; ++k) {
    f.psi[k] = f.dirichlet[k]
                   ? datum.values[k]
                   : std::min(f.q, model.stream_profile(domain.nodes()[k].x2));
  }
  refresh_coincidence(f, params);
  return f;
}

void refresh_coincidence(StreamField& field, const EnergyParams& params) {
  const double thr = field.q - params.tol_q;
  field.coincident.resize(field.psi.size());
  for (std::size_t k = 0; k < field.psi.size(); ++k)
    field.coincident[k] = field.psi[k] >= thr ? 1 : 0;
}

double assemble_energy(const StreamField& field, const ClosureTable& table,
                       double lambda_e, const EnergyParams& params) {
  const TruncatedDomain& d = *field.domain;
  const QuadRule rule = quad_rule(params.quad_order);
  const double inv_delta = 1.0 / params.delta_chi;
  const double lam2 = lambda_e * lambda_e;
  double total = 0.0;
  for (std::size_t e = 0; e < d.tris().size(); ++e) {
    const MeshTri& tri = d.tris()[e];
    double g1, g2;
    tri_gradient(d, field.psi, e, g1, g2);
    const double tt = g1 * g1 + g2 * g2;
    const double area = tri_area(d, e);
    double esum = 0.0;
    for (int qp = 0; qp < rule.n; ++qp) {
      const double psi_q = rule.bc[qp][0] * field.psi[tri.a] +
                           rule.bc[qp][1] * field.psi[tri.b] +
                           rule.bc[qp][2] * field.psi[tri.c];
      double val = table.energy_G(tt, psi_q);
      if (lambda_e != 0.0)
        val += lam2 * smooth_step((field.q - psi_q) * inv_delta);
      esum += rule.w[qp] * val;
    }
    total += area * esum;
  }
  return total;
}

void assemble_gradient(const StreamField& field, const ClosureTable& table,
                       double lambda_e, const EnergyParams& params,
                       std::vector<double>& grad) {
  const TruncatedDomain& d = *field.domain;
  const QuadRule rule = quad_rule(params.quad_order);
  const double inv_delta = 1.0 / params.delta_chi;
  const double lam2 = lambda_e * lambda_e;
  grad.assign(field.psi.size(), 0.0);
  for (std::size_t e = 0; e < d.tris().size(); ++e) {
    const MeshTri& tri = d.tris()[e];
    double g1, g2;
    tri_gradient(d, field.psi, e, g1, g2);
    const double tt = g1 * g1 + g2 * g2;
    const double area = tri_area(d, e);
    const int ids[3] = {tri.a, tri.b, tri.c};
    double gsum = 0.0;
    double src[3] = {0.0, 0.0, 0.0};
    bool has_src = false;
    for (int qp = 0; qp < rule.n; ++qp) {
      const double psi_q = rule.bc[qp][0] * field.psi[tri.a] +
                           rule.bc[qp][1] * field.psi[tri.b] +
                           rule.bc[qp][2] * field.psi[tri.c];
      double gq, gdzq;
      table.grad_terms(tt, psi_q, gq, gdzq);
      gsum += rule.w[qp] * gq;
      // Both volume terms vanish identically for constant upstream data and
      // a switched-off indicator; skipping them keeps that assembly path
      // bit-identical to the pure divergence form.
      if (gdzq != 0.0) {
        has_src = true;
        const double c = rule.w[qp] * gdzq;
        for (int i = 0; i < 3; ++i) src[i] += c * rule.bc[qp][i];
      }
      if (lambda_e != 0.0) {
        const double sp = smooth_step_slope((field.q - psi_q) * inv_delta);
        if (sp != 0.0) {
          has_src = true;
          const double c = -rule.w[qp] * lam2 * sp * inv_delta;
          for (int i = 0; i < 3; ++i) src[i] += c * rule.bc[qp][i];
        }
      }
    }
    double d1[3], d2[3];
    tri_shape_gradients(d, e, d1, d2);
    for (int i = 0; i < 3; ++i)
      grad[ids[i]] += area * gsum * (g1 * d1[i] + g2 * d2[i]);
    if (has_src)
      for (int i = 0; i < 3; ++i) grad[ids[i]] += area * src[i];
  }
  for (std::size_t k = 0; k < grad.size(); ++k)
    if (field.dirichlet[k]) grad[k] = 0.0;
}

SolveReport minimize(StreamField& field, const ClosureTable& table,
                     double lambda_e, const EnergyParams& params) {
  check_params(field, params);
  const std::size_t n = field.psi.size();
  SolveReport rep;

  // Assembled energies carry an absolute rounding floor: the closure
  // antiderivative cancels terms of magnitude energy_rounding_scale() at
  // every quadrature point, and on near-uniform data those errors are
  // correlated across elements rather than averaging out.
  double domain_area = 0.0;
  for (std::size_t e = 0; e < field.domain->tris().size(); ++e)
    domain_area += tri_area(*field.domain, e);
  const double energy_floor = 4.0 * std::numeric_limits<double>::epsilon() *
                              domain_area * table.energy_rounding_scale();

  std::vector<double> x = field.psi;
  std::vector<double> g(n), g_new(n), dir(n);
  double energy = assemble_energy(field, table, lambda_e, params);
  assemble_gradient(field, table, lambda_e, params, g);
  double gnorm = sup_norm(g);
  rep.log.push_back({0, energy, gnorm, 0.0});

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;
  std::vector<double> alpha_buf;

  int iter = 0;
  while (true) {
    if (gnorm <= params.grad_tol) {
      rep.converged = true;
      break;
    }
    if (iter >= params.max_iterations) {
      rep.converged = false;
      break;
    }

    // Two-loop recursion; the curvature pairs live in the non-Dirichlet
    // subspace because the gradient rows there are zero.
    dir = g;
    alpha_buf.assign(mem.size(), 0.0);
    for (std::size_t m = mem.size(); m-- > 0;) {
      const Pair& p = mem[m];
      alpha_buf[m] = p.rho * dot(p.s, dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] -= alpha_buf[m] * p.y[k];
    }
    double scale;
    if (!mem.empty()) {
      const Pair& last = mem.back();
      scale = dot(last.s, last.y) / dot(last.y, last.y);
    } else {
      // First step: cap the trial move at one percent of q per node.
      scale = 0.01 * field.q / std::max(gnorm, 1e-300);
    }
    for (double& v : dir) v *= scale;
    for (std::size_t m = 0; m < mem.size(); ++m) {
      const Pair& p = mem[m];
      const double beta = p.rho * dot(p.y, dir);
      for (std::size_t k = 0; k < n; ++k)
        dir[k] += (alpha_buf[m] - beta) * p.s[k];
    }
    for (double& v : dir) v = -v;

    double gd = dot(g, dir);
    if (!(gd < 0.0)) {
      for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k] * scale;
      gd = dot(g, dir);
    }

    // Backtracking with a noise-floor acceptance slack: near the minimum
    // the sufficient decrease sinks below the energy rounding floor, and
    // full quasi-Newton steps must still be taken on gradient information.
    const double slack =
        energy_floor +
        4.0 * std::numeric_limits<double>::epsilon() * std::abs(energy);
    double step = 1.0;
    double energy_trial = 0.0;
    while (true) {
      for (std::size_t k = 0; k < n; ++k) field.psi[k] = x[k] + step * dir[k];
      energy_trial = assemble_energy(field, table, lambda_e, params);
      if (energy_trial <= energy + params.armijo_c1 * step * gd + slack) break;
      step *= params.armijo_shrink;
      if (step < 1e-18) {
        field.psi = x;
        throw SolveError(
            "backtracking line search cannot decrease the energy; the last "
            "accepted iterate is kept on the field");
      }
    }

    assemble_gradient(field, table, lambda_e, params, g_new);
    Pair pr;
    pr.s.resize(n);
    pr.y.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      pr.s[k] = field.psi[k] - x[k];
      pr.y[k] = g_new[k] - g[k];
    }
    const double sy = dot(pr.s, pr.y);
    const double ss = std::sqrt(dot(pr.s, pr.s));
    const double yy = std::sqrt(dot(pr.y, pr.y));
    if (sy > 1e-12 * ss * yy) {
      pr.rho = 1.0 / sy;
      mem.push_back(std::move(pr));
      if (static_cast<int>(mem.size()) > std::max(1, params.lbfgs_memory))
        mem.pop_front();
    }

    x = field.psi;
    g.swap(g_new);
    energy = energy_trial;
    gnorm = sup_norm(g);
    ++iter;
    rep.log.push_back({iter, energy, gnorm, step});
  }

  // Clear rounding-level undershoots; overshoots above q stay within tol_q
  // by the energy barrier and are kept as-is.
  for (std::size_t k = 0; k < n; ++k)
    if (!field.dirichlet[k] && field.psi[k] < 0.0 &&
        field.psi[k] >= -params.tol_q)
      field.psi[k] = 0.0;
  refresh_coincidence(field, params);

  rep.iterations = iter;
  rep.energy = energy;
  rep.grad_norm = gnorm;
  return rep;
}

SolveReport minimize_with_continuation(StreamField& field,
                                       const ClosureTable& table,
                                       double lambda_e,
                                       const EnergyParams& params) {
  SolveReport first = minimize(field, table, lambda_e, params);
  EnergyParams refined = params;
  refined.delta_chi = 0.5 * params.delta_chi;
  SolveReport second = minimize(field, table, lambda_e, refined);

  SolveReport rep;
  rep.converged = first.converged && second.converged;
  rep.iterations = first.iterations + second.iterations;
  rep.energy = second.energy;
  rep.grad_norm = second.grad_norm;
  rep.log = std::move(first.log);
  for (SolveLogRow row : second.log) {
    row.iteration += first.iterations;
    rep.log.push_back(row);
  }
  return rep;
}

namespace {

constexpr int kMaxPlateauPasses = 8;

// Sharp energy of one element: gradient energy plus the unsmoothed
// indicator. The admit decisions below compare this quantity, not the
// smoothed objective, because the smoothed indicator is blind within tol_q
// of q.
double sharp_element_energy(const StreamField& field, const ClosureTable& table,
                            double lam2, const QuadRule& rule, double thr,
                            std::size_t e) {
  const TruncatedDomain& d = *field.domain;
  const MeshTri& tri = d.tris()[e];
  double g1, g2;
  tri_gradient(d, field.psi, e, g1, g2);
  const double tt = g1 * g1 + g2 * g2;
  double esum = 0.0;
  for (int qp = 0; qp < rule.n; ++qp) {
    const double psi_q = rule.bc[qp][0] * field.psi[tri.a] +
                         rule.bc[qp][1] * field.psi[tri.b] +
                         rule.bc[qp][2] * field.psi[tri.c];
    double val = table.energy_G(tt, psi_q);
    if (psi_q < thr) val += lam2;
    esum += rule.w[qp] * val;
  }
  return tri_area(d, e) * esum;
}

// Local sharp energy around one node: the adjacent elements only.
double sharp_patch_energy(const StreamField& field, const ClosureTable& table,
                          double lam2, const EnergyParams& params,
                          const std::vector<std::size_t>& patch) {
  const QuadRule rule = quad_rule(params.quad_order);
  const double thr = field.q - params.tol_q;
  double total = 0.0;
  for (std::size_t e : patch)
    total += sharp_element_energy(field, table, lam2, rule, thr, e);
  return total;
}

// Sharp energy over the whole domain, the quantity the realization loop
// descends.
double sharp_total_energy(const StreamField& field, const ClosureTable& table,
                          double lam2, const EnergyParams& params) {
  const QuadRule rule = quad_rule(params.quad_order);
  const double thr = field.q - params.tol_q;
  double total = 0.0;
  for (std::size_t e = 0; e < field.domain->tris().size(); ++e)
    total += sharp_element_energy(field, table, lam2, rule, thr, e);
  return total;
}

// One admit sweep over a relaxed field: columns left to right, rows top
// down, pinning a candidate onto {psi = q} whenever that does not raise the
// sharp energy of its patch. A node pinned earlier in the sweep acts as
// plateau data for the nodes after it, so a front can propagate within one
// sweep; nodes are never released, wrong pins are priced out by the energy
// test itself.
// A pin that drives some patch element past the sonic momentum it did not
// already exceed is vetoed outright: past that point the truncated energy
// grows only linearly in t, so the energy comparison would underprice the
// cliff the pin creates. Real plateau fronts arrive with subsonic edges.
bool pin_breaks_sonic(const StreamField& field, const ClosureTable& table,
                      const std::vector<std::size_t>& patch,
                      const std::vector<double>& t_old) {
  const TruncatedDomain& d = *field.domain;
  for (std::size_t m = 0; m < patch.size(); ++m) {
    const MeshTri& tri = d.tris()[patch[m]];
    double g1, g2;
    tri_gradient(d, field.psi, patch[m], g1, g2);
    const double t = g1 * g1 + g2 * g2;
    if (t <= t_old[m]) continue;
    const double z = std::clamp(
        (field.psi[tri.a] + field.psi[tri.b] + field.psi[tri.c]) / 3.0, 0.0,
        field.q);
    if (t > table.sonic_momentum_sq(z)) return true;
  }
  return false;
}

int plateau_admit_sweep(StreamField& field, const ClosureTable& table,
                        double lambda_e, const EnergyParams& params,
                        const std::vector<std::vector<std::size_t>>& adj) {
  const TruncatedDomain& d = *field.domain;
  const double band = field.q - params.delta_chi;
  const double lam2 = lambda_e * lambda_e;
  const double eps = std::numeric_limits<double>::epsilon();
  int admitted = 0;
  std::vector<double> t_old;
  for (int i = 0; i < d.ncols(); ++i) {
    for (int j = d.nrows() - 1; j >= 0; --j) {
      const std::size_t k = static_cast<std::size_t>(d.node_id(i, j));
      if (field.dirichlet[k] || field.psi[k] < band) continue;
      const std::vector<std::size_t>& patch = adj[k];
      t_old.resize(patch.size());
      for (std::size_t m = 0; m < patch.size(); ++m) {
        double g1, g2;
        tri_gradient(d, field.psi, patch[m], g1, g2);
        t_old[m] = g1 * g1 + g2 * g2;
      }
      const double keep = field.psi[k];
      const double before =
          sharp_patch_energy(field, table, lam2, params, patch);
      field.psi[k] = field.q;
      if (pin_breaks_sonic(field, table, patch, t_old)) {
        field.psi[k] = keep;
        continue;
      }
      const double after =
          sharp_patch_energy(field, table, lam2, params, patch);
      double patch_area = 0.0;
      for (std::size_t e : patch) patch_area += tri_area(d, e);
      const double slack =
          4.0 * eps * patch_area * table.energy_rounding_scale();
      if (after <= before + slack) {
        field.dirichlet[k] = 1;
        ++admitted;
      } else {
        field.psi[k] = keep;
      }
    }
  }
  return admitted;
}

}  // namespace

SolveReport minimize_with_plateau(StreamField& field, const ClosureTable& table,
                                  double lambda_e, const EnergyParams& params,
                                  bool trust_plateau) {
  if (lambda_e == 0.0) return minimize(field, table, lambda_e, params);
  check_params(field, params);
  const TruncatedDomain& d = *field.domain;
  std::vector<char> base = field.dirichlet;

  // Trusted fields carry an already-realized plateau for this very problem:
  // pin it and re-equilibrate the fluid, never grow the set. Growing here
  // would hand a warm restart more realization passes than a cold solve got,
  // and the two would drift apart.
  if (trust_plateau) {
    const double thr = field.q - params.tol_q;
    for (std::size_t k = 0; k < field.psi.size(); ++k)
      if (!field.dirichlet[k] && field.psi[k] >= thr) {
        field.psi[k] = field.q;
        field.dirichlet[k] = 1;
      }
    SolveReport rep;
    try {
      rep = minimize(field, table, lambda_e, params);
    } catch (...) {
      field.dirichlet = std::move(base);
      throw;
    }
    field.dirichlet = std::move(base);
    refresh_coincidence(field, params);
    return rep;
  }

  std::vector<std::vector<std::size_t>> adj(field.psi.size());
  for (std::size_t e = 0; e < d.tris().size(); ++e) {
    const MeshTri& tri = d.tris()[e];
    adj[tri.a].push_back(e);
    adj[tri.b].push_back(e);
    adj[tri.c].push_back(e);
  }

  const double lam2 = lambda_e * lambda_e;
  double domain_area = 0.0;
  for (std::size_t e = 0; e < d.tris().size(); ++e)
    domain_area += tri_area(d, e);
  const double gslack = 4.0 * std::numeric_limits<double>::epsilon() *
                        domain_area * table.energy_rounding_scale();

  SolveReport rep;
  int total_iterations = 0;
  bool finished = false;
  try {
    rep = minimize(field, table, lambda_e, params);
    total_iterations += rep.iterations;
    bool ok = rep.converged;
    // Each pass admits onto the plateau and re-equilibrates the fluid around
    // the grown set. The smoothed descent inside minimize can raise the
    // sharp energy (it pulls the indicator band upward where the sharp
    // indicator sees nothing), so a pass that fails to lower the sharp
    // energy is undone wholesale and the loop stops: the realization is a
    // descent procedure for the sharp energy or it is nothing.
    for (int pass = 0; pass < kMaxPlateauPasses; ++pass) {
      const double e0 = sharp_total_energy(field, table, lam2, params);
      const std::vector<double> psi0 = field.psi;
      const std::vector<char> mask0 = field.dirichlet;
      const int admitted =
          plateau_admit_sweep(field, table, lambda_e, params, adj);
      if (admitted == 0) {
        finished = true;
        break;
      }
      rep = minimize(field, table, lambda_e, params);
      total_iterations += rep.iterations;
      const double e1 = sharp_total_energy(field, table, lam2, params);
      if (e1 > e0 + gslack) {
        field.psi = psi0;
        field.dirichlet = mask0;
        finished = true;
        break;
      }
      ok = ok && rep.converged;
    }
    rep.converged = ok && finished;
  } catch (...) {
    field.dirichlet = std::move(base);
    throw;
  }
  rep.iterations = total_iterations;
  field.dirichlet = std::move(base);
  refresh_coincidence(field, params);
  return rep;
}

ResidualStats el_residual(const StreamField& field, const ClosureTable& table,
                          const EnergyParams& params) {
  check_params(field, params);
  const TruncatedDomain& d = *field.domain;
  std::vector<double> grad;
  assemble_gradient(field, table, 0.0, params, grad);

  std::vector<double> mass(grad.size(), 0.0);
  for (std::size_t e = 0; e < d.tris().size(); ++e) {
    const MeshTri& tri = d.tris()[e];
    const double third = tri_area(d, e) / 3.0;
    mass[tri.a] += third;
    mass[tri.b] += third;
    mass[tri.c] += third;
  }

  const double cut = field.q - 10.0 * params.delta_chi;
  ResidualStats st;
  double l2 = 0.0;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    if (d.tag(k) != BoundaryTag::kInterior || field.dirichlet[k]) continue;
    if (!(field.psi[k] < cut)) continue;
    const double r = grad[k] / mass[k];
    st.max_abs = std::max(st.max_abs, std::abs(r));
    l2 += mass[k] * r * r;
    if (std::abs(r) > params.el_threshold) st.flagged.push_back(static_cast<int>(k));
  }
  st.l2 = std::sqrt(l2);
  return st;
}

namespace {

// Column/row lookup tables for structured point location.
struct DomainLookup {
  std::vector<double> colx, colh, etas;

  explicit DomainLookup(const TruncatedDomain& d) {
    colx.reserve(d.ncols());
    colh.reserve(d.ncols());
    for (int i = 0; i < d.ncols(); ++i) {
      colx.push_back(d.col_x1(i));
      colh.push_back(d.col_height(i));
    }
    etas.reserve(d.nrows());
    for (int j = 0; j < d.nrows(); ++j) etas.push_back(d.eta(j));
  }

  int interval(const std::vector<double>& xs, double x) const {
    int i = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) -
                             xs.begin()) -
            1;
    return std::clamp(i, 0, static_cast<int>(xs.size()) - 2);
  }

  int col_of(double x1) const { return interval(colx, x1); }
  int row_of(double eta) const { return interval(etas, eta); }

  double height_at(double x1, int i) const {
    const double w = colx[i + 1] - colx[i];
    const double xi = w > 0.0 ? (x1 - colx[i]) / w : 0.0;
    return (1.0 - xi) * colh[i] + xi * colh[i + 1];
  }
};

bool tri_contains(const TruncatedDomain& d, std::size_t e, double x1,
                  double x2, double& min_bc) {
  const MeshTri& t = d.tris()[e];
  const MeshNode& a = d.nodes()[t.a];
  const MeshNode& b = d.nodes()[t.b];
  const MeshNode& c = d.nodes()[t.c];
  const double s =
      (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
  const double wa =
      ((b.x1 - x1) * (c.x2 - x2) - (c.x1 - x1) * (b.x2 - x2)) / s;
  const double wb =
      ((c.x1 - x1) * (a.x2 - x2) - (a.x1 - x1) * (c.x2 - x2)) / s;
  const double wc = 1.0 - wa - wb;
  min_bc = std::min({wa, wb, wc});
  return min_bc >= -1e-9;
}

std::size_t locate_tri(const TruncatedDomain& d, const DomainLookup& lk,
                       double x1, double x2) {
  const int i0 = lk.col_of(x1);
  std::size_t best = 0;
  double best_bc = -std::numeric_limits<double>::infinity();
  for (int di : {0, -1, 1}) {
    const int i = i0 + di;
    if (i < 0 || i >= d.ncols() - 1) continue;
    const double hx = lk.height_at(x1, i);
    const int j0 = lk.row_of(hx > 0.0 ? x2 / hx : 0.0);
    for (int dj : {0, -1, 1}) {
      const int j = j0 + dj;
      if (j < 0 || j >= d.nrows() - 1) continue;
      const std::size_t base = d.cell_tri_base(i, j);
      for (std::size_t e : {base, base + 1}) {
        double bc;
        if (tri_contains(d, e, x1, x2, bc)) return e;
        if (bc > best_bc) {
          best_bc = bc;
          best = e;
        }
      }
    }
  }
  return best;
}

}  // namespace

FreeBoundaryCurve extract_free_boundary(const StreamField& field,
                                        const EnergyParams& params) {
  const TruncatedDomain& d = *field.domain;
  const double thr = field.q - params.tol_q;
  const int nc = d.ncols();
  const int nr = d.nrows();

  bool any = false;
  for (double v : field.psi)
    if (v >= thr) {
      any = true;
      break;
    }
  if (!any)
    throw ExtractionError(
        "coincidence set is empty: the field never pins to q over the "
        "window, so no free boundary exists (momentum parameter too small "
        "or window too short)");

  FreeBoundaryCurve curve;
  curve.gap_at_outlet = kLargeGap;

  // Interior row scans, top down. The wall and axis rows are not part of
  // the free boundary.
  for (int j = nr - 2; j >= 1; --j) {
    MeshNode hit{0.0, 0.0};
    int crossings = 0;
    for (int i = 0; i + 1 < nc; ++i) {
      const double a = field.psi[d.node_id(i, j)];
      const double b = field.psi[d.node_id(i + 1, j)];
      if ((a >= thr) == (b >= thr)) continue;
      const double s = (thr - a) / (b - a);
      const MeshNode& na = d.nodes()[d.node_id(i, j)];
      const MeshNode& nb = d.nodes()[d.node_id(i + 1, j)];
      hit = {na.x1 + s * (nb.x1 - na.x1), na.x2 + s * (nb.x2 - na.x2)};
      ++crossings;
    }
    if (crossings > 1)
      throw ExtractionError("level line is not an x2-graph: mesh row " +
                            std::to_string(j) + " crosses it " +
                            std::to_string(crossings) + " times");
    if (j == nr - 2) {
      if (crossings == 1)
        curve.gap_at_outlet = hit.x1;
      else
        curve.gap_at_outlet =
            field.psi[d.node_id(0, j)] >= thr ? -kLargeGap : kLargeGap;
    }
    if (crossings == 1) curve.upsilon.push_back(hit);
  }

  // Downstream column scans, bottom up, first crossing from the fluid side.
  const int first_col = d.is_strip() ? 0 : d.outlet_col();
  for (int i = first_col; i < nc; ++i) {
    for (int j = 1; j < nr; ++j) {
      const double a = field.psi[d.node_id(i, j - 1)];
      const double b = field.psi[d.node_id(i, j)];
      if (a < thr && b >= thr) {
        const double s = (thr - a) / (b - a);
        const MeshNode& na = d.nodes()[d.node_id(i, j - 1)];
        const MeshNode& nb = d.nodes()[d.node_id(i, j)];
        curve.graph_f.push_back(
            {na.x1 + s * (nb.x1 - na.x1), na.x2 + s * (nb.x2 - na.x2)});
        break;
      }
    }
  }

  // Detachment estimate and slope trend over the trailing fifth of the
  // downstream graph.
  if (!curve.graph_f.empty()) {
    const std::size_t count = curve.graph_f.size();
    const std::size_t window =
        std::max<std::size_t>(2, (count + 4) / 5);
    const std::size_t begin = count - std::min(window, count);
    double lowest = curve.graph_f[begin].x2;
    std::vector<double> slopes;
    for (std::size_t k = begin; k + 1 < count; ++k) {
      const MeshNode& p = curve.graph_f[k];
      const MeshNode& q = curve.graph_f[k + 1];
      lowest = std::min(lowest, q.x2);
      if (q.x1 > p.x1) slopes.push_back(std::abs((q.x2 - p.x2) / (q.x1 - p.x1)));
    }
    curve.h_lower_est = lowest;
    if (slopes.size() < 2) {
      curve.slope_trend_ok = true;
    } else {
      const std::size_t half = slopes.size() / 2;
      double head = 0.0, tail = 0.0;
      for (std::size_t k = 0; k < half; ++k) head += slopes[k];
      for (std::size_t k = slopes.size() - half; k < slopes.size(); ++k)
        tail += slopes[k];
      head /= static_cast<double>(half);
      tail /= static_cast<double>(half);
      curve.slope_trend_ok = tail <= head + 1e-9 * (1.0 + head);
    }
  }

  return curve;
}

double outlet_gap(const StreamField& field, const EnergyParams& params) {
  const TruncatedDomain& d = *field.domain;
  const double thr = field.q - params.tol_q;
  const int nc = d.ncols();
  const int j = d.nrows() - 2;
  if (j < 1) throw GeometryError("mesh has no interior row to scan");
  for (int i = 0; i + 1 < nc; ++i) {
    const double a = field.psi[d.node_id(i, j)];
    const double b = field.psi[d.node_id(i + 1, j)];
    if ((a >= thr) == (b >= thr)) continue;
    const double s = (thr - a) / (b - a);
    const MeshNode& na = d.nodes()[d.node_id(i, j)];
    const MeshNode& nb = d.nodes()[d.node_id(i + 1, j)];
    return na.x1 + s * (nb.x1 - na.x1);
  }
  return field.psi[d.node_id(0, j)] >= thr ? -kLargeGap : kLargeGap;
}

FbConditionStats fb_condition_check(const StreamField& field,
                                    const FreeBoundaryCurve& curve,
                                    const ClosureTable&, double lambda) {
  const TruncatedDomain& d = *field.domain;
  const DomainLookup lk(d);
  std::vector<double> devs;
  devs.reserve(curve.graph_f.size() + curve.upsilon.size());

  auto sample = [&](double x1, double x2) {
    const std::size_t e = locate_tri(d, lk, x1, x2);
    double g1, g2;
    tri_gradient(d, field.psi, e, g1, g2);
    const double mag = std::sqrt(g1 * g1 + g2 * g2);
    devs.push_back(std::abs(mag - lambda) / lambda);
  };

  // One-sided sampling from the fluid side: below a downstream graph point,
  // left of a row-scan point.
  for (const MeshNode& s : curve.graph_f) {
    const int i = lk.col_of(s.x1);
    const double hx = lk.height_at(s.x1, i);
    if (!(hx > 0.0)) continue;
    const int j = lk.row_of(s.x2 / hx);
    const double eta_n = s.x2 / hx - 0.35 * (lk.etas[j + 1] - lk.etas[j]);
    sample(s.x1, std::max(0.0, eta_n) * hx);
  }
  for (const MeshNode& s : curve.upsilon) {
    const int i = lk.col_of(s.x1);
    const double x1n = s.x1 - 0.35 * (lk.colx[i + 1] - lk.colx[i]);
    sample(std::max(lk.colx.front(), x1n), s.x2);
  }

  FbConditionStats st;
  st.samples = static_cast<int>(devs.size());
  if (devs.empty()) return st;
  std::sort(devs.begin(), devs.end());
  st.max_rel = devs.back();
  const std::size_t m = devs.size() / 2;
  st.median_rel = devs.size() % 2 == 1
                      ? devs[m]
                      : 0.5 * (devs[m - 1] + devs[m]);
  return st;
}

}  // namespace subjet

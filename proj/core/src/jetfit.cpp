#include "subjet/jetfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "subjet/datum.hpp"
#include "subjet/errors.hpp"
#include "subjet/quadrature.hpp"

namespace subjet {

namespace {

bool opposite_signs(double a, double b) {
  return (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0);
}

EnergyParams fill_energy(const EnergyParams& given, double h, double lambda_e,
                         double q) {
  EnergyParams ep = given;
  const EnergyParams dflt = EnergyParams::defaults(h, lambda_e, q);
  if (ep.delta_chi <= 0.0) ep.delta_chi = dflt.delta_chi;
  if (ep.tol_q <= 0.0) ep.tol_q = dflt.tol_q;
  if (ep.grad_tol <= 0.0) ep.grad_tol = dflt.grad_tol;
  return ep;
}

}  // namespace

FitParams FitParams::defaults(double h, double q) {
  FitParams p;
  p.gap_tol = 2.0 * h;
  p.bracket_tol = 1e-3 * q;
  return p;
}

FitReport fit_search(const std::function<double(double)>& gap_at, double lo,
                     double hi, const FitParams& params) {
  if (!(hi > lo))
    throw ConfigError("fit bracket must be increasing");
  if (!(params.gap_tol > 0.0) || !(params.bracket_tol > 0.0))
    throw ConfigError("fit tolerances must be positive");

  FitReport rep;
  rep.initial_lo = lo;
  rep.initial_hi = hi;
  int budget = params.max_probes;
  auto probe = [&](double lam) {
    if (budget-- <= 0)
      throw FitError("probe budget exhausted before the outlet gap closed");
    const double g = gap_at(lam);
    rep.probes.push_back({lam, g});
    return g;
  };
  auto fits = [&](double g) { return std::abs(g) <= params.gap_tol; };
  auto finish = [&](double lam, double g, double blo, double bhi, bool fell) {
    rep.lambda_fit = lam;
    rep.gap = g;
    rep.bracket_lo = blo;
    rep.bracket_hi = bhi;
    rep.fell_back = fell;
    rep.converged = true;
    return rep;
  };

  // A warm hint (typically the previous stage's parameter) short-circuits
  // everything when its gap still fits, or when it lands back on the gap the
  // hint's own solve produced, which is the fixed-point signature.
  if (params.first_probe > 0.0) {
    const double g = probe(params.first_probe);
    const double pg = params.first_probe_gap;
    const bool reproduced =
        std::isfinite(pg) &&
        std::abs(g - pg) <= 1e-12 * std::max(1.0, std::abs(pg));
    if (fits(g) || reproduced) return finish(params.first_probe, g, lo, hi, false);
  }

  double glo = probe(lo);
  if (fits(glo)) return finish(lo, glo, lo, hi, false);
  double ghi = probe(hi);
  if (fits(ghi)) return finish(hi, ghi, lo, hi, false);

  // Expand toward a sign change, never past the hard limits.
  int expansions = 0;
  while (!opposite_signs(glo, ghi) && expansions < params.max_expansions) {
    const double span = hi - lo;
    const double nlo = std::max(params.lo_limit, lo - span);
    const double nhi = std::min(params.hi_limit, hi + span);
    if (nlo == lo && nhi == hi) break;
    ++expansions;
    if (nlo != lo) {
      lo = nlo;
      rep.initial_lo = lo;
      glo = probe(lo);
      if (fits(glo)) return finish(lo, glo, lo, hi, false);
    }
    if (!opposite_signs(glo, ghi) && nhi != hi) {
      hi = nhi;
      rep.initial_hi = hi;
      ghi = probe(hi);
      if (fits(ghi)) return finish(hi, ghi, lo, hi, false);
    }
  }

  if (opposite_signs(glo, ghi)) {
    while (hi - lo > params.bracket_tol) {
      const double mid = 0.5 * (lo + hi);
      const double gm = probe(mid);
      ++rep.iterations;
      if (opposite_signs(glo, gm)) {
        hi = mid;
        ghi = gm;
      } else {
        lo = mid;
        glo = gm;
      }
      if (fits(gm)) return finish(mid, gm, lo, hi, false);
    }
    // Bracket closed without the gap doing so; take the better end.
    if (std::abs(glo) <= std::abs(ghi)) return finish(lo, glo, lo, hi, false);
    return finish(hi, ghi, lo, hi, false);
  }

  // No sign change anywhere within the limits: minimize |gap| by golden
  // section and accept only a genuine fit.
  double a = lo, b = hi;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = probe(x1);
  if (fits(f1)) return finish(x1, f1, a, b, true);
  double f2 = probe(x2);
  if (fits(f2)) return finish(x2, f2, a, b, true);
  while (b - a > params.bracket_tol) {
    ++rep.iterations;
    if (std::abs(f1) <= std::abs(f2)) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = probe(x1);
      if (fits(f1)) return finish(x1, f1, a, b, true);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = probe(x2);
      if (fits(f2)) return finish(x2, f2, a, b, true);
    }
  }
  throw FitError("outlet gap keeps one sign and its minimum misses tolerance");
}

FitOutcome continuous_fit(const TruncatedDomain& domain,
                          const ClosureTable& table, double lambda_lo,
                          double lambda_hi, const FitParams& params,
                          const StreamField* warm) {
  const double q = table.q();
  const double root_tc = std::sqrt(table.sonic_momentum_sq(q));

  FitParams p = params;
  {
    const FitParams d = FitParams::defaults(domain.h(), q);
    if (p.gap_tol <= 0.0) p.gap_tol = d.gap_tol;
    if (p.bracket_tol <= 0.0) p.bracket_tol = d.bracket_tol;
  }
  // The momentum parameter lives strictly inside the subsonic branch; pin
  // the expansion walls there whatever the caller passed.
  p.lo_limit = std::max(p.lo_limit, 1e-3 * root_tc);
  p.hi_limit = std::min(p.hi_limit, (1.0 - 1e-6) * root_tc);
  lambda_lo = std::max(lambda_lo, p.lo_limit);
  lambda_hi = std::min(lambda_hi, p.hi_limit);

  FitOutcome out;
  StreamField carry;  // warm-start chain across probes
  bool have_carry = false;
  if (warm != nullptr) {
    carry = *warm;
    have_carry = true;
  }

  struct ProbeResult {
    StreamField field;
    EnergyParams ep;
    double lambda_e = 0.0;
    double gap = 0.0;
  };

  const bool caller_warm = warm != nullptr;
  bool any_solve_done = false;
  auto run_probe = [&](double lam) {
    ProbeResult r;
    r.lambda_e = table.fb_lambda(lam);
    r.ep = fill_energy(p.energy, domain.h(), r.lambda_e, q);
    const BoundaryDatum bd = boundary_datum(domain, table, lam);
    r.field = initial_field(domain, bd, table, r.ep);
    if (have_carry)
      for (std::size_t k = 0; k < r.field.psi.size(); ++k)
        if (!r.field.dirichlet[k])
          r.field.psi[k] = std::clamp(carry.psi[k], 0.0, q);
    // A caller-supplied field is a realized solution of the same problem
    // only on the very first solve and only at the carried-over multiplier.
    const bool trust = caller_warm && !any_solve_done && lam == p.first_probe;
    const SolveReport sr =
        minimize_with_plateau(r.field, table, r.lambda_e, r.ep, trust);
    any_solve_done = true;
    out.opt_iterations += sr.iterations;
    r.gap = outlet_gap(r.field, r.ep);
    return r;
  };

  ProbeResult best;
  double best_lambda = std::numeric_limits<double>::quiet_NaN();
  double best_abs = std::numeric_limits<double>::infinity();
  auto probe = [&](double lam) {
    ProbeResult r = run_probe(lam);
    carry = r.field;
    have_carry = true;
    const double gap = r.gap;
    if (std::abs(gap) < best_abs) {
      best_abs = std::abs(gap);
      best_lambda = lam;
      best = std::move(r);
    }
    return gap;
  };

  out.report = fit_search(probe, lambda_lo, lambda_hi, p);
  if (best_lambda != out.report.lambda_fit) {
    // The width stop accepted an endpoint whose field was displaced by a
    // later probe; solve once more at the accepted parameter.
    best = run_probe(out.report.lambda_fit);
  }
  out.lambda_e = best.lambda_e;
  out.field = std::move(best.field);
  out.boundary = extract_free_boundary(out.field, best.ep);
  return out;
}

SubsonicReport subsonic_check(const StreamField& field,
                              const ClosureTable& table, double eps) {
  const TruncatedDomain& d = *field.domain;
  // The inlet datum concentrates the flux in a thin near-wall ramp, so the
  // elements touching the inlet plane carry gradients that say nothing about
  // the flow. One channel height of relaxation distance clears that layer;
  // strips carry no such datum and are measured wholesale.
  const double x1_min =
      d.is_strip() ? -std::numeric_limits<double>::infinity() : -d.mu() + 1.0;
  SubsonicReport rep;
  for (std::size_t e = 0; e < d.tris().size(); ++e) {
    const MeshTri& tc = d.tris()[e];
    const double cx = (d.nodes()[tc.a].x1 + d.nodes()[tc.b].x1 +
                       d.nodes()[tc.c].x1) / 3.0;
    if (cx < x1_min) continue;
    double g1 = 0.0, g2 = 0.0;
    tri_gradient(d, field.psi, e, g1, g2);
    const double t = g1 * g1 + g2 * g2;
    if (t == 0.0) continue;
    const MeshTri& tr = d.tris()[e];
    const double z = std::clamp(
        (field.psi[tr.a] + field.psi[tr.b] + field.psi[tr.c]) / 3.0, 0.0,
        field.q);
    const double ratio = t / table.sonic_momentum_sq(z);
    if (ratio > rep.ratio) {
      rep.ratio = ratio;
      rep.element = e;
    }
  }
  rep.pass = rep.ratio <= 1.0 - eps;
  return rep;
}

DownstreamState downstream_state(const ClosureTable& table, double lambda) {
  const double q = table.q();
  if (!(lambda > 0.0))
    throw DomainError("momentum parameter must be positive");
  const double tcq = table.sonic_momentum_sq(q);
  if (!(lambda * lambda < tcq))
    throw SonicError("momentum parameter on or above the sonic branch",
                     lambda * lambda, q);

  const double ga = table.gamma();
  const double pressure = table.pressure_from_fb(lambda);
  auto density = [&](double z) {
    return std::pow(ga * pressure / ((ga - 1.0) * table.entropy(z)), 1.0 / ga);
  };
  auto speed = [&](double z) {
    const double rho = density(z);
    const double rad = 2.0 * table.bernoulli(z) -
                       2.0 * std::pow(rho, ga - 1.0) * table.entropy(z);
    if (!(rad > 0.0))
      throw DomainError(
          "downstream pressure reaches a streamline's stagnation value");
    return std::sqrt(rad);
  };

  const int n = 129;
  DownstreamState ds;
  ds.pressure = pressure;
  ds.z.resize(n);
  ds.rho.resize(n);
  ds.u.resize(n);
  ds.x2.resize(n);
  ds.x2[0] = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = q * (static_cast<double>(k) / (n - 1));
    ds.z[k] = z;
    ds.rho[k] = density(z);
    ds.u[k] = speed(z);
    if (k > 0)
      ds.x2[k] =
          ds.x2[k - 1] +
          adaptive_gk([&](double s) { return 1.0 / (density(s) * speed(s)); },
                      ds.z[k - 1], z, 1e-10);
  }
  ds.height = ds.x2.back();
  return ds;
}

JetSolution continuation(const NozzleGeometry& nozzle,
                         const ClosureTable& table, double lambda_lo,
                         double lambda_hi,
                         const std::vector<TruncationStage>& schedule,
                         const ContinuationParams& params) {
  if (schedule.empty())
    throw ConfigError("truncation schedule is empty");
  if (!(params.h > 0.0))
    throw ConfigError("continuation mesh size must be positive");
  for (std::size_t j = 1; j < schedule.size(); ++j)
    if (schedule[j].mu < schedule[j - 1].mu ||
        schedule[j].r < schedule[j - 1].r)
      throw ConfigError("truncation schedule must be nondecreasing");

  const double q = table.q();
  FitParams fp_base = params.fit;
  {
    const FitParams d = FitParams::defaults(params.h, q);
    if (fp_base.gap_tol <= 0.0) fp_base.gap_tol = d.gap_tol;
    if (fp_base.bracket_tol <= 0.0) fp_base.bracket_tol = d.bracket_tol;
  }

  JetSolution sol;
  std::shared_ptr<const TruncatedDomain> dom, prev_dom;
  StreamField prev_field;
  StreamField warm;
  double prev_lambda = 0.0;
  double prev_gap = std::numeric_limits<double>::quiet_NaN();
  FitOutcome fit;

  for (std::size_t j = 0; j < schedule.size(); ++j) {
    const TruncationStage& st = schedule[j];
    dom = std::make_shared<TruncatedDomain>(
        TruncatedDomain::build(nozzle, st.mu, st.r, params.h, params.grading));

    FitParams fp = fp_base;
    const StreamField* wp = nullptr;
    if (j > 0) {
      warm.domain = dom.get();
      warm.q = q;
      const std::size_t n = dom->nodes().size();
      warm.psi.resize(n);
      warm.dirichlet.assign(n, 0);
      warm.coincident.assign(n, 0);
      for (std::size_t k = 0; k < n; ++k) {
        const MeshNode& nd = dom->nodes()[k];
        warm.psi[k] = std::clamp(
            prev_dom->interpolate(prev_field.psi, nd.x1, nd.x2), 0.0, q);
        if (dom->tag(k) != BoundaryTag::kInterior) warm.dirichlet[k] = 1;
      }
      wp = &warm;
      fp.first_probe = prev_lambda;
      fp.first_probe_gap = prev_gap;
    }

    fit = continuous_fit(*dom, table, lambda_lo, lambda_hi, fp, wp);

    StageLog log;
    log.mu = st.mu;
    log.r = st.r;
    log.lambda = fit.report.lambda_fit;
    log.fit_probes = static_cast<int>(fit.report.probes.size());
    log.opt_iterations = fit.opt_iterations;
    log.mach = subsonic_check(fit.field, table, table.epsilon()).ratio;
    if (j > 0) {
      log.dlambda = log.lambda - prev_lambda;
      const double mu_prev = schedule[j - 1].mu;
      const double r_prev = schedule[j - 1].r;
      double dmax = 0.0;
      for (std::size_t k = 0; k < dom->nodes().size(); ++k) {
        const MeshNode& nd = dom->nodes()[k];
        if (nd.x1 < -mu_prev - 1e-12 || nd.x1 > r_prev + 1e-12) continue;
        dmax = std::max(dmax, std::abs(fit.field.psi[k] - warm.psi[k]));
      }
      log.dpsi = dmax;
    }
    {
      // Departure from the upstream profile two lengths in from the inlet.
      const double x1e = std::clamp(-st.mu + 2.0, -st.mu, st.r);
      const double hloc = x1e < 0.0 ? nozzle.wall_height(x1e) : 1.0;
      double res = 0.0;
      for (int k = 0; k <= 64; ++k) {
        const double x2 = hloc * k / 64.0;
        res = std::max(
            res, std::abs(dom->interpolate(fit.field.psi, x1e, x2) -
                          std::min(q, table.model().stream_profile(x2))));
      }
      log.upstream_residual = res;
    }
    sol.stages.push_back(log);

    const bool stable =
        j > 0 && log.dpsi <= params.psi_tol * q &&
        std::abs(log.dlambda) <= params.lambda_tol * std::abs(log.lambda);
    prev_dom = dom;
    prev_field = fit.field;
    prev_lambda = log.lambda;
    prev_gap = fit.report.gap;
    if (stable) {
      sol.converged = true;
      break;
    }
  }

  // Sharpen the accepted stage with the halved indicator width, trusting the
  // plateau the fit already realized, then package boundary and diagnostics
  // from the polished field.
  EnergyParams ep = fill_energy(fp_base.energy, dom->h(), fit.lambda_e, q);
  ep.delta_chi *= 0.5;
  minimize_with_plateau(fit.field, table, fit.lambda_e, ep, true);
  sol.domain = dom;
  sol.field = std::move(fit.field);
  sol.boundary = extract_free_boundary(sol.field, ep);
  sol.lambda = prev_lambda;
  sol.mu = sol.stages.back().mu;
  sol.r = sol.stages.back().r;
  sol.downstream = downstream_state(table, sol.lambda);
  sol.mach = subsonic_check(sol.field, table, table.epsilon());
  return sol;
}

CriticalReport critical_search(
    const std::function<CriticalProbe(double)>& probe, double p_lo,
    double p_hi, const CriticalParams& params) {
  if (!(p_hi > p_lo))
    throw ConfigError("pressure bracket must be increasing");
  if (!(params.width > 0.0))
    throw ConfigError("bracket width must be positive");

  CriticalReport rep;
  int budget = params.max_probes;
  auto run = [&](double p) {
    if (budget-- <= 0)
      throw FitError("probe budget exhausted before the pressure bracket closed");
    CriticalProbe s = probe(p);
    s.pbar = p;
    rep.probes.push_back(s);
    return s;
  };

  const CriticalProbe top = run(p_hi);
  if (top.solver_failed || !top.pass)
    throw ConfigError("upper pressure end must produce a subsonic solution");
  const CriticalProbe bot = run(p_lo);
  if (!bot.solver_failed && bot.pass)
    throw ConfigError("lower pressure end must fail the subsonic check");

  double lo = p_lo, hi = p_hi;
  while (hi - lo > params.width) {
    const double mid = 0.5 * (lo + hi);
    const CriticalProbe s = run(mid);
    (!s.solver_failed && s.pass ? hi : lo) = mid;
  }
  rep.p_lo = lo;
  rep.p_hi = hi;
  rep.p_critical = 0.5 * (lo + hi);

  // The flow should approach the sonic bound as the pressure drops; flag a
  // non-monotone sweep but keep the bracket.
  std::vector<const CriticalProbe*> clean;
  for (const CriticalProbe& s : rep.probes)
    if (!s.solver_failed) clean.push_back(&s);
  std::sort(clean.begin(), clean.end(),
            [](const CriticalProbe* x, const CriticalProbe* y) {
              return x->pbar > y->pbar;
            });
  for (std::size_t k = 1; k < clean.size(); ++k)
    if (clean[k]->mach <
        clean[k - 1]->mach - 1e-9 * (1.0 + std::abs(clean[k - 1]->mach)))
      rep.monotone_ok = false;
  return rep;
}

CriticalReport critical_pressure(const JetTemplate& tpl, double p_lo,
                                 double p_hi, const CriticalParams& params) {
  if (!tpl.gas)
    throw ConfigError("gas model factory is required");
  if (tpl.nozzle == nullptr)
    throw ConfigError("nozzle geometry is required");
  if (tpl.schedule.empty())
    throw ConfigError("truncation schedule is empty");

  auto probe = [&](double pbar) {
    CriticalProbe s;
    s.pbar = pbar;
    try {
      const ClosureTable table(tpl.gas(pbar), tpl.closure_eps, tpl.z_nodes);
      const double root_tc = std::sqrt(table.sonic_momentum_sq(table.q()));
      const JetSolution sol = continuation(
          *tpl.nozzle, table, tpl.lambda_lo_frac * root_tc,
          tpl.lambda_hi_frac * root_tc, tpl.schedule, tpl.cont);
      s.mach = sol.mach.ratio;
      s.pass = sol.converged && sol.mach.pass;
    } catch (const Error& err) {
      s.solver_failed = true;
      s.failure = err.what();
    }
    return s;
  };

  CriticalReport rep = critical_search(probe, p_lo, p_hi, params);
  rep.eps = tpl.closure_eps;
  return rep;
}

}  // namespace subjet

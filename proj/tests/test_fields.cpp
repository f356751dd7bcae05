#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "subjet/closure.hpp"
#include "subjet/errors.hpp"
#include "subjet/fields.hpp"
#include "subjet/geometry.hpp"
#include "subjet/jetfit.hpp"
#include "subjet/profiles.hpp"
#include "subjet/solver.hpp"

using namespace subjet;

namespace {

struct StripSolve {
  std::shared_ptr<TruncatedDomain> dom;
  StreamField field;
};

// Solves the pure flow problem on the unit strip with the upstream profile
// as Dirichlet datum on all four sides; no indicator, no free boundary.
StripSolve solve_strip(const ClosureTable& t, double h) {
  StripSolve s;
  s.dom = std::make_shared<TruncatedDomain>(TruncatedDomain::strip(h));
  const double q = t.q();
  s.field.domain = s.dom.get();
  s.field.q = q;
  const auto& nodes = s.dom->nodes();
  s.field.psi.resize(nodes.size());
  s.field.dirichlet.assign(nodes.size(), 0);
  s.field.coincident.assign(nodes.size(), 0);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    s.field.psi[k] = t.model().stream_profile(nodes[k].x2);
    if (s.dom->tag(k) != BoundaryTag::kInterior) s.field.dirichlet[k] = 1;
  }
  EnergyParams p = EnergyParams::defaults(h, 0.0, q);
  SolveReport rep = minimize(s.field, t, 0.0, p);
  REQUIRE(rep.converged);
  return s;
}

// One jet solve shared by the recovery and export cases: contracting nozzle,
// constant upstream state, coarse mesh, repeated truncation stage.
struct JetFix {
  ClosureTable table;
  JetSolution sol;
  PhysicalFields pf;
};

const JetFix& jet_fixture() {
  static JetFix* fx = [] {
    auto* f = new JetFix{
        ClosureTable(GasModel::uniform(1.4, 10.0 / 1.4, 1.3), 0.1, 512),
        {},
        {}};
    NozzleGeometry noz = NozzleGeometry::mirrored_exponential(1.3, 2.0);
    const double tc = f->table.sonic_momentum_sq(f->table.q());
    ContinuationParams cp;
    cp.h = 1.0 / 6.0;
    cp.fit = FitParams::defaults(cp.h, f->table.q());
    std::vector<TruncationStage> sched{{1.5, 1.5}, {1.5, 1.5}};
    f->sol = continuation(noz, f->table, 0.25 * std::sqrt(tc),
                          0.85 * std::sqrt(tc), sched, cp);
    f->pf = recover_fields(f->sol.field, f->table);
    return f;
  }();
  return *fx;
}

// Element gradient of a P1 field, written out locally so the divergence
// measurement does not lean on the library's own operator.
struct Grad {
  double gx, gy, area;
};

Grad p1_grad(const TruncatedDomain& d, const MeshTri& tr,
             const std::vector<double>& v) {
  const MeshNode& a = d.nodes()[tr.a];
  const MeshNode& b = d.nodes()[tr.b];
  const MeshNode& c = d.nodes()[tr.c];
  const double det =
      (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
  Grad g;
  g.area = 0.5 * det;
  g.gx = ((b.x2 - c.x2) * v[tr.a] + (c.x2 - a.x2) * v[tr.b] +
          (a.x2 - b.x2) * v[tr.c]) /
         det;
  g.gy = ((c.x1 - b.x1) * v[tr.a] + (a.x1 - c.x1) * v[tr.b] +
          (b.x1 - a.x1) * v[tr.c]) /
         det;
  return g;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("fields") {

TEST_CASE("constant data reproduces the upstream state") {
  ClosureTable t(GasModel::uniform(1.4, 2.0, 1.0), 0.1, 512);
  StripSolve s = solve_strip(t, 1.0 / 8.0);
  PhysicalFields pf = recover_fields(s.field, t);

  REQUIRE(pf.rho.size() == s.dom->nodes().size());
  CHECK(pf.saturated_count == 0);

  // rho = u1 = 1, u2 = 0, P = 2; the Mach number is 1/sqrt(gamma P / rho).
  const double mach0 = 1.0 / std::sqrt(1.4 * 2.0);
  for (std::size_t k = 0; k < pf.rho.size(); ++k) {
    CHECK(pf.rho[k] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pf.u1[k] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(pf.u2[k]) <= 1e-9);
    CHECK(pf.p[k] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(pf.mach[k] == doctest::Approx(mach0).epsilon(1e-9));
    CHECK(std::abs(pf.omega[k]) <= 1e-8);
  }

  TransportResiduals r = transport_residuals(pf, t, s.field);
  CHECK(r.bernoulli_max <= 1e-10);
  CHECK(r.entropy_max <= 1e-10);
}

TEST_CASE("vorticity matches the closure slopes on sheared flow") {
  // u = 1 + x2 at constant density: the true vorticity is -1 everywhere,
  // and the slope form -rho B' + rho^gamma S'/gamma reduces to -rho.
  ClosureTable t(GasModel::linear_velocity(1.4, 4.0, 1.0), 0.1, 1024);
  const double q = t.q();
  REQUIRE(q == doctest::Approx(1.5).epsilon(1e-12));

  // Central differences of the tabulated invariants act as the oracle; on
  // this profile B' = 1 and S' = 0 exactly.
  const double dz = 1e-4 * q;
  auto bp = [&](double z) {
    return (t.bernoulli(z + dz) - t.bernoulli(z - dz)) / (2.0 * dz);
  };
  auto sp = [&](double z) {
    return (t.entropy(z + dz) - t.entropy(z - dz)) / (2.0 * dz);
  };
  CHECK(bp(0.625) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(sp(0.625)) <= 1e-6);

  auto vorticity_err = [&](double h) {
    StripSolve s = solve_strip(t, h);
    PhysicalFields pf = recover_fields(s.field, t);
    double err = 0.0;
    for (std::size_t k = 0; k < pf.omega.size(); ++k) {
      const MeshNode& nd = s.dom->nodes()[k];
      if (nd.x1 < 0.3 || nd.x1 > 0.7 || nd.x2 < 0.3 || nd.x2 > 0.7) continue;
      const double z = s.field.psi[k];
      const double oracle =
          -pf.rho[k] * bp(z) +
          std::pow(pf.rho[k], t.gamma()) * sp(z) / t.gamma();
      err = std::max(err, std::abs(pf.omega[k] - oracle) / std::abs(oracle));
    }
    return err;
  };

  const double e12 = vorticity_err(1.0 / 12.0);
  const double e24 = vorticity_err(1.0 / 24.0);
  CHECK(e12 <= 5e-2);
  CHECK(e24 < e12);
}

TEST_CASE("mass flux divergence shrinks under refinement") {
  ClosureTable t(GasModel::linear_velocity(1.4, 4.0, 1.0), 0.1, 1024);

  auto div_l2 = [&](double h) {
    StripSolve s = solve_strip(t, h);
    PhysicalFields pf = recover_fields(s.field, t);
    std::vector<double> m1(pf.rho.size()), m2(pf.rho.size());
    for (std::size_t k = 0; k < pf.rho.size(); ++k) {
      m1[k] = pf.rho[k] * pf.u1[k];
      m2[k] = pf.rho[k] * pf.u2[k];
    }
    double acc = 0.0, area = 0.0;
    for (const MeshTri& tr : s.dom->tris()) {
      const MeshNode& a = s.dom->nodes()[tr.a];
      const MeshNode& b = s.dom->nodes()[tr.b];
      const MeshNode& c = s.dom->nodes()[tr.c];
      const double cx = (a.x1 + b.x1 + c.x1) / 3.0;
      const double cy = (a.x2 + b.x2 + c.x2) / 3.0;
      if (cx < 0.2 || cx > 0.8 || cy < 0.2 || cy > 0.8) continue;
      const Grad g1 = p1_grad(*s.dom, tr, m1);
      const Grad g2 = p1_grad(*s.dom, tr, m2);
      const double div = g1.gx + g2.gy;
      acc += g1.area * div * div;
      area += g1.area;
    }
    return std::sqrt(acc / area);
  };

  const double n12 = div_l2(1.0 / 12.0);
  const double n24 = div_l2(1.0 / 24.0);
  CHECK(n12 <= 0.5);
  CHECK(n24 < n12);
}

TEST_CASE("transport identities hold and detect corruption") {
  // Both invariants vary along streamlines here, so a perturbed stream
  // function must show up in both residuals.
  ClosureTable t(GasModel::cosine_bump(1.4, 2.0, 1.0), 0.1, 1024);
  const double q = t.q();
  StripSolve s = solve_strip(t, 1.0 / 12.0);
  PhysicalFields pf = recover_fields(s.field, t);

  TransportResiduals clean = transport_residuals(pf, t, s.field);
  CHECK(clean.bernoulli_max <= 1e-10);
  CHECK(clean.entropy_max <= 1e-10);
  CHECK(clean.bernoulli_l2 <= clean.bernoulli_max);
  CHECK(clean.entropy_l2 <= clean.entropy_max);

  StreamField noisy = s.field;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (std::size_t k = 0; k < noisy.psi.size(); ++k)
    if (!noisy.dirichlet[k])
      noisy.psi[k] =
          std::clamp(noisy.psi[k] + 1e-3 * q * unif(rng), 0.0, q);

  TransportResiduals dirty = transport_residuals(pf, t, noisy);
  CHECK(dirty.bernoulli_max > clean.bernoulli_max);
  CHECK(dirty.entropy_max > clean.entropy_max);
  CHECK(dirty.bernoulli_l2 > clean.bernoulli_l2);
  CHECK(dirty.entropy_l2 > clean.entropy_l2);
}

TEST_CASE("recovered jet flow is subsonic with downward drift") {
  const JetFix& fx = jet_fixture();
  const ClosureTable& t = fx.table;
  const PhysicalFields& pf = fx.pf;
  const TruncatedDomain& d = *fx.sol.domain;
  REQUIRE(fx.sol.converged);
  REQUIRE(pf.rho.size() == d.nodes().size());

  // The inlet datum rams the flux through a thin layer, so saturation is
  // confined to the first stretch of the channel.
  CHECK(pf.saturated_count > 0);
  for (std::size_t k = 0; k < pf.rho.size(); ++k)
    if (pf.saturated[k]) CHECK(d.nodes()[k].x1 < -0.5);

  const double rho_lo = 1.0 / t.g_upper();
  const double rho_hi = 1.0 / t.g_lower();
  double umax = 0.0;
  for (std::size_t k = 0; k < pf.rho.size(); ++k) {
    CHECK(pf.rho[k] >= rho_lo * (1.0 - 1e-12));
    CHECK(pf.rho[k] <= rho_hi * (1.0 + 1e-12));
    if (fx.sol.field.coincident[k]) CHECK(pf.mach[k] == 0.0);
    if (!pf.saturated[k]) CHECK(pf.mach[k] < 1.0);
    if (d.nodes()[k].x1 >= -0.5)
      umax = std::max(umax, std::hypot(pf.u1[k], pf.u2[k]));
  }

  for (std::size_t k = 0; k < pf.rho.size(); ++k) {
    const MeshNode& nd = d.nodes()[k];
    if (nd.x1 < -0.5 || pf.saturated[k]) continue;
    CHECK(pf.mach[k] <= 0.95);
    if (d.tag(k) == BoundaryTag::kInterior) CHECK(pf.u2[k] <= 1e-6 * umax);
  }

  // Downstream pressure on the free boundary, sampled a safe step into the
  // fluid below each graph point.
  const double p_down = t.pressure_from_fb(fx.sol.lambda);
  REQUIRE(!fx.sol.boundary.graph_f.empty());
  double prel = 0.0;
  for (const MeshNode& gp : fx.sol.boundary.graph_f) {
    const double pk =
        d.interpolate(pf.p, gp.x1, gp.x2 - 0.75 * d.h());
    prel = std::max(prel, std::abs(pk - p_down) / p_down);
  }
  CHECK(prel <= 0.1);

  // Identities hold wherever the inversion was exact.
  TransportResiduals r = transport_residuals(pf, t, fx.sol.field);
  CHECK(r.bernoulli_max <= 1e-10);
  CHECK(r.entropy_max <= 1e-10);
}

TEST_CASE("export writes versioned deterministic artifacts") {
  const JetFix& fx = jet_fixture();
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "subjet_fields_export";
  fs::remove_all(base);

  ExportOptions opt;
  opt.stations = {0.5};
  ExportFiles ef =
      export_solution(fx.sol, fx.table, (base / "a").string(), opt);

  // Every artifact leads with the format version.
  for (const std::string& p :
       {ef.fields, ef.boundary, ef.sections, ef.summary}) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "# format: subjet/1");
  }

  SUBCASE("field table round-trips the stream function bitwise") {
    std::ifstream in(ef.fields);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    CHECK(line == "x1 x2 psi rho u1 u2 P M omega");

    FieldTable ft = import_field_table(ef.fields);
    REQUIRE(ft.psi.size() == fx.sol.field.psi.size());
    for (std::size_t k = 0; k < ft.psi.size(); ++k) {
      CHECK(ft.x1[k] == fx.sol.domain->nodes()[k].x1);
      CHECK(ft.x2[k] == fx.sol.domain->nodes()[k].x2);
      CHECK(ft.psi[k] == fx.sol.field.psi[k]);
      CHECK(ft.rho[k] == fx.pf.rho[k]);
    }
  }

  SUBCASE("summary carries exactly the documented keys") {
    std::ifstream in(ef.summary);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> keys;
    double lambda_back = 0.0, q_back = 0.0;
    while (std::getline(in, line)) {
      const auto eq = line.find(" = ");
      REQUIRE(eq != std::string::npos);
      keys.push_back(line.substr(0, eq));
      const double v = std::strtod(line.c_str() + eq + 3, nullptr);
      if (keys.back() == "lambda") lambda_back = v;
      if (keys.back() == "q") q_back = v;
    }
    const std::vector<std::string> want{
        "lambda",
        "height",
        "pressure",
        "mach",
        "q",
        "residual_bernoulli_max",
        "residual_bernoulli_l2",
        "residual_entropy_max",
        "residual_entropy_l2"};
    CHECK(keys == want);
    CHECK(lambda_back == fx.sol.lambda);
    CHECK(q_back == fx.table.q());
  }

  SUBCASE("boundary polyline is ordered by height then offset") {
    std::ifstream in(ef.boundary);
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<double, double>> rows;
    double a, b;
    while (in >> a >> b) rows.emplace_back(a, b);
    CHECK(rows.size() == fx.sol.boundary.upsilon.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const bool ok = rows[i - 1].second > rows[i].second ||
                      (rows[i - 1].second == rows[i].second &&
                       rows[i - 1].first <= rows[i].first);
      CHECK(ok);
    }
  }

  SUBCASE("cross-section carries the full flux") {
    std::ifstream in(ef.sections);
    std::string line;
    std::vector<double> x2s, rhous;
    bool in_rows = false;
    while (std::getline(in, line)) {
      if (line.rfind("# station", 0) == 0) {
        in_rows = false;
        continue;
      }
      if (line.rfind("x2 ", 0) == 0) {
        in_rows = true;
        continue;
      }
      if (!in_rows || line.empty()) continue;
      std::istringstream row(line);
      double x2, psi, rho, u1;
      row >> x2 >> psi >> rho >> u1;
      x2s.push_back(x2);
      rhous.push_back(rho * u1);
    }
    REQUIRE(x2s.size() >= 2);
    double flux = 0.0;
    for (std::size_t i = 1; i < x2s.size(); ++i)
      flux += 0.5 * (rhous[i] + rhous[i - 1]) * (x2s[i] - x2s[i - 1]);
    CHECK(flux == doctest::Approx(fx.table.q()).epsilon(5e-3));
  }

  SUBCASE("repeated export is byte-identical") {
    ExportFiles ef2 =
        export_solution(fx.sol, fx.table, (base / "b").string(), opt);
    CHECK(read_all(ef.fields) == read_all(ef2.fields));
    CHECK(read_all(ef.boundary) == read_all(ef2.boundary));
    CHECK(read_all(ef.sections) == read_all(ef2.sections));
    CHECK(read_all(ef.summary) == read_all(ef2.summary));
  }

  SUBCASE("unwritable destination raises an io error") {
    CHECK_THROWS_AS(
        export_solution(fx.sol, fx.table, "/proc/subjet_no_such/out", opt),
        IoError);
  }
}

}  // TEST_SUITE

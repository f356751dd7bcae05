#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "subjet/closure.hpp"
#include "subjet/errors.hpp"
#include "subjet/profiles.hpp"
#include "subjet/quadrature.hpp"

using namespace subjet;

namespace {

// Long-double bisection used as the independent root oracle.
template <typename F>
long double bisect_ld(F f, long double lo, long double hi) {
  long double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    const long double fm = f(mid);
    if (fm == 0.0L) return mid;
    if (fm * flo < 0.0L) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5L * (lo + hi);
}

ClosureTable uniform_table(double pbar = 2.0, double hbar = 1.0,
                           double eps = 0.1) {
  return ClosureTable(GasModel::uniform(1.4, pbar, hbar), eps, 512);
}

}  // namespace

TEST_SUITE("closure") {

TEST_CASE("mass flux matches quadrature of rho*u") {
  CHECK(GasModel::uniform(1.4, 2.0, 2.0).mass_flux() ==
        doctest::Approx(2.0).epsilon(1e-13));
  CHECK(GasModel::uniform(1.4, 2.0, 1.0).mass_flux() ==
        doctest::Approx(1.0).epsilon(1e-13));
  CHECK(GasModel::linear_velocity(1.4, 4.0, 1.0).mass_flux() ==
        doctest::Approx(1.5).epsilon(1e-13));

  // Reproducible on rebuild to relative 1e-12.
  const double q1 = GasModel::cosine_bump(1.4, 6.0, 2.0).mass_flux();
  const double q2 = GasModel::cosine_bump(1.4, 6.0, 2.0).mass_flux();
  CHECK(std::abs(q1 - q2) <= 1e-12 * q1);

  // Oracle: adaptive quadrature of the analytic integrand.
  const double qo = adaptive_gk(
      [](double x) {
        const double w = x * (2.0 - x);
        return (1.0 + 0.1 * std::cos(std::numbers::pi * x / 2.0)) *
               (1.0 + w * w);
      },
      0.0, 2.0, 1e-13);
  CHECK(q1 == doctest::Approx(qo).epsilon(1e-9));
}

TEST_CASE("streamline height inverts the cumulative flux") {
  GasModel m = GasModel::linear_velocity(1.4, 4.0, 1.0);
  // Oracle: solve h + h^2/2 = 1/2 in long double.
  const long double h_oracle = bisect_ld(
      [](long double h) { return h + 0.5L * h * h - 0.5L; }, 0.0L, 1.0L);
  CHECK(m.streamline_height(0.5) ==
        doctest::Approx(static_cast<double>(h_oracle)).epsilon(1e-11));
  CHECK(m.streamline_height(0.0) == 0.0);
  CHECK(m.streamline_height(m.q()) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK_THROWS_AS(m.streamline_height(-0.1), DomainError);
  CHECK_THROWS_AS(m.streamline_height(m.q() + 0.1), DomainError);

  // Round trip through the cumulative flux.
  for (double z : {0.1, 0.7, 1.3}) {
    const double h = m.streamline_height(z);
    CHECK(m.stream_profile(h) == doctest::Approx(z).epsilon(1e-12));
  }
}

TEST_CASE("invariants of the constant state") {
  ClosureTable t = uniform_table();
  CHECK(t.bernoulli(0.5) == doctest::Approx(7.5).epsilon(1e-13));
  CHECK(t.entropy(0.5) == doctest::Approx(7.0).epsilon(1e-13));
  CHECK(t.bernoulli_slope(0.5) == 0.0);
  CHECK(t.entropy_slope(0.5) == 0.0);

  // Critical densities against direct power-law evaluation.
  const double rm = std::pow(7.5 / 7.0, 2.5);
  const double rc = std::pow(15.0 / 16.8, 2.5);
  CHECK(t.max_density(0.5) == doctest::Approx(rm).epsilon(1e-13));
  CHECK(t.critical_density(0.5) == doctest::Approx(rc).epsilon(1e-13));
  CHECK(rm == doctest::Approx(1.18825).epsilon(1e-5));
  CHECK(rc == doctest::Approx(0.75327).epsilon(1e-5));

  // Momentum squared at rho = 1 and its zero at the stagnation density.
  CHECK(t.momentum_sq(1.0, 0.5) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(t.momentum_sq(rm, 0.5)) <= 1e-12);
  CHECK_THROWS_AS(t.momentum_sq(rm * 1.01, 0.5), DomainError);

  // Sonic threshold against the closed form.
  const double ga = 1.4;
  const double tc_oracle = (ga - 1.0) *
                           std::pow(2.0 * 7.5 / (ga + 1.0), (ga + 1.0) / (ga - 1.0)) *
                           std::pow(7.0, -2.0 / (ga - 1.0));
  CHECK(t.sonic_momentum_sq(0.5) == doctest::Approx(tc_oracle).epsilon(1e-12));
  CHECK(t.momentum_sq(rc, 0.5) ==
        doctest::Approx(t.sonic_momentum_sq(0.5)).epsilon(1e-12));
}

TEST_CASE("bernoulli slope for sheared velocity") {
  // rho = 1, u = 1 + x2, hbar = 1: B'(1/2) = u'/rho at the streamline
  // height; finite differences of B provide the oracle.
  ClosureTable t(GasModel::linear_velocity(1.4, 4.0, 1.0), 0.1, 2048);
  const double z = 0.5;
  const double d = 1e-6 * t.q();
  const double fd = (t.bernoulli(z + d) - t.bernoulli(z - d)) / (2.0 * d);
  CHECK(t.bernoulli_slope(z) == doctest::Approx(fd).epsilon(1e-7));
  CHECK(t.bernoulli_slope(z) == doctest::Approx(1.0).epsilon(1e-7));

  // Extension: constant below 0, entropy frozen and velocity nondecreasing
  // above Q.
  CHECK(t.bernoulli_slope(-0.3 * t.q()) == 0.0);
  CHECK(t.entropy_slope(-0.3 * t.q()) == 0.0);
  CHECK(t.entropy_slope(1.5 * t.q()) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.bernoulli_slope(1.02 * t.q()) >= 0.0);
  CHECK(t.bernoulli(-0.5 * t.q()) ==
        doctest::Approx(t.bernoulli(0.0)).epsilon(1e-13));
}

TEST_CASE("density inversion on the subsonic branch") {
  ClosureTable t = uniform_table();
  const double z = 0.5;
  CHECK(t.specific_volume(1.0, z) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(t.specific_volume(0.0, z) ==
        doctest::Approx(1.0 / t.max_density(z)).epsilon(1e-13));
  const double tc = t.sonic_momentum_sq(z);
  CHECK(t.specific_volume(tc * (1.0 - 1e-9), z) ==
        doctest::Approx(1.0 / t.critical_density(z)).epsilon(1e-3));
  CHECK_THROWS_AS(t.specific_volume(tc, z), SonicError);
  CHECK_THROWS_AS(t.specific_volume(tc * 1.5, z), SonicError);

  // Inversion round trip across the branch.
  for (int i = 1; i <= 20; ++i) {
    const double tt = tc * (1.0 - 1e-3) * i / 20.0;
    const double rho = 1.0 / t.specific_volume(tt, z);
    CHECK(t.momentum_sq(rho, z) == doctest::Approx(tt).epsilon(1e-10));
  }
}

TEST_CASE("volume partials match finite differences") {
  ClosureTable t(GasModel::cosine_bump(1.4, 6.0, 2.0), 0.1, 2048);
  const double q = t.q();
  const int n = 12;
  for (int j = 1; j < n; ++j) {
    const double z = q * (0.04 + 0.92 * j / n);
    const double tc = t.sonic_momentum_sq(z);
    for (int i = 1; i < n; ++i) {
      const double tt = 0.9 * (1.0 - t.epsilon()) * tc * i / n;
      const double dt = 1e-5 * tc;
      const double dz = 1e-5 * q;
      const double fd_t =
          (t.specific_volume(tt + dt, z) - t.specific_volume(tt - dt, z)) /
          (2.0 * dt);
      const double fd_z =
          (t.specific_volume(tt, z + dz) - t.specific_volume(tt, z - dz)) /
          (2.0 * dz);
      CHECK(t.specific_volume_dt(tt, z) ==
            doctest::Approx(fd_t).epsilon(1e-5));
      CHECK(t.specific_volume_dz(tt, z) ==
            doctest::Approx(fd_z).epsilon(1e-5));
      CHECK(t.specific_volume_dt(tt, z) > 0.0);
    }
  }
}

TEST_CASE("mollifier shape and bounds") {
  CHECK(ClosureTable::mollifier(-1.0) == 1.0);
  CHECK(ClosureTable::mollifier(-2.0) == 1.0);
  CHECK(ClosureTable::mollifier(-0.5) == 0.0);
  CHECK(ClosureTable::mollifier(0.0) == 0.0);
  double prev = 1.0;
  for (int i = 0; i <= 400; ++i) {
    const double s = -1.0 + 0.5 * i / 400.0;
    const double v = ClosureTable::mollifier(s);
    CHECK(v <= prev + 1e-15);
    CHECK(std::abs(ClosureTable::mollifier_slope(s)) <= 4.0);
    // Slope consistent with values.
    const double d = 1e-7;
    const double fd =
        (ClosureTable::mollifier(s + d) - ClosureTable::mollifier(s - d)) /
        (2.0 * d);
    CHECK(ClosureTable::mollifier_slope(s) ==
          doctest::Approx(fd).epsilon(1e-4));
    prev = v;
  }
  // Curvature bound via second differences.
  for (int i = 1; i < 200; ++i) {
    const double s = -1.0 + 0.5 * i / 200.0;
    const double d = 1e-5;
    const double dd = (ClosureTable::mollifier(s + d) -
                       2.0 * ClosureTable::mollifier(s) +
                       ClosureTable::mollifier(s - d)) /
                      (d * d);
    CHECK(std::abs(dd) <= 24.0);
  }
}

TEST_CASE("truncation window") {
  ClosureTable t(GasModel::cosine_bump(1.4, 6.0, 2.0), 0.1, 1024);
  const double q = t.q();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uz(0.02 * q, 0.98 * q);
  std::uniform_real_distribution<double> us(0.0, 3.0);
  const double eps = t.epsilon();
  for (int i = 0; i < 2000; ++i) {
    const double z = uz(rng);
    const double tc = t.sonic_momentum_sq(z);
    const double tt = us(rng) * tc;
    const double gt = t.specific_volume_trunc(tt, z);
    if (tt <= (1.0 - eps) * tc) {
      CHECK(gt == t.specific_volume(tt, z));
      CHECK(t.specific_volume_trunc_dt(tt, z) ==
            doctest::Approx(t.specific_volume_dt(tt, z)).epsilon(1e-14));
    } else if (tt >= (1.0 - 0.5 * eps) * tc) {
      CHECK(gt == t.g_upper());
      CHECK(t.specific_volume_trunc_dt(tt, z) == 0.0);
      CHECK(t.specific_volume_trunc_dz(tt, z) == 0.0);
    } else {
      CHECK(gt >= t.g_lower());
      CHECK(gt <= t.g_upper());
    }
    CHECK(t.specific_volume_trunc_dt(tt, z) >= 0.0);
  }
  // g bounds hold across the branch as well.
  for (int i = 0; i < 200; ++i) {
    const double z = uz(rng);
    const double tc = t.sonic_momentum_sq(z);
    const double g = t.specific_volume(0.999 * tc * i / 200.0, z);
    CHECK(g >= t.g_lower() * (1.0 - 1e-13));
    CHECK(g <= t.g_upper() * (1.0 + 1e-13));
  }
}

TEST_CASE("truncated volume partials match finite differences") {
  // Probes the blend band, where the mollifier terms act.
  ClosureTable t(GasModel::cosine_bump(1.4, 6.0, 2.0), 0.12, 1024);
  const double q = t.q();
  for (int j = 1; j <= 6; ++j) {
    const double z = q * j / 7.0;
    const double tc = t.sonic_momentum_sq(z);
    for (double frac : {0.90, 0.93, 0.945}) {
      const double tt = frac * tc;
      const double dt = 1e-6 * tc;
      const double dz = 1e-6 * q;
      const double fd_t = (t.specific_volume_trunc(tt + dt, z) -
                           t.specific_volume_trunc(tt - dt, z)) /
                          (2.0 * dt);
      const double fd_z = (t.specific_volume_trunc(tt, z + dz) -
                           t.specific_volume_trunc(tt, z - dz)) /
                          (2.0 * dz);
      CHECK(t.specific_volume_trunc_dt(tt, z) ==
            doctest::Approx(fd_t).epsilon(2e-5));
      CHECK(t.specific_volume_trunc_dz(tt, z) ==
            doctest::Approx(fd_z).epsilon(2e-5));
    }
  }
}

TEST_CASE("energy density against the defining integral") {
  ClosureTable t(GasModel::cosine_bump(1.4, 6.0, 2.0), 0.1, 1024);
  const double q = t.q();
  const double ga = 1.4;
  for (double zf : {0.15, 0.5, 0.85}) {
    const double z = q * zf;
    const double tc = t.sonic_momentum_sq(z);
    for (double tf : {0.3, 0.85, 0.93, 1.2}) {
      const double tt = tf * tc;
      // Oracle: adaptive quadrature of the truncated volume plus the
      // closed-form zero-momentum offset.
      const double integral = adaptive_gk(
          [&](double tau) { return t.specific_volume_trunc(tau, z); }, 0.0,
          tt, 1e-12);
      const double rm_z = t.max_density(z);
      const double rm_q = t.max_density(q);
      const double offset = (ga - 1.0) / ga *
                            (std::pow(rm_z, ga) * t.entropy(z) -
                             std::pow(rm_q, ga) * t.entropy(q));
      CHECK(t.energy_G(tt, z) ==
            doctest::Approx(0.5 * integral + offset).epsilon(1e-9));
      CHECK(t.energy_G_dt(tt, z) ==
            doctest::Approx(0.5 * t.specific_volume_trunc(tt, z))
                .epsilon(1e-14));
    }
  }
}

TEST_CASE("energy z-partial matches finite differences") {
  ClosureTable t(GasModel::cosine_bump(1.4, 6.0, 2.0), 0.1, 2048);
  const double q = t.q();
  const double dz = 1e-5 * q;
  for (double zf : {0.1, 0.45, 0.8}) {
    const double z = q * zf;
    const double tc = t.sonic_momentum_sq(z);
    // Below the band, inside it, and beyond it.
    for (double tf : {0.5, 0.92, 1.4}) {
      const double tt = tf * tc;
      const double fd =
          (t.energy_G(tt, z + dz) - t.energy_G(tt, z - dz)) / (2.0 * dz);
      CHECK(t.energy_G_dz(tt, z) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("free-boundary weight") {
  ClosureTable t(GasModel::cosine_bump(1.4, 6.0, 2.0), 0.1, 1024);
  const double q = t.q();
  CHECK(t.fb_weight(0.0, q) == 0.0);
  // Strictly increasing in t with the convexity floor.
  for (double zf : {0.2, 0.6, 1.0}) {
    const double z = q * zf;
    const double tc = t.sonic_momentum_sq(z);
    double prev = t.fb_weight(0.0, z);
    for (int i = 1; i <= 30; ++i) {
      const double tt = 1.8 * tc * i / 30.0;
      const double phi = t.fb_weight(tt, z);
      CHECK(phi > prev);
      CHECK(t.fb_weight_dt(tt, z) >= 0.5 * t.g_lower() * (1.0 - 1e-12));
      prev = phi;
    }
  }
  // lambda lower bound from the convexity floor.
  const double lam_m = 0.5 * std::sqrt(t.sonic_momentum_sq(q));
  const double le = t.fb_lambda(lam_m);
  CHECK(le * le >= 0.5 * t.g_lower() * lam_m * lam_m * (1.0 - 1e-12));
}

TEST_CASE("momentum parameter and downstream pressure invert each other") {
  ClosureTable t = uniform_table();
  // The upstream state itself is admissible downstream data: P = 2 gives
  // rho0 = 1 and Lambda = sqrt(2B - 2S) = 1 exactly.
  CHECK(t.momentum_on_fb(2.0) == doctest::Approx(1.0).epsilon(1e-12));

  // Slightly displaced pressure against the closed form.
  const long double s = 7.0L, b = 7.5L, p = 1.8L;
  const long double rho0 = std::pow(1.4L * p / (0.4L * s), 1.0L / 1.4L);
  const long double lam =
      rho0 * std::sqrt(2.0L * b - 2.0L * std::pow(rho0, 0.4L) * s);
  CHECK(t.momentum_on_fb(1.8) ==
        doctest::Approx(static_cast<double>(lam)).epsilon(1e-12));

  // Admissible window is (sonic pressure, stagnation pressure).
  const double stag =
      0.4 / 1.4 * std::pow(t.max_density(t.q()), 1.4) * t.entropy(t.q());
  const double sonic =
      0.4 / 1.4 * std::pow(t.critical_density(t.q()), 1.4) * t.entropy(t.q());
  CHECK(stag == doctest::Approx(2.5461).epsilon(1e-4));
  CHECK(sonic == doctest::Approx(1.3452).epsilon(1e-4));
  for (double pf : {0.05, 0.3, 0.6, 0.95}) {
    const double pd = sonic + pf * (stag - sonic);
    const double l = t.momentum_on_fb(pd);
    CHECK(t.pressure_from_fb(l) == doctest::Approx(pd).epsilon(1e-10));
    CHECK(t.momentum_on_fb(t.pressure_from_fb(l)) ==
          doctest::Approx(l).epsilon(1e-10));
  }
  // Outside the admissible pressure window.
  CHECK_THROWS_AS(t.momentum_on_fb(stag * 1.01), DomainError);
  CHECK_THROWS_AS(t.momentum_on_fb(sonic * 0.99), DomainError);
  CHECK_THROWS_AS(t.momentum_on_fb(1e-9), DomainError);
}

TEST_CASE("fused gradient terms agree with the scalar maps") {
  ClosureTable t(GasModel::cosine_bump(1.4, 6.0, 2.0), 0.1, 512);
  const double q = t.q();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uz(-0.5 * q, 1.5 * q);
  std::uniform_real_distribution<double> uf(0.0, 2.5);
  for (int i = 0; i < 500; ++i) {
    const double z = uz(rng);
    const double tt = uf(rng) * t.sonic_momentum_sq(z);
    double gt, gdz;
    t.grad_terms(tt, z, gt, gdz);
    CHECK(gt == t.specific_volume_trunc(tt, z));
    CHECK(gdz == t.energy_G_dz(tt, z));
  }
}

TEST_CASE("snapshot round trip") {
  ClosureTable t(GasModel::cosine_bump(1.4, 6.0, 2.0), 0.15, 256);
  ClosureTable t2 = ClosureTable::from_snapshot(t.snapshot());
  CHECK(t2.q() == doctest::Approx(t.q()).epsilon(1e-12));
  CHECK(t2.epsilon() == t.epsilon());
  CHECK(t2.z_nodes() == t.z_nodes());
  for (double zf : {-0.3, 0.2, 0.7, 1.4}) {
    const double z = t.q() * zf;
    CHECK(t2.bernoulli(z) == t.bernoulli(z));
    CHECK(t2.entropy(z) == t.entropy(z));
    CHECK(t2.specific_volume_trunc(0.5 * t.sonic_momentum_sq(z), z) ==
          t.specific_volume_trunc(0.5 * t.sonic_momentum_sq(z), z));
  }
}

TEST_CASE("model admissibility gates") {
  CHECK_THROWS_AS(GasModel::uniform(1.4, 0.5, 1.0), ModelError);
  CHECK_THROWS_AS(GasModel::uniform(0.9, 2.0, 1.0), ModelError);
  CHECK_THROWS_AS(ClosureTable(GasModel::uniform(1.4, 2.0, 1.0), 0.5, 256),
                  DomainError);
  CHECK_THROWS_AS(ClosureTable(GasModel::uniform(1.4, 2.0, 1.0), 0.0, 256),
                  DomainError);
  CHECK(GasModel::uniform(1.4, 2.0, 1.0).endpoint_conditions_ok());
  CHECK_FALSE(GasModel::linear_velocity(1.4, 4.0, 1.0)
                  .endpoint_conditions_ok());
  CHECK(GasModel::uniform(1.4, 2.0, 1.0).pressure_floor() ==
        doctest::Approx(1.0 / 1.4).epsilon(1e-13));
}

}  // TEST_SUITE

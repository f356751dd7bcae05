#include <benchmark/benchmark.h>

#include "subjet/closure.hpp"
#include "subjet/profiles.hpp"

namespace {

const subjet::ClosureTable& table() {
  static subjet::ClosureTable t(subjet::GasModel::cosine_bump(1.4, 6.0, 2.0),
                                0.1, 2048);
  return t;
}

void BM_SpecificVolume(benchmark::State& state) {
  const auto& t = table();
  const double q = t.q();
  double z = 0.0;
  for (auto _ : state) {
    z += 0.01 * q;
    if (z > q) z = 0.0;
    benchmark::DoNotOptimize(
        t.specific_volume(0.6 * t.sonic_momentum_sq(z), z));
  }
}
BENCHMARK(BM_SpecificVolume);

void BM_EnergyDensity(benchmark::State& state) {
  const auto& t = table();
  const double q = t.q();
  double z = 0.0;
  for (auto _ : state) {
    z += 0.01 * q;
    if (z > q) z = 0.0;
    benchmark::DoNotOptimize(t.energy_G(0.6 * t.sonic_momentum_sq(z), z));
  }
}
BENCHMARK(BM_EnergyDensity);

void BM_GradientTerms(benchmark::State& state) {
  const auto& t = table();
  const double q = t.q();
  double z = 0.0, gt = 0.0, gdz = 0.0;
  for (auto _ : state) {
    z += 0.013 * q;
    if (z > q) z = 0.0;
    t.grad_terms(0.7 * t.sonic_momentum_sq(z), z, gt, gdz);
    benchmark::DoNotOptimize(gt);
    benchmark::DoNotOptimize(gdz);
  }
}
BENCHMARK(BM_GradientTerms);

}  // namespace

BENCHMARK_MAIN();

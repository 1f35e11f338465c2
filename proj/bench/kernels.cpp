// Serial reference vs OpenMP for the data-parallel kernels.

#include <benchmark/benchmark.h>

#include "rtomo/mle.hpp"
#include "rtomo/verify.hpp"

using namespace rtomo;

namespace {

RadialMixture planar_example() {
  Eigen::MatrixXd mu(2, 5);
  mu << 0.6, 0.6, -0.1, -1.0, -0.2, 0.0, 0.8, 0.1, -0.3, -0.6;
  return RadialMixture(2, 0.3, {1, 2, 3, 4, 5}, mu);
}

RadialMixture spatial_example() {
  Eigen::MatrixXd mu(3, 4);
  mu << 0.0, 0.7, -0.7, 0.0, 0.8, -0.4, -0.4, 0.0, -0.3, -0.3, -0.3, 0.8;
  return RadialMixture(3, 0.46, {2, 3, 2.4, 4}, mu);
}

Exec policy(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void label_policy(benchmark::State& state) { state.SetLabel(state.range(0) ? "openmp" : "serial"); }

void BM_SimulateImages(benchmark::State& state) {
  SimulationOptions o;
  o.count = 150;
  o.resolution = 128;
  o.noise_sd = 0.01;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(spatial_example(), o, policy(state)));
  label_policy(state);
}

void BM_DeconvolveImages(benchmark::State& state) {
  SimulationOptions o;
  o.count = 150;
  o.resolution = 128;
  const Dataset ds = simulate(spatial_example(), o);
  for (auto _ : state) benchmark::DoNotOptimize(deconvolve_spectral(ds.profiles, 3, Kernel{0.46}, 4, {}, policy(state)));
  label_policy(state);
}

void BM_ProjectionIdentity(benchmark::State& state) {
  const Eigen::MatrixXd v = spatial_example().locations();
  for (auto _ : state) benchmark::DoNotOptimize(check_projection_identity(v, 100000, 1, policy(state)));
  label_policy(state);
}

void BM_Objective(benchmark::State& state) {
  SimulationOptions o;
  o.count = 150;
  o.seed = 1;
  o.noise_sd = 0.01;
  const Dataset ds = simulate(planar_example(), o);
  const DeconvParams p = spectral_init(ds.profiles, 2, Kernel{0.3}, 5, FitMode::separate);
  for (auto _ : state) benchmark::DoNotOptimize(objective(p, ds.profiles, Kernel{0.3}, policy(state)));
  label_policy(state);
}

void BM_Bootstrap(benchmark::State& state) {
  SimulationOptions o;
  o.count = 150;
  o.seed = 1;
  const Dataset ds = simulate(planar_example(), o);
  const auto labeled = label(deconvolve_spectral(ds.profiles, 2, Kernel{0.3}, 5));
  const Configuration point = factor(hybrid_estimate(labeled, 2), 2);
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap(labeled, 2, point, 100, 3, std::nullopt, policy(state)));
  label_policy(state);
}

}  // namespace

BENCHMARK(BM_SimulateImages)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DeconvolveImages)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ProjectionIdentity)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Objective)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Bootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();

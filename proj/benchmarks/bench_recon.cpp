#include <benchmark/benchmark.h>

#include "psir/fft.hpp"
#include "psir/phantom.hpp"
#include "psir/recon.hpp"
#include "psir/rng.hpp"
#include "psir/stats.hpp"

using namespace psir;

namespace {

ComplexImage random_image(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  ComplexImage img(rows, cols);
  for (auto& v : img.data) v = rng.cnormal();
  return img;
}

phantom::AcquisitionSeries standard_series() {
  const auto spec = phantom::PhantomSpec::cardiac_default(144, 256, 1);
  const auto maps = phantom::simulate_coil_maps(4, 144, 256, 1);
  const auto mask = SamplingMask::uniform(144, 2, 24);
  const auto motion = phantom::MotionTrace::none(2);
  const auto cov = phantom::correlated_covariance(4, 1e-3, 0.1);
  return phantom::simulate_series(spec, maps, mask, motion, cov, 1, 1);
}

void BM_fft2c_144x256(benchmark::State& state) {
  const ComplexImage img = random_image(144, 256, 3);
  for (auto _ : state) benchmark::DoNotOptimize(fft2c(img));
}
BENCHMARK(BM_fft2c_144x256);

void BM_encode_adjoint(benchmark::State& state) {
  const auto series = standard_series();
  const recon::EncodingOperator op(series.sim_sens, series.mask);
  const ComplexImage x = random_image(144, 256, 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(recon::adjoint(recon::encode(x, op), op));
}
BENCHMARK(BM_encode_adjoint);

void BM_single_shot_n12(benchmark::State& state) {
  const auto series = standard_series();
  const recon::ReconParams params;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        recon::reconstruct_single_shot(series, series.sim_sens, params));
}
BENCHMARK(BM_single_shot_n12)->Unit(benchmark::kMillisecond);

void BM_wilcoxon_exact_n30(benchmark::State& state) {
  Rng rng(9);
  std::vector<double> d(30);
  for (auto& v : d) v = rng.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(stats::wilcoxon_exact(d, stats::Alternative::Greater));
}
BENCHMARK(BM_wilcoxon_exact_n30);

void BM_bootstrap_ci_10k(benchmark::State& state) {
  Rng rng(10);
  std::vector<double> values(100);
  for (auto& v : values) v = rng.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(stats::bootstrap_ci(values, 10000, 0.95, 1));
}
BENCHMARK(BM_bootstrap_ci_10k)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();

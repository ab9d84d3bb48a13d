#include <benchmark/benchmark.h>

#include <vector>

#include "stepdeconv/estimator.hpp"
#include "stepdeconv/inference.hpp"
#include "stepdeconv/kernels.hpp"
#include "stepdeconv/model.hpp"

using namespace stepdeconv;

namespace {
const StepFunction kTruth({0.0, 1.0, -0.5}, {0.3, 0.7});

Kernel kernel_for(int id) {
  switch (id) {
    case 0: return Kernel::gaussian();
    case 1: return Kernel::laplace();
    case 2: return Kernel::boxcar();
    default: return Kernel::abel(0.75);
  }
}
}  // namespace

static void BM_DeltaPhi(benchmark::State& state) {
  const Kernel k = kernel_for(static_cast<int>(state.range(0)));
  double x = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(delta_phi(k, x, 0.3, 0.7));
    x = x > 0.9 ? 0.1 : x + 1e-3;
  }
  state.SetLabel(k.name());
}
BENCHMARK(BM_DeltaPhi)->DenseRange(0, 3);

static void BM_HeightsGivenJumps(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset d = simulate_dataset(Kernel::gaussian(), kTruth, {}, n, 0.1, 1);
  const std::vector<double> taus{0.31, 0.69};
  for (auto _ : state) benchmark::DoNotOptimize(heights_given_jumps(d, Kernel::gaussian(), taus, 10.0));
}
BENCHMARK(BM_HeightsGivenJumps)->RangeMultiplier(4)->Range(250, 4000)->Unit(benchmark::kMicrosecond);

static void BM_FitKnownK(benchmark::State& state) {
  const Kernel k = kernel_for(static_cast<int>(state.range(1)));
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset d = simulate_dataset(k, kTruth, {}, n, 0.1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_known_k(d, k, 2, {}));
  state.SetLabel(k.name());
}
BENCHMARK(BM_FitKnownK)->ArgsProduct({{250, 1000, 4000}, {0, 2}})->Unit(benchmark::kMillisecond);

static void BM_FitPenalized(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset d = simulate_dataset(Kernel::laplace(), kTruth, {}, n, 0.1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(fit_penalized(d, Kernel::laplace(), {}));
}
BENCHMARK(BM_FitPenalized)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_VMatrix(benchmark::State& state) {
  const Kernel k = kernel_for(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(v_matrix(k, kTruth, DesignDensity::uniform()));
  state.SetLabel(k.name());
}
BENCHMARK(BM_VMatrix)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

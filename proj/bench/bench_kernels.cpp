// Kernel timings: OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "paoxi/experiment.hpp"
#include "paoxi/image_pipeline.hpp"
#include "paoxi/phantom.hpp"
#include "paoxi/rng.hpp"
#include "paoxi/transport.hpp"

using namespace paoxi;

namespace {

Volume<double> noisy_volume(int n) {
  Volume<double> v(Dims::cube(n));
  CounterStream rng(3, StreamDomain::kGeneric, 0);
  for (auto& x : v.storage()) x = rng.uniform();
  return v;
}

const OpticsDb& db() {
  static const OpticsDb d = OpticsDb::load_default();
  return d;
}

void BM_MedianFilter(benchmark::State& state) {
  const auto v = noisy_volume(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(median_filter_3d(v));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.storage().size()));
}
BENCHMARK(BM_MedianFilter)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_MedianFilterReference(benchmark::State& state) {
  const auto v = noisy_volume(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::median_filter_3d_sorted(v));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.storage().size()));
}
BENCHMARK(BM_MedianFilterReference)->Arg(64)->Unit(benchmark::kMillisecond);

struct TransportFixture {
  OpticalMedium medium;
  SourceSpec source;
};

const TransportFixture& fixture() {
  static const TransportFixture f = [] {
    PhantomSpec spec = desk_preset().phantom;
    spec.rng_seed = 7;
    const auto grid = generate_phantom(spec);
    return TransportFixture{OpticalMedium::from_phantom(grid, db(), 700.0), SourceSpec::centered(spec.extent_cm)};
  }();
  return f;
}

// Arg: worker count (0 = all available threads).
void BM_Transport(benchmark::State& state) {
  TransportConfig c;
  c.n_packets = 2000;
  c.rng_seed = 7;
  c.workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(fixture().medium, fixture().source, c));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.n_packets));
}
BENCHMARK(BM_Transport)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TransportReference(benchmark::State& state) {
  TransportConfig c;
  c.n_packets = 2000;
  c.rng_seed = 7;
  for (auto _ : state) benchmark::DoNotOptimize(reference::simulate_serial(fixture().medium, fixture().source, c));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c.n_packets));
}
BENCHMARK(BM_TransportReference)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

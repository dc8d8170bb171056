// Serial vs OpenMP batch generation.

#include <benchmark/benchmark.h>

#include "graspcheck/scene_synth.hpp"

namespace {

void BM_GenerateSerial(benchmark::State& state) {
  const graspcheck::GenConfig cfg;
  const int batches = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(graspcheck::generate_batches_serial(42, batches, cfg));
  state.SetItemsProcessed(state.iterations() * batches * cfg.batch_size);
}

void BM_GenerateParallel(benchmark::State& state) {
  const graspcheck::GenConfig cfg;
  const int batches = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(graspcheck::generate_batches_parallel(42, batches, cfg));
  state.SetItemsProcessed(state.iterations() * batches * cfg.batch_size);
}

}  // namespace

BENCHMARK(BM_GenerateSerial)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateParallel)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

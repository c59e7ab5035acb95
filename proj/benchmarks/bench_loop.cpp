#include <benchmark/benchmark.h>

#include "vgw/harness.hpp"
#include "vgw/runtime.hpp"

using namespace vgw;

static void BM_VirtualLoopTasks(benchmark::State& state) {
  const auto n = state.range(0);
  for (auto _ : state) {
    VirtualLoop loop;
    std::int64_t sum = 0;
    for (std::int64_t i = 0; i < n; ++i) loop.schedule_at(i % 1000, [&sum, i] { sum += i; });
    loop.run_until(1000);
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_VirtualLoopTasks)->Arg(1000)->Arg(100000);

static void BM_PrototypeScenario(benchmark::State& state) {
  auto cfg = ScenarioConfig::prototype();
  cfg.duration_ms = 10000;
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(cfg).report.delivered);
}
BENCHMARK(BM_PrototypeScenario)->Unit(benchmark::kMillisecond);

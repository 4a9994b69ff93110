#include <benchmark/benchmark.h>

#include "crsn/bnb.hpp"
#include "crsn/harness.hpp"
#include "crsn/riccati.hpp"

namespace {

crsn::ExperimentConfig path_config() {
  crsn::ExperimentConfig c = crsn::default_config("fig4");
  c.paths = 400;
  c.horizon = 600;
  c.burn_in = 100;
  c.scheduler.kind = crsn::SchedulerKind::kOpen;
  c.scheduler.trigger = crsn::calibrate_open(c.plant, c.lambda, 0.4);
  return c;
}

void BM_PathsSerial(benchmark::State& state) {
  const auto c = path_config();
  for (auto _ : state) benchmark::DoNotOptimize(crsn::run_paths_serial(c).mean_trace_p);
  state.SetItemsProcessed(state.iterations() * c.paths * c.horizon);
}

void BM_PathsParallel(benchmark::State& state) {
  const auto c = path_config();
  for (auto _ : state) benchmark::DoNotOptimize(crsn::run_paths_parallel(c).mean_trace_p);
  state.SetItemsProcessed(state.iterations() * c.paths * c.horizon);
}

void run_bnb(benchmark::State& state, bool parallel) {
  const auto c = crsn::default_config("fig6");
  const crsn::SymMatrix m = crsn::x_zero(c.plant, c.lambda) + crsn::SymMatrix::identity(2) * 1.0;
  crsn::BnbOptions opts;
  opts.parallel = parallel;
  for (auto _ : state) {
    const auto r = crsn::design_closed(c.plant, c.lambda, m, opts);
    benchmark::DoNotOptimize(r.Upsilon_star);
    state.counters["nodes"] = r.nodes;
  }
}

void BM_BnbSerial(benchmark::State& state) { run_bnb(state, false); }
void BM_BnbParallel(benchmark::State& state) { run_bnb(state, true); }

}  // namespace

BENCHMARK(BM_PathsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PathsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BnbSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BnbParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

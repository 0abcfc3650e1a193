#include <benchmark/benchmark.h>

#include "riskfield/pipeline.hpp"

using namespace riskfield;

namespace {

ScenarioConfig bench_config() {
    ScenarioConfig cfg;
    cfg.scenario_id = "bench";
    cfg.window = Window(0, 0, 16000, 12000);
    cfg.cell_size = 500;
    cfg.total = 60000;
    cfg.centres = {{{5000, 6000}, 0.6, 2200.0}, {{11000, 6000}, 0.4, 1800.0}};
    cfg.target_units = 30;
    cfg.shape = SurfaceShape::smooth;
    cfg.c = 5.0;
    cfg.r = 4000.0;
    cfg.k = 5.0;
    cfg.eval_cell_size = 1000;
    cfg.mesh_spacing = 1500;
    cfg.mesh_extension = 6000;
    cfg.samples = 100;
    return cfg;
}

} // namespace

static void BM_FitBym(benchmark::State& state) {
    const auto art = build_scenario(bench_config());
    const auto ds = simulate_dataset(art.surface, art.pop, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_dataset(art, ds, "bym", 2));
    }
}
BENCHMARK(BM_FitBym)->Unit(benchmark::kMillisecond);

static void BM_FitLgcp(benchmark::State& state) {
    const auto art = build_scenario(bench_config());
    const auto ds = simulate_dataset(art.surface, art.pop, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_dataset(art, ds, "lgcp", 2));
    }
}
BENCHMARK(BM_FitLgcp)->Unit(benchmark::kMillisecond);

static void BM_SimulateDataset(benchmark::State& state) {
    const auto art = build_scenario(bench_config());
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_dataset(art.surface, art.pop, ++seed));
    }
}
BENCHMARK(BM_SimulateDataset)->Unit(benchmark::kMillisecond);

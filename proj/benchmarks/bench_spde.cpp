#include <benchmark/benchmark.h>

#include "riskfield/spde.hpp"

using namespace riskfield;

static void BM_BuildMesh(benchmark::State& state) {
    const double spacing = static_cast<double>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_mesh(Window(0, 0, 40000, 30000), spacing, 12000.0));
    }
}
BENCHMARK(BM_BuildMesh)->Arg(1500)->Arg(750);

static void BM_AssembleFem(benchmark::State& state) {
    const auto mesh =
        build_mesh(Window(0, 0, 40000, 30000), static_cast<double>(state.range(0)), 12000.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(assemble_fem(mesh));
    }
    state.SetLabel(std::to_string(mesh.node_count()) + " nodes");
}
BENCHMARK(BM_AssembleFem)->Arg(1500)->Arg(750);

static void BM_SpdePrecision(benchmark::State& state) {
    const auto mesh =
        build_mesh(Window(0, 0, 40000, 30000), static_cast<double>(state.range(0)), 12000.0);
    const auto fem = assemble_fem(mesh);
    for (auto _ : state) {
        benchmark::DoNotOptimize(spde_precision(fem, {8000.0, 0.5}));
    }
}
BENCHMARK(BM_SpdePrecision)->Arg(1500)->Arg(750);

static void BM_Projector(benchmark::State& state) {
    const auto mesh = build_mesh(Window(0, 0, 40000, 30000), 1500.0, 12000.0);
    std::vector<Point> pts;
    for (int i = 0; i < 1200; ++i) {
        pts.push_back({40000.0 * ((i * 37) % 100) / 100.0, 30000.0 * ((i * 61) % 100) / 100.0});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(make_projector(mesh, pts));
    }
}
BENCHMARK(BM_Projector);

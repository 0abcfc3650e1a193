#include <benchmark/benchmark.h>

#include "riskfield/sparse.hpp"
#include "riskfield/spde.hpp"

using namespace riskfield;

namespace {

SparseSymMatrix spde_matrix(int cells) {
    const double rho = 3000.0;
    const auto mesh = build_mesh(Window(0, 0, cells * 600.0, cells * 450.0), 600.0, 6000.0);
    const auto fem = assemble_fem(mesh);
    return spde_precision(fem, {rho, 1.0});
}

} // namespace

static void BM_Cholesky(benchmark::State& state) {
    const auto q = spde_matrix(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        CholeskyFactor f(q);
        benchmark::DoNotOptimize(f.logdet());
    }
    state.SetLabel(std::to_string(q.dim()) + " nodes");
}
BENCHMARK(BM_Cholesky)->Arg(8)->Arg(16)->Arg(32);

static void BM_Solve(benchmark::State& state) {
    const auto q = spde_matrix(static_cast<int>(state.range(0)));
    const CholeskyFactor f(q);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(q.dim());
    for (auto _ : state) {
        benchmark::DoNotOptimize(f.solve(b));
    }
}
BENCHMARK(BM_Solve)->Arg(16)->Arg(32);

static void BM_SelectedInverse(benchmark::State& state) {
    const auto q = spde_matrix(static_cast<int>(state.range(0)));
    const CholeskyFactor f(q);
    for (auto _ : state) {
        benchmark::DoNotOptimize(SelectedInverse(f).diagonal());
    }
}
BENCHMARK(BM_SelectedInverse)->Arg(8)->Arg(16)->Arg(32);

static void BM_SampleGaussian(benchmark::State& state) {
    const auto q = spde_matrix(16);
    const CholeskyFactor f(q);
    Rng rng(7);
    const Eigen::VectorXd mean = Eigen::VectorXd::Zero(q.dim());
    for (auto _ : state) {
        benchmark::DoNotOptimize(f.sample(mean, rng));
    }
}
BENCHMARK(BM_SampleGaussian);

BENCHMARK_MAIN();

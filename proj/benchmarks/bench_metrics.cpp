#include <benchmark/benchmark.h>

#include "riskfield/metrics.hpp"
#include "riskfield/rng.hpp"

using namespace riskfield;

namespace {

struct MetricsFixture {
    EvalGrid grid;
    std::vector<double> truth;
    Eigen::MatrixXd samples;
    std::vector<char> truth_high;
    std::vector<double> scores, weights;

    MetricsFixture() {
        grid.window = Window(0, 0, 40000, 30000);
        grid.cell_size = 1000;
        grid.nrows = 30;
        grid.ncols = 40;
        grid.population.assign(1200, 100);
        Rng rng(5);
        truth.resize(1200);
        truth_high.resize(1200);
        scores.resize(1200);
        weights.assign(1200, 1.0);
        samples.resize(500, 1200);
        for (int g = 0; g < 1200; ++g) {
            truth[g] = 0.001 * (1.0 + rng.uniform());
            truth_high[g] = rng.uniform() < 0.3 ? 1 : 0;
            scores[g] = rng.uniform();
            for (int s = 0; s < 500; ++s) {
                samples(s, g) = std::log(truth[g]) + 0.2 * rng.normal();
            }
        }
    }
};

const MetricsFixture& fixture() {
    static MetricsFixture f;
    return f;
}

} // namespace

static void BM_Rmise(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            rmise(f.truth, f.samples, f.grid, BWeight::unit, RScale::log));
    }
}
BENCHMARK(BM_Rmise)->Unit(benchmark::kMillisecond);

static void BM_RocAuc(benchmark::State& state) {
    const auto& f = fixture();
    const auto q = MetricsConfig::default_q_grid();
    for (auto _ : state) {
        benchmark::DoNotOptimize(roc_auc(f.truth_high, f.scores, f.weights, q));
    }
}
BENCHMARK(BM_RocAuc);

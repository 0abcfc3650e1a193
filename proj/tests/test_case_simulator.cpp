#include <doctest.h>

#include <cmath>

#include "riskfield/dataset.hpp"
#include "test_util.hpp"

using namespace riskfield;

namespace {

PopulationGrid small_population() {
    PopulationGrid pop;
    pop.window = Window(0, 0, 4000, 2000);
    pop.cell_size = 1000;
    pop.nrows = 2;
    pop.ncols = 4;
    pop.counts = {100, 200, 0, 50, 25, 0, 300, 125};
    for (auto v : pop.counts) pop.total += v;
    return pop;
}

} // namespace

TEST_SUITE("case_simulator") {

TEST_CASE("zero risk gives an all-zero dataset") {
    const auto pop = small_population();
    const RiskSurface s = FlatSurface{0.0};
    const auto ds = simulate_dataset(s, pop, 1);
    CHECK(ds.total_cases == 0);
    for (auto v : ds.case_counts) CHECK(v == 0);
}

TEST_CASE("risk approaching one gives everyone a case") {
    const auto pop = small_population();
    const RiskSurface s = FlatSurface{1.0 - 1e-13};
    const auto ds = simulate_dataset(s, pop, 2);
    CHECK(ds.total_cases == pop.total);
}

TEST_CASE("risk at or above one is a domain error") {
    const auto pop = small_population();
    CHECK_THROWS_AS(simulate_dataset(RiskSurface{FlatSurface{1.0}}, pop, 3), DomainError);
}

TEST_CASE("seeded determinism") {
    const auto pop = small_population();
    const RiskSurface s = FlatSurface{0.05};
    const auto a = simulate_dataset(s, pop, 77);
    const auto b = simulate_dataset(s, pop, 77);
    const auto c = simulate_dataset(s, pop, 78);
    CHECK(a.case_counts == b.case_counts);
    CHECK(a.case_counts != c.case_counts); // different seed should differ
}

TEST_CASE("flat scenario replicate mean matches the binomial oracle") {
    // P_W persons at lambda0 = 334 / 206532 over 300 replicates
    PopulationGrid pop;
    pop.window = Window(0, 0, 20000, 10000);
    pop.cell_size = 500;
    pop.nrows = 20;
    pop.ncols = 40;
    pop.counts.assign(800, 258); // 206400 persons
    pop.total = 258 * 800;
    const double lambda0 = 334.0 / 206532.0;
    const RiskSurface s = FlatSurface{lambda0};

    const int reps = 300;
    double mean = 0.0;
    for (int j = 0; j < reps; ++j) {
        mean += static_cast<double>(simulate_dataset(s, pop, 1000 + j).total_cases);
    }
    mean /= reps;
    const double expected = lambda0 * static_cast<double>(pop.total);
    const double se = std::sqrt(expected * (1.0 - lambda0) / reps);
    CHECK(std::abs(mean - expected) <= 3.0 * se);
}

TEST_CASE("per-cell empirical frequency within 4 binomial standard errors") {
    PopulationGrid pop;
    pop.window = Window(0, 0, 1000, 1000);
    pop.cell_size = 1000;
    pop.nrows = 1;
    pop.ncols = 1;
    pop.counts = {500};
    pop.total = 500;
    const double lambda = 0.07;
    const RiskSurface s = FlatSurface{lambda};
    const int reps = 1500;
    double cases = 0.0;
    for (int j = 0; j < reps; ++j) {
        cases += static_cast<double>(simulate_dataset(s, pop, 40000 + j).total_cases);
    }
    const double freq = cases / (500.0 * reps);
    const double se = std::sqrt(lambda * (1.0 - lambda) / (500.0 * reps));
    CHECK(std::abs(freq - lambda) <= 4.0 * se);
}

TEST_CASE("aggregation to units is exact and conserving") {
    const auto pop = small_population();
    const RiskSurface s = FlatSurface{0.1};
    const auto ds = simulate_dataset(s, pop, 5);

    SUBCASE("single unit holding everything") {
        ArealPartition part;
        part.nrows = pop.nrows;
        part.ncols = pop.ncols;
        part.unit_count = 1;
        part.unit_ids.assign(pop.counts.size(), 0);
        const auto agg = aggregate_to_units(ds, part, pop);
        CHECK(agg.cases[0] == ds.total_cases);
        CHECK(agg.population[0] == pop.total);
    }
    SUBCASE("unit with zero population") {
        ArealPartition part;
        part.nrows = pop.nrows;
        part.ncols = pop.ncols;
        part.unit_count = 2;
        part.unit_ids.assign(pop.counts.size(), 0);
        part.unit_ids[2] = 1; // the empty cell
        const auto agg = aggregate_to_units(ds, part, pop);
        CHECK(agg.cases[1] == 0);
        CHECK(agg.population[1] == 0);
    }
    SUBCASE("merging two units sums their counts") {
        ArealPartition split;
        split.nrows = pop.nrows;
        split.ncols = pop.ncols;
        split.unit_count = 2;
        split.unit_ids.assign(pop.counts.size(), 0);
        for (int c = 2; c < 4; ++c) {
            split.unit_ids[static_cast<std::size_t>(0) * pop.ncols + c] = 1;
            split.unit_ids[static_cast<std::size_t>(1) * pop.ncols + c] = 1;
        }
        ArealPartition merged = split;
        merged.unit_count = 1;
        merged.unit_ids.assign(pop.counts.size(), 0);
        const auto a = aggregate_to_units(ds, split, pop);
        const auto b = aggregate_to_units(ds, merged, pop);
        CHECK(b.cases[0] == a.cases[0] + a.cases[1]);
        CHECK(b.population[0] == a.population[0] + a.population[1]);
    }
    SUBCASE("raster mismatch is an error") {
        ArealPartition part;
        part.nrows = 1;
        part.ncols = 1;
        part.unit_count = 1;
        part.unit_ids = {0};
        CHECK_THROWS_AS(aggregate_to_units(ds, part, pop), DomainError);
    }
}

TEST_CASE("aggregation to the evaluation grid conserves counts") {
    const auto pop = small_population();
    const RiskSurface s = FlatSurface{0.2};
    const auto ds = simulate_dataset(s, pop, 6);

    SUBCASE("grid at population resolution is the identity") {
        const auto grid = build_eval_grid(pop, pop.cell_size);
        const auto agg = aggregate_to_grid(ds, pop, grid);
        for (std::size_t i = 0; i < ds.case_counts.size(); ++i) {
            CHECK(agg.cases[i] == ds.case_counts[i]);
            CHECK(agg.population[i] == pop.counts[i]);
        }
    }
    SUBCASE("coarser grid conserves totals") {
        const auto grid = build_eval_grid(pop, 2000);
        const auto agg = aggregate_to_grid(ds, pop, grid);
        std::int64_t cases = 0, persons = 0;
        for (std::size_t g = 0; g < agg.cases.size(); ++g) {
            cases += agg.cases[g];
            persons += agg.population[g];
        }
        CHECK(cases == ds.total_cases);
        CHECK(persons == pop.total);
    }
    SUBCASE("empty dataset aggregates to zeros") {
        const auto zero = simulate_dataset(RiskSurface{FlatSurface{0.0}}, pop, 7);
        const auto grid = build_eval_grid(pop, 2000);
        const auto agg = aggregate_to_grid(zero, pop, grid);
        for (auto v : agg.cases) CHECK(v == 0);
    }
}

} // TEST_SUITE

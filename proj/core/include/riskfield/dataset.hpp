#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskfield/population.hpp"
#include "riskfield/risk_surface.hpp"

namespace riskfield {

/// One replicate case dataset, aligned cell-for-cell with its PopulationGrid.
struct Dataset {
    int nrows = 0;
    int ncols = 0;
    std::vector<std::int64_t> case_counts; // row-major
    std::int64_t total_cases = 0;
    std::string scenario_id;
    int replicate_id = 0;
    std::uint64_t seed = 0;

    std::int64_t at(int row, int col) const {
        return case_counts[static_cast<std::size_t>(row) * ncols + col];
    }
};

/// Per populated cell, cases ~ Binomial(count, risk(centroid)); identical in
/// law to per-person uniform thresholding. The stream is split per cell by a
/// counter scheme, so generation order never changes the result.
Dataset simulate_dataset(const RiskSurface& surface, const PopulationGrid& pop,
                         std::uint64_t seed);

struct UnitCounts {
    std::vector<std::int64_t> cases;      // Y_i
    std::vector<std::int64_t> population; // P_i
};

/// Exact sums over unit membership; conserves totals.
UnitCounts aggregate_to_units(const Dataset& ds, const ArealPartition& part,
                              const PopulationGrid& pop);

struct GridCounts {
    std::vector<std::int64_t> cases;
    std::vector<std::int64_t> population;
};

/// Bins cases (and populations) to the evaluation grid by population-cell centroid.
GridCounts aggregate_to_grid(const Dataset& ds, const PopulationGrid& pop,
                             const EvalGrid& grid);

} // namespace riskfield

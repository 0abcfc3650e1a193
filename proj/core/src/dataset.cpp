#include "riskfield/dataset.hpp"

#include <string>

#include "riskfield/rng.hpp"

namespace riskfield {

Dataset simulate_dataset(const RiskSurface& surface, const PopulationGrid& pop,
                         std::uint64_t seed) {
    Dataset ds;
    ds.nrows = pop.nrows;
    ds.ncols = pop.ncols;
    ds.seed = seed;
    ds.case_counts.assign(pop.counts.size(), 0);
    for (int r = 0; r < pop.nrows; ++r) {
        for (int c = 0; c < pop.ncols; ++c) {
            const std::int64_t cnt = pop.at(r, c);
            if (cnt == 0) continue;
            const double lambda = risk_at(surface, pop.centroid(r, c));
            if (lambda < 0.0 || lambda >= 1.0) {
                throw DomainError("simulate_dataset: risk at cell (" + std::to_string(r) +
                                  "," + std::to_string(c) + ") outside [0,1)");
            }
            const std::size_t i = pop.idx(r, c);
            Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
            const std::int64_t cases = rng.binomial(cnt, lambda);
            ds.case_counts[i] = cases;
            ds.total_cases += cases;
        }
    }
    return ds;
}

UnitCounts aggregate_to_units(const Dataset& ds, const ArealPartition& part,
                              const PopulationGrid& pop) {
    if (ds.nrows != part.nrows || ds.ncols != part.ncols || pop.nrows != part.nrows ||
        pop.ncols != part.ncols) {
        throw DomainError("aggregate_to_units: raster shape mismatch");
    }
    UnitCounts out;
    out.cases.assign(part.unit_count, 0);
    out.population.assign(part.unit_count, 0);
    for (int r = 0; r < part.nrows; ++r) {
        for (int c = 0; c < part.ncols; ++c) {
            const int u = part.unit_at(r, c);
            if (u < 0) continue;
            out.cases[u] += ds.at(r, c);
            out.population[u] += pop.at(r, c);
        }
    }
    return out;
}

GridCounts aggregate_to_grid(const Dataset& ds, const PopulationGrid& pop,
                             const EvalGrid& grid) {
    if (ds.nrows != pop.nrows || ds.ncols != pop.ncols) {
        throw DomainError("aggregate_to_grid: raster shape mismatch");
    }
    GridCounts out;
    out.cases.assign(grid.population.size(), 0);
    out.population.assign(grid.population.size(), 0);
    for (int r = 0; r < pop.nrows; ++r) {
        for (int c = 0; c < pop.ncols; ++c) {
            if (pop.at(r, c) == 0 && ds.at(r, c) == 0) continue;
            const Point p = pop.centroid(r, c);
            const int gc = std::min(static_cast<int>((p.x - grid.window.xmin) / grid.cell_size),
                                    grid.ncols - 1);
            const int gr = std::min(static_cast<int>((p.y - grid.window.ymin) / grid.cell_size),
                                    grid.nrows - 1);
            const std::size_t g = static_cast<std::size_t>(gr) * grid.ncols + gc;
            out.cases[g] += ds.at(r, c);
            out.population[g] += pop.at(r, c);
        }
    }
    return out;
}

} // namespace riskfield

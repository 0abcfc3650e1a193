#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskfield/geometry.hpp"

namespace riskfield {

/// Population-at-risk raster: person counts per square cell. The grid exactly
/// tiles the window; cell (row, col) covers
/// [xmin + col*h, xmin + (col+1)*h) x [ymin + row*h, ymin + (row+1)*h).
struct PopulationGrid {
    Window window;
    double cell_size = 0.0;
    int nrows = 0;
    int ncols = 0;
    std::vector<std::int64_t> counts; // row-major, nrows * ncols
    std::int64_t total = 0;

    std::int64_t at(int row, int col) const { return counts[idx(row, col)]; }
    std::size_t idx(int row, int col) const {
        return static_cast<std::size_t>(row) * ncols + col;
    }
    Point centroid(int row, int col) const {
        return {window.xmin + (col + 0.5) * cell_size,
                window.ymin + (row + 0.5) * cell_size};
    }
    /// Cell containing p; false if p lies outside the window.
    bool cell_of(Point p, int& row, int& col) const;
};

/// One density bump of the synthetic population mixture.
struct GaussianCentre {
    Point centre;
    double weight = 1.0; // relative mass of this bump
    double spread = 1.0; // isotropic standard deviation in metres
};

/// Allocates `total` persons across cells by a multinomial draw with
/// probabilities proportional to a Gaussian-bump mixture plus a uniform
/// floor carrying `floor_fraction` of the mass. Deterministic given seed.
PopulationGrid build_synthetic_population(const Window& window, double cell_size,
                                          std::int64_t total,
                                          std::span<const GaussianCentre> centres,
                                          std::uint64_t seed,
                                          double floor_fraction = 0.1);

/// Reads `x,y,count` rows (optional header) and bins them to the raster.
/// Duplicate coordinates accumulate.
PopulationGrid load_population_csv(const std::string& path, const Window& window,
                                   double cell_size);

/// Partition of the populated cells into spatial units 0..unit_count-1;
/// unpopulated cells carry -1.
struct ArealPartition {
    int nrows = 0;
    int ncols = 0;
    int unit_count = 0;
    std::vector<int> unit_ids; // row-major

    int unit_at(int row, int col) const {
        return unit_ids[static_cast<std::size_t>(row) * ncols + col];
    }
};

/// First-order (rook) neighbourhood between units, symmetric, no self loops.
struct AdjacencyGraph {
    int n = 0;
    std::vector<std::vector<int>> neighbours; // sorted, symmetric

    bool are_neighbours(int i, int j) const;
    int degree(int i) const { return static_cast<int>(neighbours[i].size()); }
};

/// Population-weighted k-means over populated cell centroids followed by an
/// enclave repair pass that keeps every unit edge-connected.
ArealPartition build_areal_partition(const PopulationGrid& pop, int target_units,
                                     std::uint64_t seed);

/// Units are adjacent iff they share at least one raster cell edge.
/// Throws if the resulting graph is disconnected (message lists components).
AdjacencyGraph adjacency_from_partition(const ArealPartition& part);

/// Evaluation raster shared by all performance metrics. Cells partition the
/// window; the trailing row/column may be smaller when cell_size does not
/// divide the window.
struct EvalGrid {
    Window window;
    double cell_size = 0.0;
    int nrows = 0;
    int ncols = 0;
    std::vector<std::int64_t> population; // persons per eval cell

    int size() const { return nrows * ncols; }
    double col_width(int col) const {
        const double w = window.width() - col * cell_size;
        return w < cell_size ? w : cell_size;
    }
    double row_height(int row) const {
        const double h = window.height() - row * cell_size;
        return h < cell_size ? h : cell_size;
    }
    double area(int g) const { return col_width(g % ncols) * row_height(g / ncols); }
    Point centroid(int g) const {
        const int row = g / ncols, col = g % ncols;
        return {window.xmin + col * cell_size + 0.5 * col_width(col),
                window.ymin + row * cell_size + 0.5 * row_height(row)};
    }
    std::int64_t total_population() const;
};

/// Bins the population raster onto an evaluation grid of the given cell size.
EvalGrid build_eval_grid(const PopulationGrid& pop, double cell_size);

} // namespace riskfield

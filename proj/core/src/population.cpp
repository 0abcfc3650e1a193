#include "riskfield/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "riskfield/rng.hpp"

namespace riskfield {

namespace {

int checked_cell_count(double extent, double cell_size, const char* axis) {
    if (cell_size <= 0.0) throw ConfigError("cell_size must be positive");
    const double n = extent / cell_size;
    const double rounded = std::round(n);
    if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, rounded)) {
        throw ConfigError(std::string("cell_size does not tile the window along ") + axis);
    }
    return static_cast<int>(rounded);
}

} // namespace

bool PopulationGrid::cell_of(Point p, int& row, int& col) const {
    if (!window.contains(p)) return false;
    col = static_cast<int>((p.x - window.xmin) / cell_size);
    row = static_cast<int>((p.y - window.ymin) / cell_size);
    col = std::min(col, ncols - 1); // points on the max edge belong to the last cell
    row = std::min(row, nrows - 1);
    return true;
}

PopulationGrid build_synthetic_population(const Window& window, double cell_size,
                                          std::int64_t total,
                                          std::span<const GaussianCentre> centres,
                                          std::uint64_t seed, double floor_fraction) {
    if (total <= 0) throw ConfigError("synthetic population: total must be positive");
    if (centres.empty()) throw ConfigError("synthetic population: need at least one centre");
    if (floor_fraction < 0.0 || floor_fraction > 1.0) {
        throw ConfigError("synthetic population: floor_fraction must lie in [0,1]");
    }
    for (const auto& c : centres) {
        if (c.spread <= 0.0) throw ConfigError("synthetic population: spreads must be positive");
        if (c.weight < 0.0) throw ConfigError("synthetic population: weights must be non-negative");
    }

    PopulationGrid grid;
    grid.window = window;
    grid.cell_size = cell_size;
    grid.ncols = checked_cell_count(window.width(), cell_size, "x");
    grid.nrows = checked_cell_count(window.height(), cell_size, "y");
    grid.counts.assign(static_cast<std::size_t>(grid.nrows) * grid.ncols, 0);

    const double weight_sum =
        std::accumulate(centres.begin(), centres.end(), 0.0,
                        [](double s, const GaussianCentre& c) { return s + c.weight; });
    if (weight_sum <= 0.0) throw ConfigError("synthetic population: all centre weights zero");

    // Cell probabilities: bump densities at centroids, normalized, then mixed
    // with the uniform floor.
    const std::size_t ncells = grid.counts.size();
    std::vector<double> bump(ncells, 0.0);
    double bump_sum = 0.0;
    for (int r = 0; r < grid.nrows; ++r) {
        for (int c = 0; c < grid.ncols; ++c) {
            const Point p = grid.centroid(r, c);
            double v = 0.0;
            for (const auto& g : centres) {
                const double d = distance(p, g.centre);
                v += g.weight / weight_sum *
                     std::exp(-0.5 * d * d / (g.spread * g.spread));
            }
            bump[grid.idx(r, c)] = v;
            bump_sum += v;
        }
    }
    std::vector<double> prob(ncells);
    for (std::size_t i = 0; i < ncells; ++i) {
        const double bump_part = bump_sum > 0.0 ? bump[i] / bump_sum : 0.0;
        prob[i] = (1.0 - floor_fraction) * bump_part + floor_fraction / ncells;
    }

    // Multinomial via sequential conditional binomials: exact and seeded.
    Rng rng = Rng::substream(seed, 0x706f70ULL); // "pop"
    std::int64_t remaining = total;
    double prob_left = 1.0;
    for (std::size_t i = 0; i < ncells && remaining > 0; ++i) {
        double p = prob_left > 0.0 ? prob[i] / prob_left : 1.0;
        p = std::clamp(p, 0.0, 1.0);
        const std::int64_t draw =
            (i + 1 == ncells) ? remaining : rng.binomial(remaining, p);
        grid.counts[i] = draw;
        remaining -= draw;
        prob_left -= prob[i];
    }
    grid.total = total - remaining;
    if (remaining != 0) {
        // prob_left hit zero early through rounding; dump the rest in the last cell
        grid.counts.back() += remaining;
        grid.total = total;
    }
    return grid;
}

PopulationGrid load_population_csv(const std::string& path, const Window& window,
                                   double cell_size) {
    std::ifstream in(path);
    if (!in) throw ParseError("population csv: cannot open " + path);

    PopulationGrid grid;
    grid.window = window;
    grid.cell_size = cell_size;
    grid.ncols = checked_cell_count(window.width(), cell_size, "x");
    grid.nrows = checked_cell_count(window.height(), cell_size, "y");
    grid.counts.assign(static_cast<std::size_t>(grid.nrows) * grid.ncols, 0);

    std::string line;
    std::size_t row_no = 0;
    std::size_t data_rows = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || line == "\r") continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string fx, fy, fc;
        if (!std::getline(ss, fx, ',') || !std::getline(ss, fy, ',') ||
            !std::getline(ss, fc)) {
            throw ParseError("population csv row " + std::to_string(row_no) +
                             ": expected x,y,count");
        }
        if (row_no == 1 && (fx == "x" || fx == "\"x\"")) continue; // optional header
        Point p;
        std::int64_t count = 0;
        try {
            std::size_t used = 0;
            p.x = std::stod(fx, &used);
            p.y = std::stod(fy);
            count = std::stoll(fc);
        } catch (const std::exception&) {
            throw ParseError("population csv row " + std::to_string(row_no) +
                             ": malformed number");
        }
        if (count < 0) {
            throw ParseError("population csv row " + std::to_string(row_no) +
                             ": negative count");
        }
        int r = 0, c = 0;
        if (!grid.cell_of(p, r, c)) {
            throw DomainError("population csv row " + std::to_string(row_no) +
                              ": point outside window");
        }
        grid.counts[grid.idx(r, c)] += count;
        grid.total += count;
        ++data_rows;
    }
    if (data_rows == 0) throw ParseError("population csv: no data rows in " + path);
    return grid;
}

namespace {

struct CellRef {
    int row, col;
    std::int64_t count;
    Point centre;
};

std::vector<CellRef> populated_cells(const PopulationGrid& pop) {
    std::vector<CellRef> cells;
    for (int r = 0; r < pop.nrows; ++r) {
        for (int c = 0; c < pop.ncols; ++c) {
            if (pop.at(r, c) > 0) cells.push_back({r, c, pop.at(r, c), pop.centroid(r, c)});
        }
    }
    return cells;
}

// Largest-remaining component stays; every other component of the unit is an
// enclave and gets handed to the neighbouring unit with the longest shared edge.
void repair_enclaves(ArealPartition& part, const std::vector<CellRef>& cells) {
    const int nrows = part.nrows, ncols = part.ncols;
    auto uid = [&](int r, int c) -> int& {
        return part.unit_ids[static_cast<std::size_t>(r) * ncols + c];
    };

    bool changed = true;
    while (changed) {
        changed = false;
        // component labelling of populated cells within each unit
        std::vector<int> comp(part.unit_ids.size(), -1);
        std::vector<std::int64_t> comp_size;
        std::vector<int> comp_unit;
        for (const auto& cell : cells) {
            const std::size_t start = static_cast<std::size_t>(cell.row) * ncols + cell.col;
            if (comp[start] != -1) continue;
            const int unit = part.unit_ids[start];
            const int label = static_cast<int>(comp_size.size());
            comp_size.push_back(0);
            comp_unit.push_back(unit);
            std::vector<std::size_t> stack = {start};
            comp[start] = label;
            while (!stack.empty()) {
                const std::size_t cur = stack.back();
                stack.pop_back();
                ++comp_size[label];
                const int r = static_cast<int>(cur) / ncols;
                const int c = static_cast<int>(cur) % ncols;
                const int dr[] = {1, -1, 0, 0};
                const int dc[] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int rr = r + dr[k], cc = c + dc[k];
                    if (rr < 0 || rr >= nrows || cc < 0 || cc >= ncols) continue;
                    const std::size_t nidx = static_cast<std::size_t>(rr) * ncols + cc;
                    if (part.unit_ids[nidx] != unit || comp[nidx] != -1) continue;
                    comp[nidx] = label;
                    stack.push_back(nidx);
                }
            }
        }

        // main component per unit = the largest
        std::vector<int> main_comp(part.unit_count, -1);
        for (int l = 0; l < static_cast<int>(comp_size.size()); ++l) {
            const int u = comp_unit[l];
            if (main_comp[u] == -1 || comp_size[l] > comp_size[main_comp[u]]) main_comp[u] = l;
        }

        // reassign every enclave component to the foreign unit with the most shared edges
        for (int l = 0; l < static_cast<int>(comp_size.size()); ++l) {
            if (l == main_comp[comp_unit[l]]) continue;
            std::vector<std::int64_t> boundary(part.unit_count, 0);
            for (const auto& cell : cells) {
                const std::size_t i = static_cast<std::size_t>(cell.row) * ncols + cell.col;
                if (comp[i] != l) continue;
                const int dr[] = {1, -1, 0, 0};
                const int dc[] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int rr = cell.row + dr[k], cc = cell.col + dc[k];
                    if (rr < 0 || rr >= nrows || cc < 0 || cc >= ncols) continue;
                    const int nu = uid(rr, cc);
                    if (nu >= 0 && nu != comp_unit[l]) ++boundary[nu];
                }
            }
            const auto best = std::max_element(boundary.begin(), boundary.end());
            if (*best == 0) continue; // isolated in the populated raster; leave as is
            const int target = static_cast<int>(best - boundary.begin());
            for (const auto& cell : cells) {
                const std::size_t i = static_cast<std::size_t>(cell.row) * ncols + cell.col;
                if (comp[i] == l) part.unit_ids[i] = target;
            }
            changed = true;
        }
    }
}

void drop_empty_units(ArealPartition& part) {
    std::vector<int> remap(part.unit_count, -1);
    int next = 0;
    for (int& id : part.unit_ids) {
        if (id < 0) continue;
        if (remap[id] == -1) remap[id] = next++;
    }
    // remap preserving first-appearance order
    for (int& id : part.unit_ids) {
        if (id >= 0) id = remap[id];
    }
    part.unit_count = next;
}

} // namespace

ArealPartition build_areal_partition(const PopulationGrid& pop, int target_units,
                                     std::uint64_t seed) {
    const auto cells = populated_cells(pop);
    const int ncells = static_cast<int>(cells.size());
    if (target_units < 2 || target_units > ncells) {
        throw ConfigError("build_areal_partition: target_units must lie in [2, " +
                          std::to_string(ncells) + "]");
    }

    // k-means++ style seeding, population weighted
    Rng rng = Rng::substream(seed, 0x756e6974ULL); // "unit"
    std::vector<Point> seeds;
    seeds.reserve(target_units);
    {
        std::vector<double> w(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) w[i] = static_cast<double>(cells[i].count);
        auto pick_weighted = [&](const std::vector<double>& weights) {
            const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
            double u = rng.uniform() * total;
            for (std::size_t i = 0; i < weights.size(); ++i) {
                u -= weights[i];
                if (u <= 0.0) return i;
            }
            return weights.size() - 1;
        };
        seeds.push_back(cells[pick_weighted(w)].centre);
        std::vector<double> d2(cells.size());
        while (static_cast<int>(seeds.size()) < target_units) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                double best = std::numeric_limits<double>::max();
                for (const auto& s : seeds) {
                    const double d = distance(cells[i].centre, s);
                    best = std::min(best, d * d);
                }
                d2[i] = best * static_cast<double>(cells[i].count);
            }
            seeds.push_back(cells[pick_weighted(d2)].centre);
        }
    }

    // Lloyd iterations with population weights
    std::vector<int> assign(cells.size(), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool moved = false;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::max();
            for (int s = 0; s < static_cast<int>(seeds.size()); ++s) {
                const double d = distance(cells[i].centre, seeds[s]);
                if (d < best_d) {
                    best_d = d;
                    best = s;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                moved = true;
            }
        }
        if (!moved && iter > 0) break;
        std::vector<double> sx(seeds.size(), 0.0), sy(seeds.size(), 0.0), sw(seeds.size(), 0.0);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const double w = static_cast<double>(cells[i].count);
            sx[assign[i]] += w * cells[i].centre.x;
            sy[assign[i]] += w * cells[i].centre.y;
            sw[assign[i]] += w;
        }
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            if (sw[s] > 0.0) seeds[s] = {sx[s] / sw[s], sy[s] / sw[s]};
        }
    }

    ArealPartition part;
    part.nrows = pop.nrows;
    part.ncols = pop.ncols;
    part.unit_count = target_units;
    part.unit_ids.assign(static_cast<std::size_t>(pop.nrows) * pop.ncols, -1);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        part.unit_ids[static_cast<std::size_t>(cells[i].row) * pop.ncols + cells[i].col] =
            assign[i];
    }

    drop_empty_units(part);
    repair_enclaves(part, cells);
    drop_empty_units(part);
    return part;
}

bool AdjacencyGraph::are_neighbours(int i, int j) const {
    const auto& v = neighbours[i];
    return std::binary_search(v.begin(), v.end(), j);
}

AdjacencyGraph adjacency_from_partition(const ArealPartition& part) {
    AdjacencyGraph g;
    g.n = part.unit_count;
    g.neighbours.assign(g.n, {});
    for (int r = 0; r < part.nrows; ++r) {
        for (int c = 0; c < part.ncols; ++c) {
            const int u = part.unit_at(r, c);
            if (u < 0) continue;
            const int dr[] = {0, 1};
            const int dc[] = {1, 0};
            for (int k = 0; k < 2; ++k) {
                const int rr = r + dr[k], cc = c + dc[k];
                if (rr >= part.nrows || cc >= part.ncols) continue;
                const int v = part.unit_at(rr, cc);
                if (v < 0 || v == u) continue;
                g.neighbours[u].push_back(v);
                g.neighbours[v].push_back(u);
            }
        }
    }
    for (auto& v : g.neighbours) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    // connectivity check
    std::vector<int> comp(g.n, -1);
    int ncomp = 0;
    for (int s = 0; s < g.n; ++s) {
        if (comp[s] != -1) continue;
        std::vector<int> stack = {s};
        comp[s] = ncomp;
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            for (int nb : g.neighbours[cur]) {
                if (comp[nb] == -1) {
                    comp[nb] = ncomp;
                    stack.push_back(nb);
                }
            }
        }
        ++ncomp;
    }
    if (ncomp > 1) {
        std::string msg = "adjacency graph is disconnected (" + std::to_string(ncomp) +
                          " components); component sizes:";
        std::vector<int> sizes(ncomp, 0);
        for (int u = 0; u < g.n; ++u) ++sizes[comp[u]];
        for (int s : sizes) msg += " " + std::to_string(s);
        throw DomainError(msg);
    }
    return g;
}

std::int64_t EvalGrid::total_population() const {
    return std::accumulate(population.begin(), population.end(), std::int64_t{0});
}

EvalGrid build_eval_grid(const PopulationGrid& pop, double cell_size) {
    if (cell_size <= 0.0) throw ConfigError("eval grid: cell_size must be positive");
    EvalGrid grid;
    grid.window = pop.window;
    grid.cell_size = cell_size;
    grid.ncols = static_cast<int>(std::ceil(pop.window.width() / cell_size - 1e-9));
    grid.nrows = static_cast<int>(std::ceil(pop.window.height() / cell_size - 1e-9));
    grid.population.assign(static_cast<std::size_t>(grid.nrows) * grid.ncols, 0);
    for (int r = 0; r < pop.nrows; ++r) {
        for (int c = 0; c < pop.ncols; ++c) {
            if (pop.at(r, c) == 0) continue;
            const Point p = pop.centroid(r, c);
            const int gc = std::min(static_cast<int>((p.x - pop.window.xmin) / cell_size),
                                    grid.ncols - 1);
            const int gr = std::min(static_cast<int>((p.y - pop.window.ymin) / cell_size),
                                    grid.nrows - 1);
            grid.population[static_cast<std::size_t>(gr) * grid.ncols + gc] += pop.at(r, c);
        }
    }
    return grid;
}

} // namespace riskfield

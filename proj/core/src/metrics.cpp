#include "riskfield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskfield/errors.hpp"

namespace riskfield {

std::vector<double> MetricsConfig::default_q_grid() {
    std::vector<double> q;
    for (int i = 0; i < 20; ++i) q.push_back(i * 0.05);
    return q;
}

double rmise(const std::vector<double>& truth_risk, const Eigen::MatrixXd& eta_samples,
             const EvalGrid& grid, BWeight b_weight, RScale r_scale) {
    const int n_cells = grid.size();
    if (static_cast<int>(truth_risk.size()) != n_cells ||
        eta_samples.cols() != n_cells) {
        throw DomainError("rmise: sample/cell mismatch");
    }
    const auto n_draws = eta_samples.rows();
    if (n_draws == 0) throw DomainError("rmise: no posterior samples");

    std::vector<double> bw(n_cells), ref(n_cells);
    for (int g = 0; g < n_cells; ++g) {
        const double area = grid.area(g);
        bw[g] = (b_weight == BWeight::unit)
                    ? area
                    : static_cast<double>(grid.population[g]); // (pop/|D|) * |D|
        ref[g] = (r_scale == RScale::log) ? std::log(truth_risk[g]) : truth_risk[g];
    }

    double mean_ise = 0.0;
    for (Eigen::Index s = 0; s < n_draws; ++s) {
        double ise = 0.0;
        for (int g = 0; g < n_cells; ++g) {
            const double fitted = (r_scale == RScale::log) ? eta_samples(s, g)
                                                           : std::exp(eta_samples(s, g));
            const double d = fitted - ref[g];
            ise += bw[g] * d * d;
        }
        mean_ise += ise;
    }
    mean_ise /= static_cast<double>(n_draws);
    return std::sqrt(mean_ise);
}

std::vector<char> covers_truth(const std::vector<double>& truth_risk,
                               const Eigen::VectorXd& lo95_eta,
                               const Eigen::VectorXd& hi95_eta) {
    const auto n = static_cast<Eigen::Index>(truth_risk.size());
    if (lo95_eta.size() != n || hi95_eta.size() != n) {
        throw DomainError("covers_truth: size mismatch");
    }
    std::vector<char> delta(truth_risk.size());
    for (Eigen::Index g = 0; g < n; ++g) {
        const double lt = std::log(truth_risk[g]);
        delta[g] = (lt >= lo95_eta[g] && lt <= hi95_eta[g]) ? 1 : 0;
    }
    return delta;
}

CoverageSummary coverage(const std::vector<std::vector<char>>& delta) {
    if (delta.empty()) throw DomainError("coverage: no replicates");
    const std::size_t n_rep = delta.size();
    const std::size_t n_cell = delta.front().size();
    for (const auto& row : delta) {
        if (row.size() != n_cell) throw DomainError("coverage: ragged replicate rows");
    }
    CoverageSummary out;
    out.p_g.assign(n_cell, 0.0);
    out.p_j.assign(n_rep, 0.0);
    for (std::size_t j = 0; j < n_rep; ++j) {
        std::size_t hits = 0;
        for (std::size_t g = 0; g < n_cell; ++g) {
            if (delta[j][g]) {
                out.p_g[g] += 1.0;
                ++hits;
            }
        }
        out.p_j[j] = static_cast<double>(hits) / static_cast<double>(n_cell);
    }
    for (auto& p : out.p_g) p /= static_cast<double>(n_rep);
    return out;
}

RocResult roc_auc(const std::vector<char>& truth_high, const std::vector<double>& scores,
                  const std::vector<double>& weights, const std::vector<double>& q_grid) {
    const std::size_t n = truth_high.size();
    if (scores.size() != n || weights.size() != n) {
        throw DomainError("roc_auc: size mismatch");
    }
    for (std::size_t i = 1; i < q_grid.size(); ++i) {
        if (!(q_grid[i] > q_grid[i - 1]) || q_grid[i] >= 1.0 || q_grid.front() < 0.0) {
            throw ConfigError("roc_auc: q grid must be strictly increasing in [0,1)");
        }
    }
    double w_pos = 0.0, w_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        (truth_high[i] ? w_pos : w_neg) += weights[i];
    }
    if (w_pos <= 0.0) throw ConfigError("roc_auc: empty true high-risk set");
    if (w_neg <= 0.0) throw ConfigError("roc_auc: true high-risk set covers everything");

    RocResult out;
    for (double q : q_grid) {
        double tp = 0.0, tn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool flagged = scores[i] > q;
            if (truth_high[i] && flagged) tp += weights[i];
            if (!truth_high[i] && !flagged) tn += weights[i];
        }
        out.points.push_back({q, tp / w_pos, tn / w_neg});
    }

    // AUC over all score thresholds: weighted Mann-Whitney with tie credit 1/2
    std::vector<std::size_t> ord(n);
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double cum_neg = 0.0, auc = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        double tie_pos = 0.0, tie_neg = 0.0;
        while (j < n && scores[ord[j]] == scores[ord[i]]) {
            if (truth_high[ord[j]]) {
                tie_pos += weights[ord[j]];
            } else {
                tie_neg += weights[ord[j]];
            }
            ++j;
        }
        auc += tie_pos * (cum_neg + 0.5 * tie_neg);
        cum_neg += tie_neg;
        i = j;
    }
    out.auc = auc / (w_pos * w_neg);
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("percentile: empty sample");
    if (p < 0.0 || p > 1.0) throw DomainError("percentile: p outside [0,1]");
    std::sort(values.begin(), values.end());
    const double rank = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    const double t = rank - static_cast<double>(lo);
    return (1.0 - t) * values[lo] + t * values[hi];
}

SummaryStats scenario_summary(const std::vector<double>& values) {
    return {percentile(values, 0.5), percentile(values, 0.025), percentile(values, 0.975)};
}

std::vector<int> cell_units(const ArealPartition& part, const PopulationGrid& pop,
                            const EvalGrid& grid) {
    if (part.nrows != pop.nrows || part.ncols != pop.ncols) {
        throw DomainError("cell_units: partition/population raster mismatch");
    }
    std::vector<std::pair<Point, int>> assigned;
    for (int r = 0; r < part.nrows; ++r) {
        for (int c = 0; c < part.ncols; ++c) {
            const int u = part.unit_at(r, c);
            if (u >= 0) assigned.push_back({pop.centroid(r, c), u});
        }
    }
    if (assigned.empty()) throw DomainError("cell_units: partition has no assigned cells");

    std::vector<int> units(grid.size());
    for (int g = 0; g < grid.size(); ++g) {
        const Point p = grid.centroid(g);
        int rr = 0, cc = 0;
        if (pop.cell_of(p, rr, cc) && part.unit_at(rr, cc) >= 0) {
            units[g] = part.unit_at(rr, cc);
            continue;
        }
        double best = std::numeric_limits<double>::max();
        int best_u = 0;
        for (const auto& [q, u] : assigned) {
            const double d = distance(p, q);
            if (d < best) {
                best = d;
                best_u = u;
            }
        }
        units[g] = best_u;
    }
    return units;
}

} // namespace riskfield

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "riskfield/population.hpp"

namespace riskfield {

enum class BWeight { unit, population_density };
enum class RScale { log, risk };

struct MetricsConfig {
    BWeight b_weight = BWeight::unit;
    RScale r_scale = RScale::log;
    std::vector<double> q_grid;     // strictly increasing in [0, 1)
    double truth_threshold = 0.0;   // risk cutoff defining the true high-risk set
    double exceedance_rate = 0.0;   // reference rate for exceedance probabilities

    static std::vector<double> default_q_grid(); // 0, 0.05, ..., 0.95
};

/// Root mean integrated squared error against per-cell truth. `eta_samples`
/// holds posterior draws of log-risk (one row per draw, one column per cell).
double rmise(const std::vector<double>& truth_risk, const Eigen::MatrixXd& eta_samples,
             const EvalGrid& grid, BWeight b_weight, RScale r_scale);

/// Per-cell indicator of truth lying inside the central 95% interval
/// [exp(lo95_eta), exp(hi95_eta)].
std::vector<char> covers_truth(const std::vector<double>& truth_risk,
                               const Eigen::VectorXd& lo95_eta,
                               const Eigen::VectorXd& hi95_eta);

struct CoverageSummary {
    std::vector<double> p_g; // per cell, averaged over replicates
    std::vector<double> p_j; // per replicate, averaged over cells
};

/// delta[j][g]: indicator for replicate j, cell g.
CoverageSummary coverage(const std::vector<std::vector<char>>& delta);

struct RocPoint {
    double q = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points; // one per q-grid value
    double auc = 0.0;
};

/// ROC points over the q grid plus the AUC over all score thresholds (the
/// fine-grid limit; invariant under strictly monotone score transforms).
/// `weights` are cell areas or cell populations.
RocResult roc_auc(const std::vector<char>& truth_high, const std::vector<double>& scores,
                  const std::vector<double>& weights, const std::vector<double>& q_grid);

struct SummaryStats {
    double median = 0.0;
    double lo = 0.0; // 2.5th percentile
    double hi = 0.0; // 97.5th percentile
};

/// Empirical percentile with linear interpolation, inclusive endpoints.
double percentile(std::vector<double> values, double p);
SummaryStats scenario_summary(const std::vector<double>& values);

/// Maps every evaluation cell to a spatial unit: the unit of the nearest
/// populated raster cell to the evaluation-cell centroid (the containing unit
/// whenever the centroid falls in a populated cell).
std::vector<int> cell_units(const ArealPartition& part, const PopulationGrid& pop,
                            const EvalGrid& grid);

} // namespace riskfield

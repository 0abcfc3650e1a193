#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskfield/bym.hpp"
#include "riskfield/config.hpp"
#include "riskfield/dataset.hpp"
#include "riskfield/lgm.hpp"
#include "riskfield/metrics.hpp"
#include "riskfield/spde.hpp"

namespace riskfield {

/// Runs fn(0..n-1) on `jobs` worker threads; outputs must be written to
/// per-index slots so scheduling order cannot change results.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// Resolves --jobs: explicit value, else RISKFIELD_JOBS, else hardware threads.
int resolve_jobs(int requested);

/// Deterministic per-replicate seeds.
std::uint64_t dataset_seed(std::uint64_t base, int replicate);
std::uint64_t fit_seed(std::uint64_t base, int replicate, const std::string& model);

/// Everything derived from a config that is shared across replicates.
struct ScenarioArtifacts {
    ScenarioConfig config;
    PopulationGrid pop;
    ArealPartition part;
    AdjacencyGraph adjacency;
    IcarStructure icar;
    EvalGrid grid;
    Mesh mesh;
    FemMatrices fem;
    RiskSurface surface;
    std::vector<double> truth_risk; // at evaluation-cell centroids
    std::vector<int> cell_unit;     // evaluation cell -> unit
    double truth_threshold = 0.0;
    double exceedance_rate = 0.0;

    bool wants(const std::string& model) const;
};

ScenarioArtifacts build_scenario(const ScenarioConfig& cfg);

/// Maps a unit-level (BYM) fit onto evaluation cells: each cell inherits the
/// posterior of the unit containing its centroid.
FitResult expand_to_cells(const FitResult& unit_fit, const std::vector<int>& cell_unit);

struct ReplicateMetrics {
    int replicate = -1;
    std::string model;
    std::string status = "ok"; // ok | missing | error:<...>
    double rmise_log_unit = 0.0, rmise_log_pop = 0.0;
    double rmise_risk_unit = 0.0, rmise_risk_pop = 0.0;
    double coverage_pj = 0.0;
    double auc_area = 0.0, auc_pop = 0.0;
    bool roc_defined = false;
    RocResult roc_area, roc_pop;
    std::vector<char> delta; // per-cell coverage indicators
    std::int64_t total_cases = 0;
    double runtime_seconds = 0.0;
    bool converged = false;

    bool ok() const { return status == "ok"; }
};

/// Metrics for one cell-level fit against the scenario truth.
ReplicateMetrics evaluate_cell_fit(const ScenarioArtifacts& art, const FitResult& cell_fit,
                                   int replicate, const std::string& model);

/// Fits one dataset with one model, returning the raw (unit- or cell-level) result.
FitResult fit_dataset(const ScenarioArtifacts& art, const Dataset& ds,
                      const std::string& model, std::uint64_t seed);

struct ScenarioRun {
    std::map<std::string, std::vector<ReplicateMetrics>> by_model;
};

/// simulate + fit + evaluate fully in memory (used by the acceptance suite).
ScenarioRun run_scenario_in_memory(const ScenarioConfig& cfg, int jobs);

// ---- filesystem front-ends used by the CLI ----

void run_simulate(const ScenarioConfig& cfg, const std::string& out_dir);
void run_fit_cmd(const ScenarioConfig& cfg, const std::string& data_dir,
                 const std::string& out_dir, int jobs);
void run_evaluate_cmd(const ScenarioConfig& cfg, const std::string& data_dir,
                      const std::string& fit_dir, const std::string& out_dir);
void run_map_cmd(const ScenarioConfig& cfg, const std::string& fit_csv,
                 const std::string& out_dir);
void run_sweep_cmd(const ScenarioConfig& base, const std::string& out_dir, int jobs);

} // namespace riskfield

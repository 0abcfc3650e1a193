#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskfield/geometry.hpp"
#include "riskfield/population.hpp"
#include "riskfield/risk_surface.hpp"

namespace riskfield {

/// One scenario: population, partition, surface, simulation, meshes, models.
/// Parsed from a sectioned key-value text file; every field is validated with
/// an error message naming `section.key`.
struct ScenarioConfig {
    // [population]
    std::string population_source = "synthetic"; // synthetic | csv
    std::string population_csv;
    Window window{0.0, 0.0, 40000.0, 30000.0};
    double cell_size = 500.0;
    std::int64_t total = 200000;
    std::vector<GaussianCentre> centres = {
        {{12000.0, 12000.0}, 0.5, 3000.0},
        {{28000.0, 20000.0}, 0.3, 2500.0},
        {{30000.0, 10000.0}, 0.2, 1500.0},
    };
    double floor_fraction = 0.1;
    std::uint64_t population_seed = 9001;

    // [partition]
    int target_units = 170;

    // [surface]
    SurfaceShape shape = SurfaceShape::step;
    double c = 5.0;
    double r = 10000.0;
    double k = 5.0;
    double n_ref = 334.0;
    std::vector<Point> circle_centres; // empty -> population centres

    // [simulation]
    int replicates = 30;
    std::uint64_t seed = 42;

    // [grid]
    double eval_cell_size = 1000.0;

    // [mesh]
    double mesh_spacing = 1500.0;
    double mesh_extension = -1.0; // negative -> default half window diameter

    // [inference]
    std::vector<std::string> models = {"bym", "lgcp"};
    int samples = 500;
    bool phi_prior_uniform = false;
    double rho_prior_median = 30000.0;
    std::vector<double> map_thresholds = {0.5, 0.8};

    // [evaluation]
    double truth_threshold = -1.0;  // negative -> k * n_ref / P_W
    double exceedance_rate = -1.0;  // negative -> k * n_ref / P_W

    std::string scenario_id = "scenario";

    void validate() const;
    std::string serialize() const;

    static ScenarioConfig parse_file(const std::string& path);
    static ScenarioConfig parse_string(const std::string& text);
};

/// The factorial design: flat surfaces for every k, plus
/// {step, smooth} x r x c x k combinations (39 scenarios with defaults).
std::vector<ScenarioConfig> enumerate_scenarios(
    const ScenarioConfig& base, const std::vector<double>& radii = {1000.0, 5000.0, 10000.0},
    const std::vector<double>& ratios = {2.0, 5.0},
    const std::vector<double>& multipliers = {1.0, 5.0, 10.0});

} // namespace riskfield

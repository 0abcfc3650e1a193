#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "riskfield/config.hpp"
#include "riskfield/pipeline.hpp"

namespace {

riskfield::ScenarioConfig load_config(const std::string& path, long long seed_override) {
    auto cfg = riskfield::ScenarioConfig::parse_file(path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"riskfield: spatial disease-risk simulation and model benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_dir, fit_csv;
    int jobs = 0;
    long long seed = -1;

    auto add_common = [&](CLI::App* cmd, bool with_jobs) {
        cmd->add_option("--config", config_path, "scenario config file")->required();
        cmd->add_option("--out", out_dir, "output directory")->required();
        cmd->add_option("--seed", seed, "override [simulation].seed");
        if (with_jobs) {
            cmd->add_option("--jobs", jobs,
                            "worker threads (default: RISKFIELD_JOBS or hardware)");
        }
    };

    auto* sim = app.add_subcommand("simulate", "generate replicate case datasets");
    add_common(sim, false);
    auto* fit = app.add_subcommand("fit", "fit configured models to every dataset");
    add_common(fit, true);
    auto* eval = app.add_subcommand("evaluate", "score fits against the true surface");
    add_common(eval, false);
    auto* map = app.add_subcommand("map", "render risk and exceedance maps for one fit");
    add_common(map, false);
    map->add_option("--fit", fit_csv, "fit result csv to render")->required();
    auto* sweep = app.add_subcommand("sweep", "run the full factorial scenario design");
    add_common(sweep, true);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load_config(config_path, seed);
        if (sim->parsed()) {
            riskfield::run_simulate(cfg, out_dir + "/data");
        } else if (fit->parsed()) {
            riskfield::run_fit_cmd(cfg, out_dir + "/data", out_dir + "/fits", jobs);
        } else if (eval->parsed()) {
            riskfield::run_evaluate_cmd(cfg, out_dir + "/data", out_dir + "/fits",
                                        out_dir + "/metrics");
        } else if (map->parsed()) {
            riskfield::run_map_cmd(cfg, fit_csv, out_dir + "/maps");
        } else if (sweep->parsed()) {
            riskfield::run_sweep_cmd(cfg, out_dir, jobs);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "riskfield: %s\n", e.what());
        return 1;
    }
    return 0;
}

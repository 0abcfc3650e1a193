#include "riskfield/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "riskfield/io.hpp"

namespace riskfield {

namespace fs = std::filesystem;

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

int resolve_jobs(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("RISKFIELD_JOBS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::uint64_t dataset_seed(std::uint64_t base, int replicate) {
    return mix64(base ^ mix64(0x64617461ULL + static_cast<std::uint64_t>(replicate)));
}

std::uint64_t fit_seed(std::uint64_t base, int replicate, const std::string& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : model) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ULL;
    return mix64(base ^ mix64(h) ^ mix64(0x666974ULL + static_cast<std::uint64_t>(replicate)));
}

bool ScenarioArtifacts::wants(const std::string& model) const {
    return std::find(config.models.begin(), config.models.end(), model) !=
           config.models.end();
}

ScenarioArtifacts build_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    ScenarioArtifacts art;
    art.config = cfg;

    if (cfg.population_source == "csv") {
        art.pop = load_population_csv(cfg.population_csv, cfg.window, cfg.cell_size);
    } else {
        art.pop = build_synthetic_population(cfg.window, cfg.cell_size, cfg.total,
                                             cfg.centres, cfg.population_seed,
                                             cfg.floor_fraction);
    }

    CircleSpec circles;
    circles.radius = cfg.r;
    if (!cfg.circle_centres.empty()) {
        circles.centres = cfg.circle_centres;
    } else {
        for (const auto& g : cfg.centres) circles.centres.push_back(g.centre);
    }
    art.surface = solve_surface_parameters(art.pop, circles, cfg.c, cfg.k, cfg.n_ref,
                                           cfg.shape);

    art.grid = build_eval_grid(art.pop, cfg.eval_cell_size);
    art.truth_risk.resize(art.grid.size());
    for (int g = 0; g < art.grid.size(); ++g) {
        art.truth_risk[g] = risk_at(art.surface, art.grid.centroid(g));
    }

    if (art.wants("bym")) {
        art.part = build_areal_partition(art.pop, cfg.target_units, cfg.population_seed);
        art.adjacency = adjacency_from_partition(art.part);
        art.icar = icar_precision(art.adjacency);
        art.cell_unit = cell_units(art.part, art.pop, art.grid);
    }
    if (art.wants("lgcp")) {
        const double ext = cfg.mesh_extension >= 0.0 ? cfg.mesh_extension
                                                     : default_mesh_extension(cfg.window);
        art.mesh = build_mesh(cfg.window, cfg.mesh_spacing, ext);
        art.fem = assemble_fem(art.mesh);
    }

    const double rate = cfg.k * cfg.n_ref / static_cast<double>(art.pop.total);
    art.truth_threshold = cfg.truth_threshold >= 0.0 ? cfg.truth_threshold : rate;
    art.exceedance_rate = cfg.exceedance_rate >= 0.0 ? cfg.exceedance_rate : rate;
    return art;
}

FitResult expand_to_cells(const FitResult& unit_fit, const std::vector<int>& cell_unit) {
    FitResult out;
    const int n_cells = static_cast<int>(cell_unit.size());
    out.n_targets = n_cells;
    out.thresholds = unit_fit.thresholds;
    out.mean_eta.resize(n_cells);
    out.sd_eta.resize(n_cells);
    out.lo95_eta.resize(n_cells);
    out.hi95_eta.resize(n_cells);
    out.mean_risk.resize(n_cells);
    out.exceedance.resize(n_cells, unit_fit.exceedance.cols());
    if (unit_fit.samples.rows() > 0) {
        out.samples.resize(unit_fit.samples.rows(), n_cells);
    }
    for (int g = 0; g < n_cells; ++g) {
        const int u = cell_unit[g];
        if (u < 0 || u >= unit_fit.n_targets) {
            throw DomainError("expand_to_cells: cell mapped to unknown unit");
        }
        out.mean_eta[g] = unit_fit.mean_eta[u];
        out.sd_eta[g] = unit_fit.sd_eta[u];
        out.lo95_eta[g] = unit_fit.lo95_eta[u];
        out.hi95_eta[g] = unit_fit.hi95_eta[u];
        out.mean_risk[g] = unit_fit.mean_risk[u];
        out.exceedance.row(g) = unit_fit.exceedance.row(u);
        if (unit_fit.samples.rows() > 0) out.samples.col(g) = unit_fit.samples.col(u);
    }
    out.hyper_mode = unit_fit.hyper_mode;
    out.hyper_mean = unit_fit.hyper_mean;
    out.hyper_sd = unit_fit.hyper_sd;
    out.hyper_names = unit_fit.hyper_names;
    out.diag = unit_fit.diag;
    return out;
}

FitResult fit_dataset(const ScenarioArtifacts& art, const Dataset& ds,
                      const std::string& model, std::uint64_t seed) {
    FitOptions options;
    options.thresholds = {art.exceedance_rate};
    options.n_samples = art.config.samples;
    options.seed = seed;
    options.phi_prior_uniform = art.config.phi_prior_uniform;
    options.rho_prior_median = art.config.rho_prior_median;
    if (model == "bym") {
        const UnitCounts counts = aggregate_to_units(ds, art.part, art.pop);
        return fit_bym(counts, art.icar, options);
    }
    if (model == "lgcp") {
        const GridCounts counts = aggregate_to_grid(ds, art.pop, art.grid);
        return fit_lgcp(counts, art.grid, art.mesh, art.fem, options);
    }
    throw ConfigError("unknown model: " + model);
}

ReplicateMetrics evaluate_cell_fit(const ScenarioArtifacts& art, const FitResult& cell_fit,
                                   int replicate, const std::string& model) {
    ReplicateMetrics rm;
    rm.replicate = replicate;
    rm.model = model;
    rm.converged = cell_fit.diag.converged;
    rm.runtime_seconds = cell_fit.diag.runtime_seconds;

    const EvalGrid& grid = art.grid;
    if (cell_fit.n_targets != grid.size()) {
        throw DomainError("evaluate_cell_fit: fit is not at evaluation-cell level");
    }
    if (cell_fit.samples.rows() < 100) {
        throw DomainError("evaluate_cell_fit: need at least 100 posterior samples per cell");
    }

    rm.rmise_log_unit = rmise(art.truth_risk, cell_fit.samples, grid, BWeight::unit,
                              RScale::log);
    rm.rmise_log_pop = rmise(art.truth_risk, cell_fit.samples, grid,
                             BWeight::population_density, RScale::log);
    rm.rmise_risk_unit = rmise(art.truth_risk, cell_fit.samples, grid, BWeight::unit,
                               RScale::risk);
    rm.rmise_risk_pop = rmise(art.truth_risk, cell_fit.samples, grid,
                              BWeight::population_density, RScale::risk);

    rm.delta = covers_truth(art.truth_risk, cell_fit.lo95_eta, cell_fit.hi95_eta);
    std::size_t hits = 0;
    for (char d : rm.delta) hits += d ? 1 : 0;
    rm.coverage_pj = static_cast<double>(hits) / static_cast<double>(rm.delta.size());

    // ROC only when the truth set is a proper subset of the window
    std::vector<char> truth_high(grid.size());
    bool any = false, all = true;
    for (int g = 0; g < grid.size(); ++g) {
        truth_high[g] = art.truth_risk[g] > art.truth_threshold ? 1 : 0;
        any = any || truth_high[g];
        all = all && truth_high[g];
    }
    if (any && !all) {
        std::vector<double> scores(grid.size());
        for (int g = 0; g < grid.size(); ++g) scores[g] = cell_fit.exceedance(g, 0);
        std::vector<double> area_w(grid.size()), pop_w(grid.size());
        for (int g = 0; g < grid.size(); ++g) {
            area_w[g] = grid.area(g);
            pop_w[g] = static_cast<double>(grid.population[g]);
        }
        const auto q = MetricsConfig::default_q_grid();
        rm.roc_area = roc_auc(truth_high, scores, area_w, q);
        rm.auc_area = rm.roc_area.auc;
        rm.roc_pop = roc_auc(truth_high, scores, pop_w, q);
        rm.auc_pop = rm.roc_pop.auc;
        rm.roc_defined = true;
    } else if (art.config.shape != SurfaceShape::flat) {
        throw ConfigError("evaluate_cell_fit: degenerate truth set in a non-flat scenario");
    }
    return rm;
}

ScenarioRun run_scenario_in_memory(const ScenarioConfig& cfg, int jobs) {
    const ScenarioArtifacts art = build_scenario(cfg);
    const int n_rep = cfg.replicates;

    struct Job {
        int replicate;
        std::string model;
    };
    std::vector<Job> tasks;
    for (const auto& model : cfg.models) {
        for (int j = 0; j < n_rep; ++j) tasks.push_back({j, model});
    }
    std::vector<ReplicateMetrics> results(tasks.size());

    parallel_for(static_cast<int>(tasks.size()), resolve_jobs(jobs), [&](int t) {
        const auto& task = tasks[t];
        const Dataset ds =
            simulate_dataset(art.surface, art.pop, dataset_seed(cfg.seed, task.replicate));
        ReplicateMetrics rm;
        try {
            FitResult fit = fit_dataset(art, ds, task.model,
                                        fit_seed(cfg.seed, task.replicate, task.model));
            const FitResult cells = task.model == "bym"
                                        ? expand_to_cells(fit, art.cell_unit)
                                        : std::move(fit);
            rm = evaluate_cell_fit(art, cells, task.replicate, task.model);
        } catch (const Error& e) {
            rm.replicate = task.replicate;
            rm.model = task.model;
            rm.status = std::string("error:") + e.what();
        }
        rm.total_cases = ds.total_cases;
        results[t] = std::move(rm);
    });

    ScenarioRun run;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        run.by_model[tasks[t].model].push_back(std::move(results[t]));
    }
    return run;
}

namespace {

std::string replicate_tag(int j) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "r%03d", j);
    return buf;
}

void write_manifest(const std::string& path, const ScenarioConfig& cfg,
                    const ScenarioArtifacts& art,
                    const std::vector<std::int64_t>& totals) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << "[manifest]\n";
    out << "scenario = " << cfg.scenario_id << "\n";
    out << "replicates = " << cfg.replicates << "\n";
    out << "population_total = " << art.pop.total << "\n";
    out << "expected_cases = " << io::format_double(expected_cases(art.surface, art.pop))
        << "\n";
    out << "target_cases = " << io::format_double(cfg.k * cfg.n_ref) << "\n";
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            out << "lambda0 = " << io::format_double(s.lambda0) << "\n";
            if constexpr (std::is_same_v<T, StepSurface>) {
                out << "alpha = " << io::format_double(s.alpha) << "\n";
            } else if constexpr (std::is_same_v<T, SmoothSurface>) {
                out << "beta = " << io::format_double(s.beta) << "\n";
                out << "gamma = " << io::format_double(s.gamma) << "\n";
            }
        },
        art.surface);
    out << "truth_threshold = " << io::format_double(art.truth_threshold) << "\n";
    out << "exceedance_rate = " << io::format_double(art.exceedance_rate) << "\n";
    out << "\n[seeds]\n";
    for (int j = 0; j < cfg.replicates; ++j) {
        out << replicate_tag(j) << " = " << dataset_seed(cfg.seed, j) << "\n";
    }
    out << "\n[cases]\n";
    for (int j = 0; j < cfg.replicates; ++j) {
        out << replicate_tag(j) << " = " << totals[j] << "\n";
    }
}

} // namespace

void run_simulate(const ScenarioConfig& cfg, const std::string& out_dir) {
    const ScenarioArtifacts art = build_scenario(cfg);
    fs::create_directories(out_dir);
    std::vector<std::int64_t> totals(cfg.replicates, 0);
    for (int j = 0; j < cfg.replicates; ++j) {
        Dataset ds = simulate_dataset(art.surface, art.pop, dataset_seed(cfg.seed, j));
        ds.scenario_id = cfg.scenario_id;
        ds.replicate_id = j;
        totals[j] = ds.total_cases;
        io::write_dataset_csv(out_dir + "/dataset_" + replicate_tag(j) + ".csv", ds);
    }
    write_manifest(out_dir + "/manifest.txt", cfg, art, totals);
    std::ofstream cfg_out(out_dir + "/config.txt");
    cfg_out << cfg.serialize();
}

void run_fit_cmd(const ScenarioConfig& cfg, const std::string& data_dir,
                 const std::string& out_dir, int jobs) {
    const ScenarioArtifacts art = build_scenario(cfg);
    fs::create_directories(out_dir);
    if (art.wants("bym")) {
        io::write_partition_csv(out_dir + "/partition.csv", art.part);
    }
    if (art.wants("lgcp")) {
        io::write_mesh_csv(out_dir + "/mesh_nodes.csv", out_dir + "/mesh_triangles.csv",
                           art.mesh);
    }

    struct Job {
        int replicate;
        std::string model;
    };
    std::vector<Job> tasks;
    for (const auto& model : cfg.models) {
        for (int j = 0; j < cfg.replicates; ++j) {
            if (fs::exists(data_dir + "/dataset_" + replicate_tag(j) + ".csv")) {
                tasks.push_back({j, model});
            }
        }
    }
    if (tasks.empty()) throw ConfigError("fit: no datasets found in " + data_dir);

    std::vector<nlohmann::json> diagnostics(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), resolve_jobs(jobs), [&](int t) {
        const auto& task = tasks[t];
        const std::string tag = replicate_tag(task.replicate);
        nlohmann::json rec{{"scenario", cfg.scenario_id},
                           {"replicate", task.replicate},
                           {"model", task.model}};
        try {
            const Dataset ds =
                io::read_dataset_csv(data_dir + "/dataset_" + tag + ".csv", art.pop);
            const FitResult fit = fit_dataset(art, ds, task.model,
                                              fit_seed(cfg.seed, task.replicate, task.model));
            const std::string stem = out_dir + "/fit_" + task.model + "_" + tag;
            io::write_fit_csv(stem + ".csv", fit);
            io::write_hyper_csv(stem + "_hyper.csv", fit);
            if (fit.samples.rows() > 0) {
                io::write_samples_csv(stem + "_samples.csv", fit.samples);
            }
            rec["status"] = "ok";
            rec["converged"] = fit.diag.converged;
            rec["runtime_seconds"] = fit.diag.runtime_seconds;
            rec["newton_iterations"] = fit.diag.newton_iterations;
            rec["grid_size"] = fit.diag.grid_size;
            rec["hessian_fallback"] = fit.diag.hessian_fallback;
            rec["box_clipped"] = fit.diag.box_clipped;
        } catch (const Error& e) {
            rec["status"] = "error";
            rec["message"] = e.what();
        }
        diagnostics[t] = std::move(rec);
    });

    std::ofstream diag_out(out_dir + "/diagnostics.jsonl");
    for (const auto& rec : diagnostics) diag_out << rec.dump() << "\n";
}

namespace {

void write_metrics_row(std::ofstream& out, const std::string& scenario,
                       const ReplicateMetrics& rm) {
    out << scenario << ',' << rm.replicate << ',' << rm.model << ',' << rm.status;
    if (rm.ok()) {
        out << ',' << io::format_double(rm.rmise_log_unit) << ','
            << io::format_double(rm.rmise_log_pop) << ','
            << io::format_double(rm.rmise_risk_unit) << ','
            << io::format_double(rm.rmise_risk_pop) << ','
            << io::format_double(rm.coverage_pj);
        if (rm.roc_defined) {
            out << ',' << io::format_double(rm.auc_area) << ','
                << io::format_double(rm.auc_pop);
        } else {
            out << ",,";
        }
        out << ',' << rm.total_cases;
    } else {
        out << ",,,,,,,," << rm.total_cases;
    }
    out << '\n';
}

const char* kMetricsHeader =
    "scenario,replicate,model,status,rmise_log_unit,rmise_log_pop,rmise_risk_unit,"
    "rmise_risk_pop,coverage_pj,auc_area,auc_pop,total_cases\n";

void write_summary(const std::string& path, const std::string& scenario,
                   const std::map<std::string, std::vector<ReplicateMetrics>>& by_model) {
    std::ofstream out(path);
    out << "scenario,model,metric,median,p2.5,p97.5,n\n";
    const std::vector<std::pair<std::string, std::function<double(const ReplicateMetrics&)>>>
        metrics = {
            {"rmise_log_unit", [](const auto& m) { return m.rmise_log_unit; }},
            {"rmise_log_pop", [](const auto& m) { return m.rmise_log_pop; }},
            {"rmise_risk_unit", [](const auto& m) { return m.rmise_risk_unit; }},
            {"rmise_risk_pop", [](const auto& m) { return m.rmise_risk_pop; }},
            {"coverage_pj", [](const auto& m) { return m.coverage_pj; }},
            {"auc_area", [](const auto& m) { return m.auc_area; }},
            {"auc_pop", [](const auto& m) { return m.auc_pop; }},
        };
    for (const auto& [model, rows] : by_model) {
        for (const auto& [name, get] : metrics) {
            std::vector<double> vals;
            for (const auto& rm : rows) {
                if (!rm.ok()) continue;
                if ((name == "auc_area" || name == "auc_pop") && !rm.roc_defined) continue;
                vals.push_back(get(rm));
            }
            if (vals.empty()) continue;
            const SummaryStats s = scenario_summary(vals);
            out << scenario << ',' << model << ',' << name << ','
                << io::format_double(s.median) << ',' << io::format_double(s.lo) << ','
                << io::format_double(s.hi) << ',' << vals.size() << '\n';
        }
    }
}

} // namespace

void run_evaluate_cmd(const ScenarioConfig& cfg, const std::string& data_dir,
                      const std::string& fit_dir, const std::string& out_dir) {
    const ScenarioArtifacts art = build_scenario(cfg);
    fs::create_directories(out_dir);

    std::map<std::string, std::vector<ReplicateMetrics>> by_model;
    std::ofstream metrics_out(out_dir + "/metrics.csv");
    metrics_out << kMetricsHeader;
    std::ofstream roc_out(out_dir + "/roc_points.csv");
    roc_out << "scenario,replicate,model,q,sensitivity_area,specificity_area,"
               "sensitivity_pop,specificity_pop\n";

    for (const auto& model : cfg.models) {
        for (int j = 0; j < cfg.replicates; ++j) {
            const std::string tag = replicate_tag(j);
            const std::string stem = fit_dir + "/fit_" + model + "_" + tag;
            ReplicateMetrics rm;
            rm.replicate = j;
            rm.model = model;
            if (!fs::exists(stem + ".csv")) {
                rm.status = "missing";
            } else {
                try {
                    FitResult fit = io::read_fit_csv(stem + ".csv");
                    if (fs::exists(stem + "_samples.csv")) {
                        fit.samples = io::read_samples_csv(stem + "_samples.csv");
                    }
                    const FitResult cells = model == "bym"
                                                ? expand_to_cells(fit, art.cell_unit)
                                                : std::move(fit);
                    rm = evaluate_cell_fit(art, cells, j, model);
                } catch (const Error& e) {
                    rm.status = std::string("error:") + e.what();
                }
            }
            write_metrics_row(metrics_out, cfg.scenario_id, rm);
            if (rm.ok() && rm.roc_defined) {
                for (std::size_t i = 0; i < rm.roc_area.points.size(); ++i) {
                    roc_out << cfg.scenario_id << ',' << j << ',' << model << ','
                            << io::format_double(rm.roc_area.points[i].q) << ','
                            << io::format_double(rm.roc_area.points[i].sensitivity) << ','
                            << io::format_double(rm.roc_area.points[i].specificity) << ','
                            << io::format_double(rm.roc_pop.points[i].sensitivity) << ','
                            << io::format_double(rm.roc_pop.points[i].specificity) << '\n';
                }
            }
            by_model[model].push_back(std::move(rm));
        }
    }

    write_summary(out_dir + "/summary.csv", cfg.scenario_id, by_model);

    // per-cell coverage probabilities across replicates
    std::ofstream pg_out(out_dir + "/coverage_pg.csv");
    pg_out << "model,cell,p_g\n";
    for (const auto& [model, rows] : by_model) {
        std::vector<std::vector<char>> delta;
        for (const auto& rm : rows) {
            if (rm.ok()) delta.push_back(rm.delta);
        }
        if (delta.empty()) continue;
        const CoverageSummary cov = coverage(delta);
        for (std::size_t g = 0; g < cov.p_g.size(); ++g) {
            pg_out << model << ',' << g << ',' << io::format_double(cov.p_g[g]) << '\n';
        }
    }
}

void run_map_cmd(const ScenarioConfig& cfg, const std::string& fit_csv,
                 const std::string& out_dir) {
    const ScenarioArtifacts art = build_scenario(cfg);
    fs::create_directories(out_dir);
    FitResult fit = io::read_fit_csv(fit_csv);
    if (fit.n_targets != art.grid.size()) {
        if (!art.wants("bym") || fit.n_targets != art.icar.n) {
            throw DomainError("map: fit size matches neither the grid nor the partition");
        }
        fit = expand_to_cells(fit, art.cell_unit);
    }
    const int nrows = art.grid.nrows, ncols = art.grid.ncols;

    std::vector<double> risk(fit.mean_risk.data(), fit.mean_risk.data() + fit.n_targets);
    io::write_pgm(out_dir + "/mean_risk.pgm", risk, nrows, ncols,
                  *std::min_element(risk.begin(), risk.end()),
                  *std::max_element(risk.begin(), risk.end()));

    std::vector<double> exc(fit.n_targets);
    for (int g = 0; g < fit.n_targets; ++g) exc[g] = fit.exceedance(g, 0);
    io::write_pgm(out_dir + "/exceedance.pgm", exc, nrows, ncols, 0.0, 1.0);

    for (double t : cfg.map_thresholds) {
        std::vector<char> mask(fit.n_targets);
        for (int g = 0; g < fit.n_targets; ++g) mask[g] = exc[g] > t ? 1 : 0;
        char buf[40];
        std::snprintf(buf, sizeof buf, "%g", t);
        io::write_pbm(out_dir + "/mask_q" + buf + ".pbm", mask, nrows, ncols);
    }
}

void run_sweep_cmd(const ScenarioConfig& base, const std::string& out_dir, int jobs) {
    const auto scenarios = enumerate_scenarios(base);
    fs::create_directories(out_dir);
    std::ofstream index(out_dir + "/scenarios.csv");
    index << "scenario,shape,r,c,k\n";
    for (const auto& cfg : scenarios) {
        index << cfg.scenario_id << ','
              << (cfg.shape == SurfaceShape::flat
                      ? "flat"
                      : (cfg.shape == SurfaceShape::step ? "step" : "smooth"))
              << ',' << io::format_double(cfg.r) << ',' << io::format_double(cfg.c) << ','
              << io::format_double(cfg.k) << '\n';
    }
    for (const auto& cfg : scenarios) {
        const std::string dir = out_dir + "/" + cfg.scenario_id;
        run_simulate(cfg, dir + "/data");
        run_fit_cmd(cfg, dir + "/data", dir + "/fits", jobs);
        run_evaluate_cmd(cfg, dir + "/data", dir + "/fits", dir + "/metrics");
    }
}

} // namespace riskfield

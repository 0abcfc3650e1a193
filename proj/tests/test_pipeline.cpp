#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "riskfield/config.hpp"
#include "riskfield/io.hpp"
#include "riskfield/pipeline.hpp"

using namespace riskfield;
namespace fs = std::filesystem;

namespace {

// compact configuration used by the pipeline tests
ScenarioConfig tiny_config() {
    ScenarioConfig cfg;
    cfg.scenario_id = "tiny";
    cfg.window = Window(0, 0, 10000, 8000);
    cfg.cell_size = 500;
    cfg.total = 30000;
    cfg.centres = {{{3000, 3000}, 0.6, 1800.0}, {{7000, 5000}, 0.4, 1500.0}};
    cfg.population_seed = 4242;
    cfg.target_units = 8;
    cfg.shape = SurfaceShape::step;
    cfg.c = 5.0;
    cfg.r = 2000.0;
    cfg.k = 5.0;
    cfg.replicates = 2;
    cfg.seed = 99;
    cfg.eval_cell_size = 1000;
    cfg.mesh_spacing = 2000;
    cfg.mesh_extension = 4000;
    cfg.samples = 120;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing round-trips and validates") {
    const auto base = tiny_config();
    const auto parsed = ScenarioConfig::parse_string(base.serialize());
    CHECK(parsed.scenario_id == base.scenario_id);
    CHECK(parsed.total == base.total);
    CHECK(parsed.centres.size() == base.centres.size());
    CHECK(parsed.r == base.r);
    CHECK(parsed.mesh_extension == base.mesh_extension);
    CHECK(parsed.samples == base.samples);
}

TEST_CASE("config errors name the offending field") {
    auto expect_message = [](const std::string& text, const std::string& needle) {
        try {
            ScenarioConfig::parse_string(text);
            FAIL("expected ConfigError for: " << needle);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_message("[surface]\nshape = wedge\n", "surface.shape");
    expect_message("[surface]\nc = 0.5\n", "surface.c");
    expect_message("[population]\ntotal = -5\n", "population.total");
    expect_message("[inference]\nmodels = bym spatialx\n", "inference.models");
    expect_message("[grid]\ncell_size = 0\n", "grid.cell_size");
    expect_message("[mesh]\nspacing = -1\n", "mesh.spacing");
    expect_message("[population]\nbogus = 1\n", "population.bogus");
    expect_message("[simulation]\nreplicates = 0\n", "simulation.replicates");
}

TEST_CASE("the factorial design enumerates exactly 39 scenarios") {
    const auto scenarios = enumerate_scenarios(tiny_config());
    CHECK(scenarios.size() == 39);
    int flat = 0, step = 0, smooth = 0;
    for (const auto& s : scenarios) {
        if (s.shape == SurfaceShape::flat) ++flat;
        if (s.shape == SurfaceShape::step) ++step;
        if (s.shape == SurfaceShape::smooth) ++smooth;
    }
    CHECK(flat == 3);
    CHECK(step == 18);
    CHECK(smooth == 18);
    // ids are unique
    std::set<std::string> ids;
    for (const auto& s : scenarios) ids.insert(s.scenario_id);
    CHECK(ids.size() == 39);
}

TEST_CASE("simulate writes one dataset per replicate plus a manifest") {
    TempDir dir("rf_sim_test");
    auto cfg = tiny_config();
    cfg.replicates = 1;
    cfg.shape = SurfaceShape::flat;
    run_simulate(cfg, dir.str());
    CHECK(fs::exists(dir.path / "dataset_r000.csv"));
    CHECK_FALSE(fs::exists(dir.path / "dataset_r001.csv"));
    CHECK(fs::exists(dir.path / "manifest.txt"));

    // manifest closure: expected cases within 1e-6 of k*n
    const std::string manifest = slurp((dir.path / "manifest.txt").string());
    double expected = -1.0, target = -1.0;
    std::istringstream ss(manifest);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.rfind("expected_cases = ", 0) == 0) expected = std::stod(line.substr(17));
        if (line.rfind("target_cases = ", 0) == 0) target = std::stod(line.substr(15));
    }
    REQUIRE(expected > 0.0);
    REQUIRE(target > 0.0);
    CHECK(std::abs(expected - target) <= 1e-6 * target);
}

TEST_CASE("simulate is byte-identical across reruns") {
    TempDir a("rf_sim_a"), b("rf_sim_b");
    const auto cfg = tiny_config();
    run_simulate(cfg, a.str());
    run_simulate(cfg, b.str());
    for (const auto& entry : fs::directory_iterator(a.path)) {
        const auto other = b.path / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path().string()) == slurp(other.string()));
    }
}

TEST_CASE("dataset csv round-trips through the population raster") {
    const auto cfg = tiny_config();
    const auto art = build_scenario(cfg);
    const auto ds = simulate_dataset(art.surface, art.pop, 5);
    TempDir dir("rf_ds_io");
    const auto path = (dir.path / "d.csv").string();
    io::write_dataset_csv(path, ds);
    const auto back = io::read_dataset_csv(path, art.pop);
    CHECK(back.case_counts == ds.case_counts);
    CHECK(back.total_cases == ds.total_cases);
}

TEST_CASE("empty model list is rejected before fitting") {
    auto cfg = tiny_config();
    cfg.models.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("end-to-end: fit, evaluate, map on a tiny scenario") {
    TempDir dir("rf_e2e");
    auto cfg = tiny_config();
    cfg.replicates = 2;
    const std::string data = dir.str() + "/data";
    const std::string fits = dir.str() + "/fits";
    const std::string metrics = dir.str() + "/metrics";

    run_simulate(cfg, data);
    run_fit_cmd(cfg, data, fits, 2);

    // both models, both replicates
    for (const char* model : {"bym", "lgcp"}) {
        for (int j = 0; j < 2; ++j) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s/fit_%s_r%03d.csv", fits.c_str(), model, j);
            CHECK(fs::exists(buf));
        }
    }
    CHECK(fs::exists(fits + "/diagnostics.jsonl"));
    // diagnostics has one record per fit with a positive runtime
    {
        std::ifstream in(fits + "/diagnostics.jsonl");
        std::string line;
        int records = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            ++records;
            CHECK(line.find("\"runtime_seconds\"") != std::string::npos);
            CHECK(line.find("\"status\":\"ok\"") != std::string::npos);
        }
        CHECK(records == 4);
    }

    run_evaluate_cmd(cfg, data, fits, metrics);
    CHECK(fs::exists(metrics + "/metrics.csv"));
    CHECK(fs::exists(metrics + "/summary.csv"));
    {
        std::ifstream in(metrics + "/metrics.csv");
        std::string line;
        std::getline(in, line); // header
        int rows = 0, ok_rows = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            ++rows;
            if (line.find(",ok,") != std::string::npos) ++ok_rows;
        }
        CHECK(rows == 4);
        CHECK(ok_rows == 4);
    }

    // summary medians match recomputation from the per-replicate rows
    {
        std::ifstream in(metrics + "/metrics.csv");
        std::string line;
        std::getline(in, line);
        std::vector<double> bym_rmise;
        while (std::getline(in, line)) {
            const auto f = io::split(line, ',');
            if (f[2] == "bym" && f[3] == "ok") bym_rmise.push_back(std::stod(f[4]));
        }
        REQUIRE(bym_rmise.size() == 2);
        const double median = 0.5 * (bym_rmise[0] + bym_rmise[1]);
        std::ifstream sin(metrics + "/summary.csv");
        std::getline(sin, line);
        bool found = false;
        while (std::getline(sin, line)) {
            const auto f = io::split(line, ',');
            if (f[1] == "bym" && f[2] == "rmise_log_unit") {
                CHECK(std::stod(f[3]) == doctest::Approx(median).epsilon(1e-12));
                found = true;
            }
        }
        CHECK(found);
    }

    // map emits heatmaps and masks; mask counts match the exceedance column
    const std::string maps = dir.str() + "/maps";
    run_map_cmd(cfg, fits + "/fit_lgcp_r000.csv", maps);
    CHECK(fs::exists(maps + "/mean_risk.pgm"));
    CHECK(fs::exists(maps + "/exceedance.pgm"));
    for (const char* name : {"mask_q0.5.pbm", "mask_q0.8.pbm"}) {
        CHECK(fs::exists(maps + "/" + std::string(name)));
    }
    {
        const auto fit = io::read_fit_csv(fits + "/fit_lgcp_r000.csv");
        int direct = 0;
        for (int g = 0; g < fit.n_targets; ++g) {
            if (fit.exceedance(g, 0) > 0.5) ++direct;
        }
        const std::string pbm = slurp(maps + "/mask_q0.5.pbm");
        int set = 0;
        for (std::size_t i = pbm.find('\n', pbm.find('\n') + 1); i < pbm.size(); ++i) {
            if (pbm[i] == '1') ++set;
        }
        CHECK(set == direct);
    }
}

TEST_CASE("missing fit files appear as explicit gap rows") {
    TempDir dir("rf_gap");
    auto cfg = tiny_config();
    cfg.replicates = 2;
    cfg.models = {"bym"};
    const std::string data = dir.str() + "/data";
    const std::string fits = dir.str() + "/fits";
    run_simulate(cfg, data);
    run_fit_cmd(cfg, data, fits, 1);
    fs::remove(fits + "/fit_bym_r001.csv"); // simulate a lost fit
    run_evaluate_cmd(cfg, data, fits, dir.str() + "/metrics");
    const std::string metrics = slurp(dir.str() + "/metrics/metrics.csv");
    CHECK(metrics.find("1,bym,missing") != std::string::npos);
}

TEST_CASE("fit outputs are byte-identical across reruns") {
    TempDir dir("rf_det");
    auto cfg = tiny_config();
    cfg.replicates = 1;
    cfg.samples = 40;
    const std::string data = dir.str() + "/data";
    run_simulate(cfg, data);
    run_fit_cmd(cfg, data, dir.str() + "/fits_a", 2);
    run_fit_cmd(cfg, data, dir.str() + "/fits_b", 1); // different parallelism
    for (const char* name :
         {"fit_bym_r000.csv", "fit_lgcp_r000.csv", "fit_bym_r000_samples.csv",
          "fit_lgcp_r000_samples.csv", "fit_bym_r000_hyper.csv"}) {
        CHECK(slurp(dir.str() + "/fits_a/" + name) == slurp(dir.str() + "/fits_b/" + name));
    }
}

TEST_CASE("fit result csv round-trip") {
    TempDir dir("rf_fit_io");
    FitResult fit;
    fit.n_targets = 3;
    fit.mean_eta = Eigen::Vector3d(-6.1, -6.2, -6.3);
    fit.sd_eta = Eigen::Vector3d(0.1, 0.2, 0.3);
    fit.mean_risk = Eigen::Vector3d(0.002, 0.002, 0.002);
    fit.lo95_eta = Eigen::Vector3d(-6.4, -6.5, -6.6);
    fit.hi95_eta = Eigen::Vector3d(-5.9, -5.8, -5.7);
    fit.thresholds = {0.0016, 0.005};
    fit.exceedance.resize(3, 2);
    fit.exceedance << 0.9, 0.1, 0.8, 0.2, 0.7, 0.3;
    const auto path = (dir.path / "fit.csv").string();
    io::write_fit_csv(path, fit);
    const auto back = io::read_fit_csv(path);
    CHECK(back.n_targets == 3);
    REQUIRE(back.thresholds.size() == 2);
    CHECK(back.thresholds[0] == doctest::Approx(0.0016));
    CHECK((back.mean_eta - fit.mean_eta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.exceedance - fit.exceedance).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.hi95_eta - fit.hi95_eta).cwiseAbs().maxCoeff() == 0.0);
}

} // TEST_SUITE

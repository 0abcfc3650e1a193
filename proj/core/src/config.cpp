#include "riskfield/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "riskfield/io.hpp"

namespace riskfield {

namespace {

struct IniData {
    // section -> key -> value, plus order for error reporting
    std::map<std::string, std::map<std::string, std::string>> sections;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

IniData parse_ini(const std::string& text) {
    IniData ini;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            ini.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": key outside any [section]");
        }
        ini.sections[section][key] = value;
    }
    return ini;
}

class Reader {
public:
    explicit Reader(const IniData& ini) : ini_(ini) {}

    bool has(const std::string& sec, const std::string& key) const {
        const auto s = ini_.sections.find(sec);
        return s != ini_.sections.end() && s->second.count(key) > 0;
    }
    std::string str(const std::string& sec, const std::string& key,
                    const std::string& fallback) const {
        return has(sec, key) ? ini_.sections.at(sec).at(key) : fallback;
    }
    double num(const std::string& sec, const std::string& key, double fallback) const {
        if (!has(sec, key)) return fallback;
        try {
            return std::stod(ini_.sections.at(sec).at(key));
        } catch (const std::exception&) {
            throw ConfigError(sec + "." + key + ": not a number");
        }
    }
    std::int64_t integer(const std::string& sec, const std::string& key,
                         std::int64_t fallback) const {
        if (!has(sec, key)) return fallback;
        try {
            return std::stoll(ini_.sections.at(sec).at(key));
        } catch (const std::exception&) {
            throw ConfigError(sec + "." + key + ": not an integer");
        }
    }
    std::vector<double> numbers(const std::string& sec, const std::string& key) const {
        std::vector<double> out;
        std::istringstream ss(ini_.sections.at(sec).at(key));
        double v;
        while (ss >> v) out.push_back(v);
        if (!ss.eof()) throw ConfigError(sec + "." + key + ": malformed number list");
        return out;
    }

    void check_known(const std::map<std::string, std::vector<std::string>>& schema) const {
        for (const auto& [sec, keys] : ini_.sections) {
            const auto it = schema.find(sec);
            if (it == schema.end()) throw ConfigError("unknown config section [" + sec + "]");
            for (const auto& [key, value] : keys) {
                (void)value;
                bool known = false;
                for (const auto& k : it->second) {
                    if (k == key) {
                        known = true;
                        break;
                    }
                }
                if (!known) throw ConfigError(sec + "." + key + ": unknown key");
            }
        }
    }

private:
    const IniData& ini_;
};

const std::map<std::string, std::vector<std::string>> kSchema = {
    {"population",
     {"source", "csv_path", "window", "cell_size", "total", "centres", "floor_fraction",
      "seed"}},
    {"partition", {"target_units"}},
    {"surface", {"shape", "c", "r", "k", "n_ref", "circle_centres"}},
    {"simulation", {"replicates", "seed"}},
    {"grid", {"cell_size"}},
    {"mesh", {"spacing", "extension"}},
    {"inference",
     {"models", "samples", "phi_prior", "rho_median", "map_thresholds"}},
    {"evaluation", {"truth_threshold", "exceedance_rate"}},
    {"scenario", {"id"}},
};

} // namespace

void ScenarioConfig::validate() const {
    if (population_source != "synthetic" && population_source != "csv") {
        throw ConfigError("population.source: must be 'synthetic' or 'csv'");
    }
    if (population_source == "csv" && population_csv.empty()) {
        throw ConfigError("population.csv_path: required when source = csv");
    }
    if (cell_size <= 0.0) throw ConfigError("population.cell_size: must be positive");
    if (total <= 0) throw ConfigError("population.total: must be positive");
    if (centres.empty()) throw ConfigError("population.centres: need at least one centre");
    for (const auto& g : centres) {
        if (g.spread <= 0.0) throw ConfigError("population.centres: spreads must be positive");
        if (!window.contains(g.centre)) {
            throw ConfigError("population.centres: centre outside window");
        }
    }
    if (floor_fraction < 0.0 || floor_fraction > 1.0) {
        throw ConfigError("population.floor_fraction: must lie in [0,1]");
    }
    if (target_units < 2) throw ConfigError("partition.target_units: must be at least 2");
    if (shape != SurfaceShape::flat) {
        if (!(c > 1.0)) throw ConfigError("surface.c: must exceed 1");
        if (!(r > 0.0)) throw ConfigError("surface.r: must be positive");
    }
    if (!(k > 0.0)) throw ConfigError("surface.k: must be positive");
    if (!(n_ref > 0.0)) throw ConfigError("surface.n_ref: must be positive");
    if (replicates < 1) throw ConfigError("simulation.replicates: must be at least 1");
    if (eval_cell_size <= 0.0) throw ConfigError("grid.cell_size: must be positive");
    if (mesh_spacing <= 0.0) throw ConfigError("mesh.spacing: must be positive");
    if (models.empty()) throw ConfigError("inference.models: must list at least one model");
    for (const auto& m : models) {
        if (m != "bym" && m != "lgcp") {
            throw ConfigError("inference.models: unknown model '" + m + "'");
        }
    }
    if (samples < 0) throw ConfigError("inference.samples: must be non-negative");
    if (rho_prior_median <= 0.0) throw ConfigError("inference.rho_median: must be positive");
    for (double t : map_thresholds) {
        if (t <= 0.0 || t >= 1.0) {
            throw ConfigError("inference.map_thresholds: values must lie in (0,1)");
        }
    }
}

std::string ScenarioConfig::serialize() const {
    std::ostringstream out;
    out << "[scenario]\nid = " << scenario_id << "\n\n";
    out << "[population]\nsource = " << population_source << "\n";
    if (!population_csv.empty()) out << "csv_path = " << population_csv << "\n";
    out << "window = " << io::format_double(window.xmin) << ' '
        << io::format_double(window.ymin) << ' ' << io::format_double(window.xmax) << ' '
        << io::format_double(window.ymax) << "\n";
    out << "cell_size = " << io::format_double(cell_size) << "\n";
    out << "total = " << total << "\n";
    out << "centres =";
    for (std::size_t i = 0; i < centres.size(); ++i) {
        out << (i ? " ;" : "") << ' ' << io::format_double(centres[i].centre.x) << ' '
            << io::format_double(centres[i].centre.y) << ' '
            << io::format_double(centres[i].weight) << ' '
            << io::format_double(centres[i].spread);
    }
    out << "\nfloor_fraction = " << io::format_double(floor_fraction) << "\n";
    out << "seed = " << population_seed << "\n\n";
    out << "[partition]\ntarget_units = " << target_units << "\n\n";
    out << "[surface]\nshape = "
        << (shape == SurfaceShape::flat ? "flat"
                                        : (shape == SurfaceShape::step ? "step" : "smooth"))
        << "\n";
    out << "c = " << io::format_double(c) << "\nr = " << io::format_double(r)
        << "\nk = " << io::format_double(k) << "\nn_ref = " << io::format_double(n_ref)
        << "\n";
    if (!circle_centres.empty()) {
        out << "circle_centres =";
        for (std::size_t i = 0; i < circle_centres.size(); ++i) {
            out << (i ? " ;" : "") << ' ' << io::format_double(circle_centres[i].x) << ' '
                << io::format_double(circle_centres[i].y);
        }
        out << "\n";
    }
    out << "\n[simulation]\nreplicates = " << replicates << "\nseed = " << seed << "\n\n";
    out << "[grid]\ncell_size = " << io::format_double(eval_cell_size) << "\n\n";
    out << "[mesh]\nspacing = " << io::format_double(mesh_spacing) << "\n";
    if (mesh_extension >= 0.0) out << "extension = " << io::format_double(mesh_extension) << "\n";
    out << "\n[inference]\nmodels =";
    for (const auto& m : models) out << ' ' << m;
    out << "\nsamples = " << samples << "\n";
    out << "phi_prior = " << (phi_prior_uniform ? "uniform" : "pc") << "\n";
    out << "rho_median = " << io::format_double(rho_prior_median) << "\n";
    out << "map_thresholds =";
    for (double t : map_thresholds) out << ' ' << io::format_double(t);
    out << "\n";
    if (truth_threshold >= 0.0 || exceedance_rate >= 0.0) {
        out << "\n[evaluation]\n";
        if (truth_threshold >= 0.0) {
            out << "truth_threshold = " << io::format_double(truth_threshold) << "\n";
        }
        if (exceedance_rate >= 0.0) {
            out << "exceedance_rate = " << io::format_double(exceedance_rate) << "\n";
        }
    }
    return out.str();
}

ScenarioConfig ScenarioConfig::parse_string(const std::string& text) {
    const IniData ini = parse_ini(text);
    const Reader rd(ini);
    rd.check_known(kSchema);

    ScenarioConfig cfg;
    cfg.scenario_id = rd.str("scenario", "id", cfg.scenario_id);
    cfg.population_source = rd.str("population", "source", cfg.population_source);
    cfg.population_csv = rd.str("population", "csv_path", cfg.population_csv);
    if (rd.has("population", "window")) {
        const auto w = rd.numbers("population", "window");
        if (w.size() != 4) throw ConfigError("population.window: expected 4 numbers");
        if (!(w[2] > w[0]) || !(w[3] > w[1])) {
            throw ConfigError("population.window: require xmax > xmin and ymax > ymin");
        }
        cfg.window = Window(w[0], w[1], w[2], w[3]);
    }
    cfg.cell_size = rd.num("population", "cell_size", cfg.cell_size);
    cfg.total = rd.integer("population", "total", cfg.total);
    if (rd.has("population", "centres")) {
        cfg.centres.clear();
        const std::string raw = rd.str("population", "centres", "");
        for (const auto& part : io::split(raw, ';')) {
            std::istringstream ss(part);
            GaussianCentre g;
            if (!(ss >> g.centre.x >> g.centre.y >> g.weight >> g.spread)) {
                throw ConfigError("population.centres: each centre needs x y weight spread");
            }
            cfg.centres.push_back(g);
        }
    }
    cfg.floor_fraction = rd.num("population", "floor_fraction", cfg.floor_fraction);
    cfg.population_seed = static_cast<std::uint64_t>(
        rd.integer("population", "seed", static_cast<std::int64_t>(cfg.population_seed)));

    cfg.target_units =
        static_cast<int>(rd.integer("partition", "target_units", cfg.target_units));

    const std::string shape = rd.str("surface", "shape", "step");
    if (shape == "flat") {
        cfg.shape = SurfaceShape::flat;
    } else if (shape == "step") {
        cfg.shape = SurfaceShape::step;
    } else if (shape == "smooth") {
        cfg.shape = SurfaceShape::smooth;
    } else {
        throw ConfigError("surface.shape: must be flat, step or smooth");
    }
    cfg.c = rd.num("surface", "c", cfg.c);
    cfg.r = rd.num("surface", "r", cfg.r);
    cfg.k = rd.num("surface", "k", cfg.k);
    cfg.n_ref = rd.num("surface", "n_ref", cfg.n_ref);
    if (rd.has("surface", "circle_centres")) {
        cfg.circle_centres.clear();
        for (const auto& part : io::split(rd.str("surface", "circle_centres", ""), ';')) {
            std::istringstream ss(part);
            Point p;
            if (!(ss >> p.x >> p.y)) {
                throw ConfigError("surface.circle_centres: each centre needs x y");
            }
            cfg.circle_centres.push_back(p);
        }
    }

    cfg.replicates = static_cast<int>(rd.integer("simulation", "replicates", cfg.replicates));
    cfg.seed =
        static_cast<std::uint64_t>(rd.integer("simulation", "seed",
                                              static_cast<std::int64_t>(cfg.seed)));
    cfg.eval_cell_size = rd.num("grid", "cell_size", cfg.eval_cell_size);
    cfg.mesh_spacing = rd.num("mesh", "spacing", cfg.mesh_spacing);
    cfg.mesh_extension = rd.num("mesh", "extension", cfg.mesh_extension);

    if (rd.has("inference", "models")) {
        cfg.models.clear();
        std::istringstream ss(rd.str("inference", "models", ""));
        std::string m;
        while (ss >> m) cfg.models.push_back(m);
    }
    cfg.samples = static_cast<int>(rd.integer("inference", "samples", cfg.samples));
    const std::string phi = rd.str("inference", "phi_prior", "pc");
    if (phi == "uniform") {
        cfg.phi_prior_uniform = true;
    } else if (phi == "pc") {
        cfg.phi_prior_uniform = false;
    } else {
        throw ConfigError("inference.phi_prior: must be 'pc' or 'uniform'");
    }
    cfg.rho_prior_median = rd.num("inference", "rho_median", cfg.rho_prior_median);
    if (rd.has("inference", "map_thresholds")) {
        cfg.map_thresholds = rd.numbers("inference", "map_thresholds");
    }
    cfg.truth_threshold = rd.num("evaluation", "truth_threshold", cfg.truth_threshold);
    cfg.exceedance_rate = rd.num("evaluation", "exceedance_rate", cfg.exceedance_rate);

    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

std::vector<ScenarioConfig> enumerate_scenarios(const ScenarioConfig& base,
                                                const std::vector<double>& radii,
                                                const std::vector<double>& ratios,
                                                const std::vector<double>& multipliers) {
    std::vector<ScenarioConfig> out;
    auto id_num = [](double v) {
        std::ostringstream ss;
        ss << v;
        return ss.str();
    };
    for (double k : multipliers) {
        ScenarioConfig cfg = base;
        cfg.shape = SurfaceShape::flat;
        cfg.k = k;
        cfg.scenario_id = "flat_k" + id_num(k);
        out.push_back(cfg);
    }
    for (const char* shape : {"step", "smooth"}) {
        for (double r : radii) {
            for (double c : ratios) {
                for (double k : multipliers) {
                    ScenarioConfig cfg = base;
                    cfg.shape = std::string(shape) == "step" ? SurfaceShape::step
                                                             : SurfaceShape::smooth;
                    cfg.r = r;
                    cfg.c = c;
                    cfg.k = k;
                    cfg.scenario_id = std::string(shape) + "_r" + id_num(r) + "_c" +
                                      id_num(c) + "_k" + id_num(k);
                    out.push_back(cfg);
                }
            }
        }
    }
    return out;
}

} // namespace riskfield

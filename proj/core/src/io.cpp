#include "riskfield/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace riskfield::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path);
    return in;
}

} // namespace

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    return out;
}

void write_dataset_csv(const std::string& path, const Dataset& ds) {
    auto out = open_out(path);
    out << "cell_row,cell_col,cases\n";
    for (int r = 0; r < ds.nrows; ++r) {
        for (int c = 0; c < ds.ncols; ++c) {
            const auto v = ds.at(r, c);
            if (v != 0) out << r << ',' << c << ',' << v << '\n';
        }
    }
}

Dataset read_dataset_csv(const std::string& path, const PopulationGrid& pop) {
    auto in = open_in(path);
    Dataset ds;
    ds.nrows = pop.nrows;
    ds.ncols = pop.ncols;
    ds.case_counts.assign(pop.counts.size(), 0);
    std::string line;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || row_no == 1) continue; // header
        const auto f = split(line, ',');
        if (f.size() != 3) {
            throw ParseError("dataset csv row " + std::to_string(row_no) +
                             ": expected cell_row,cell_col,cases");
        }
        const int r = std::stoi(f[0]);
        const int c = std::stoi(f[1]);
        const std::int64_t v = std::stoll(f[2]);
        if (r < 0 || r >= ds.nrows || c < 0 || c >= ds.ncols || v < 0) {
            throw ParseError("dataset csv row " + std::to_string(row_no) +
                             ": cell outside raster or negative count");
        }
        ds.case_counts[static_cast<std::size_t>(r) * ds.ncols + c] = v;
        ds.total_cases += v;
    }
    return ds;
}

void write_partition_csv(const std::string& path, const ArealPartition& part) {
    auto out = open_out(path);
    out << "cell_row,cell_col,unit_id\n";
    for (int r = 0; r < part.nrows; ++r) {
        for (int c = 0; c < part.ncols; ++c) {
            const int u = part.unit_at(r, c);
            if (u >= 0) out << r << ',' << c << ',' << u << '\n';
        }
    }
}

void write_mesh_csv(const std::string& node_path, const std::string& triangle_path,
                    const Mesh& mesh) {
    {
        auto out = open_out(node_path);
        out << "node_id,x,y,interior\n";
        for (int i = 0; i < mesh.node_count(); ++i) {
            out << i << ',' << format_double(mesh.nodes[i].x) << ','
                << format_double(mesh.nodes[i].y) << ',' << (mesh.interior[i] ? 1 : 0)
                << '\n';
        }
    }
    auto out = open_out(triangle_path);
    out << "triangle_id,node0,node1,node2\n";
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        out << t << ',' << mesh.triangles[t][0] << ',' << mesh.triangles[t][1] << ','
            << mesh.triangles[t][2] << '\n';
    }
}

void write_fit_csv(const std::string& path, const FitResult& fit) {
    auto out = open_out(path);
    out << "target_id,mean_eta,sd_eta,mean_risk";
    for (double t : fit.thresholds) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%g", t);
        out << ",exc_p@" << buf;
    }
    out << ",lo95_eta,hi95_eta\n";
    for (int g = 0; g < fit.n_targets; ++g) {
        out << g << ',' << format_double(fit.mean_eta[g]) << ','
            << format_double(fit.sd_eta[g]) << ',' << format_double(fit.mean_risk[g]);
        for (int t = 0; t < fit.exceedance.cols(); ++t) {
            out << ',' << format_double(fit.exceedance(g, t));
        }
        out << ',' << format_double(fit.lo95_eta[g]) << ','
            << format_double(fit.hi95_eta[g]) << '\n';
    }
}

FitResult read_fit_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("fit csv: empty file " + path);
    const auto header = split(line, ',');
    if (header.size() < 6 || header[0] != "target_id") {
        throw ParseError("fit csv: unexpected header in " + path);
    }
    FitResult fit;
    for (const auto& h : header) {
        if (h.rfind("exc_p@", 0) == 0) fit.thresholds.push_back(std::stod(h.substr(6)));
    }
    const std::size_t n_thr = fit.thresholds.size();
    std::vector<std::array<double, 6>> core;
    std::vector<std::vector<double>> exc;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6 + n_thr) throw ParseError("fit csv: bad row in " + path);
        std::array<double, 6> row{};
        row[0] = std::stod(f[1]); // mean_eta
        row[1] = std::stod(f[2]); // sd_eta
        row[2] = std::stod(f[3]); // mean_risk
        row[3] = std::stod(f[4 + n_thr]); // lo95
        row[4] = std::stod(f[5 + n_thr]); // hi95
        core.push_back(row);
        std::vector<double> e(n_thr);
        for (std::size_t t = 0; t < n_thr; ++t) e[t] = std::stod(f[4 + t]);
        exc.push_back(std::move(e));
    }
    const int n = static_cast<int>(core.size());
    fit.n_targets = n;
    fit.mean_eta.resize(n);
    fit.sd_eta.resize(n);
    fit.mean_risk.resize(n);
    fit.lo95_eta.resize(n);
    fit.hi95_eta.resize(n);
    fit.exceedance.resize(n, static_cast<int>(n_thr));
    for (int g = 0; g < n; ++g) {
        fit.mean_eta[g] = core[g][0];
        fit.sd_eta[g] = core[g][1];
        fit.mean_risk[g] = core[g][2];
        fit.lo95_eta[g] = core[g][3];
        fit.hi95_eta[g] = core[g][4];
        for (std::size_t t = 0; t < n_thr; ++t) {
            fit.exceedance(g, static_cast<int>(t)) = exc[g][t];
        }
    }
    return fit;
}

void write_hyper_csv(const std::string& path, const FitResult& fit) {
    auto out = open_out(path);
    out << "name,mode,mean,sd\n";
    for (std::size_t i = 0; i < fit.hyper_names.size(); ++i) {
        out << fit.hyper_names[i] << ',' << format_double(fit.hyper_mode[i]) << ','
            << format_double(fit.hyper_mean[i]) << ',' << format_double(fit.hyper_sd[i])
            << '\n';
    }
}

void write_samples_csv(const std::string& path, const Eigen::MatrixXd& samples) {
    auto out = open_out(path);
    out << "draw";
    for (int g = 0; g < samples.cols(); ++g) out << ",s" << g;
    out << '\n';
    for (int d = 0; d < samples.rows(); ++d) {
        out << d;
        for (int g = 0; g < samples.cols(); ++g) out << ',' << format_double(samples(d, g));
        out << '\n';
    }
}

Eigen::MatrixXd read_samples_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("samples csv: empty file " + path);
    const std::size_t n_cols = split(line, ',').size() - 1;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != n_cols + 1) throw ParseError("samples csv: bad row in " + path);
        std::vector<double> r(n_cols);
        for (std::size_t i = 0; i < n_cols; ++i) r[i] = std::stod(f[i + 1]);
        rows.push_back(std::move(r));
    }
    Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(n_cols));
    for (std::size_t d = 0; d < rows.size(); ++d) {
        for (std::size_t g = 0; g < n_cols; ++g) {
            m(static_cast<int>(d), static_cast<int>(g)) = rows[d][g];
        }
    }
    return m;
}

void write_pgm(const std::string& path, const std::vector<double>& values, int nrows,
               int ncols, double vmin, double vmax) {
    if (static_cast<int>(values.size()) != nrows * ncols) {
        throw DomainError("write_pgm: value count does not match raster");
    }
    auto out = open_out(path);
    out << "P2\n" << ncols << ' ' << nrows << "\n255\n";
    const double span = vmax - vmin;
    for (int r = nrows - 1; r >= 0; --r) { // top row first
        for (int c = 0; c < ncols; ++c) {
            int level = 0;
            if (span > 0.0) {
                const double v = values[static_cast<std::size_t>(r) * ncols + c];
                level = static_cast<int>(std::lround(255.0 * (v - vmin) / span));
                level = std::clamp(level, 0, 255);
            }
            out << level << (c + 1 == ncols ? '\n' : ' ');
        }
    }
}

void write_pbm(const std::string& path, const std::vector<char>& mask, int nrows,
               int ncols) {
    if (static_cast<int>(mask.size()) != nrows * ncols) {
        throw DomainError("write_pbm: mask size does not match raster");
    }
    auto out = open_out(path);
    out << "P1\n" << ncols << ' ' << nrows << '\n';
    for (int r = nrows - 1; r >= 0; --r) {
        for (int c = 0; c < ncols; ++c) {
            out << (mask[static_cast<std::size_t>(r) * ncols + c] ? 1 : 0)
                << (c + 1 == ncols ? '\n' : ' ');
        }
    }
}

} // namespace riskfield::io

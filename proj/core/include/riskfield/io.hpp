#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "riskfield/dataset.hpp"
#include "riskfield/lgm.hpp"
#include "riskfield/population.hpp"
#include "riskfield/spde.hpp"

namespace riskfield::io {

/// Round-trip-exact decimal rendering (%.17g); all CSV output goes through
/// this so identical runs produce byte-identical files.
std::string format_double(double v);

void write_dataset_csv(const std::string& path, const Dataset& ds);
Dataset read_dataset_csv(const std::string& path, const PopulationGrid& pop);

void write_partition_csv(const std::string& path, const ArealPartition& part);

void write_mesh_csv(const std::string& node_path, const std::string& triangle_path,
                    const Mesh& mesh);

/// `target_id,mean_eta,sd_eta,mean_risk,exc_p@<t>...,lo95_eta,hi95_eta`
void write_fit_csv(const std::string& path, const FitResult& fit);
FitResult read_fit_csv(const std::string& path);

/// `name,mode,mean,sd` per hyperparameter.
void write_hyper_csv(const std::string& path, const FitResult& fit);

/// Posterior draws, one row per draw, `s<k>` columns per target.
void write_samples_csv(const std::string& path, const Eigen::MatrixXd& samples);
Eigen::MatrixXd read_samples_csv(const std::string& path);

/// ASCII portable graymap (P2), values linearly mapped onto 0..255 over
/// [vmin, vmax]; rows written top-to-bottom as image convention expects.
void write_pgm(const std::string& path, const std::vector<double>& values, int nrows,
               int ncols, double vmin, double vmax);

/// ASCII portable bitmap (P1); nonzero mask entries are set pixels.
void write_pbm(const std::string& path, const std::vector<char>& mask, int nrows,
               int ncols);

std::vector<std::string> split(const std::string& line, char sep);

} // namespace riskfield::io

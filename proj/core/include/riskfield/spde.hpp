#pragma once

#include <Eigen/Sparse>
#include <array>
#include <span>
#include <vector>

#include "riskfield/geometry.hpp"
#include "riskfield/sparse.hpp"

namespace riskfield {

/// Conforming triangulation covering the window plus a boundary extension.
struct Mesh {
    std::vector<Point> nodes;
    std::vector<std::array<int, 3>> triangles; // CCW node triples
    std::vector<bool> interior;                // node inside the original window
    Window window;                             // un-extended window
    double extension = 0.0;
    // lattice bookkeeping used for O(1) point location
    double x0 = 0.0, y0 = 0.0, dx = 0.0, dy = 0.0;
    int nx = 0, ny = 0; // node counts per axis

    int node_count() const { return static_cast<int>(nodes.size()); }
};

/// Regular triangular lattice at `spacing` over the window extended by
/// `extension` on every side; each lattice square is split along the
/// bottom-left/top-right diagonal.
Mesh build_mesh(const Window& window, double spacing, double extension);

/// Default boundary extension: half the window diameter (a stand-in for the
/// prior median range scaled to the analysis window).
double default_mesh_extension(const Window& window);

/// Linear-element matrices: lumped (diagonal) mass C and stiffness G.
struct FemMatrices {
    Eigen::VectorXd c_lumped;  // diag of C; sums to the mesh area
    SparseSymMatrix stiffness; // G, row sums exactly zero
    double mesh_area = 0.0;
};

FemMatrices assemble_fem(const Mesh& mesh);

/// Matern(nu = 1) hyperparameters: range rho (correlation ~ 0.1 at distance
/// rho) and marginal standard deviation sigma.
struct MaternHyper {
    double rho = 0.0;
    double sigma = 0.0;
};

/// Q = tau_s^2 (kappa^4 C + 2 kappa^2 G + G C^{-1} G) with kappa = sqrt(8)/rho
/// and tau_s^2 = 1 / (4 pi kappa^2 sigma^2); sparse SPD.
SparseSymMatrix spde_precision(const FemMatrices& fem, const MaternHyper& hyper);

/// Closed-form Matern nu=1 covariance sigma^2 (kappa h) K_1(kappa h).
double matern_covariance(double h, const MaternHyper& hyper);

/// Barycentric interpolation weights from mesh nodes to arbitrary points;
/// each row is a convex combination with at most 3 nonzeros.
struct Projector {
    Eigen::SparseMatrix<double> a; // points x nodes
};

Projector make_projector(const Mesh& mesh, std::span<const Point> points);

/// Joint PC prior on (rho, sigma):
/// pi(rho, sigma) = lam_r rho^{-2} exp(-lam_r/rho) * lam_s exp(-lam_s sigma).
struct PcPriorRangeSigma {
    double lambda_rho = 0.0;
    double lambda_sigma = 0.0;
    double log_density(double rho, double sigma) const;
};

/// Calibration: Pr(rho < rho0) = alpha_rho, Pr(sigma > sigma0) = alpha_sigma.
PcPriorRangeSigma make_pc_prior_range_sigma(double rho0 = 30000.0, double alpha_rho = 0.5,
                                            double sigma0 = 1.0, double alpha_sigma = 0.01);

/// Joint log prior at the default calibration.
double pc_log_prior_range_sigma(const MaternHyper& hyper);

} // namespace riskfield

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "riskfield/bym.hpp"
#include "riskfield/dataset.hpp"
#include "riskfield/population.hpp"
#include "riskfield/sparse.hpp"
#include "riskfield/spde.hpp"

namespace riskfield {

enum class ObsFamily { poisson, gaussian };

/// Count observations with exposure offsets. Rows with offset = 0 carry no
/// information and are excluded from the likelihood. The gaussian family is
/// used by conjugate-exactness checks (y_i ~ N(eta_i, gauss_sd_i^2)).
struct PoissonObs {
    Eigen::VectorXd y;
    Eigen::VectorXd offset; // E_i >= 0
    ObsFamily family = ObsFamily::poisson;
    Eigen::VectorXd gauss_sd;
};

/// Everything the engine needs at one hyperparameter point.
struct ModelAtTheta {
    SparseSymMatrix prior_precision;    // over the latent vector (incl. beta0)
    ConstraintSet constraints;          // A x = 0 (k rows, possibly 0)
    Eigen::SparseMatrix<double> design; // obs x latent, eta = design * x
    double prior_logdet_c = 0.0;        // constrained log-determinant of the prior
};

/// Generic latent Gaussian model over transformed hyperparameters theta.
struct LatentModel {
    int latent_dim = 0;
    int hyper_dim = 0;
    std::function<ModelAtTheta(const Eigen::VectorXd&)> build;
    std::function<double(const Eigen::VectorXd&)> log_prior_theta; // incl. Jacobian
    std::function<Eigen::SparseMatrix<double>(const Eigen::VectorXd&)> targets;
    int target_count = 0;
    Eigen::VectorXd box_lo, box_hi; // search box in transformed coordinates
    std::vector<std::string> hyper_names;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> to_natural;
};

struct GaussianApprox {
    Eigen::VectorXd mode;
    CholeskyFactor factor; // of Q_G = Q_prior + A^T D A at the mode
    double log_lik = 0.0;  // log pi(y | mode), all constants included
    double prior_quad = 0.0;
    int newton_iters = 0;
    // constraint helpers: W = Q_G^{-1} A^T and S = A Q_G^{-1} A^T
    Eigen::MatrixXd w;
    Eigen::MatrixXd s;
};

/// Newton maximization of log pi(y|x) + log pi(x|theta) with the constraint
/// re-imposed by conditioning each step. Throws FitError after 100 iterations.
GaussianApprox gaussian_approx(const ModelAtTheta& model, const PoissonObs& obs,
                               const Eigen::VectorXd& theta,
                               const Eigen::VectorXd* warm_start = nullptr);

/// Laplace approximation of log pi(y | theta).
double laplace_log_marginal(const ModelAtTheta& model, const PoissonObs& obs,
                            const GaussianApprox& ga);
double laplace_log_marginal(const LatentModel& model, const PoissonObs& obs,
                            const Eigen::VectorXd& theta);

struct FitDiagnostics {
    bool converged = true;
    int newton_iterations = 0;
    int objective_evaluations = 0;
    int grid_size = 0;
    bool hessian_fallback = false;
    bool box_clipped = false;
    int variance_fallback_solves = 0;
    double runtime_seconds = 0.0;
};

/// Derivative-free (Nelder-Mead) maximization of the Laplace log posterior of
/// theta over the model's box; tolerance 1e-4 in transformed coordinates.
Eigen::VectorXd optimize_hyper(const LatentModel& model, const PoissonObs& obs,
                               const Eigen::VectorXd& theta_init,
                               FitDiagnostics* diag = nullptr);

struct HyperGridPoint {
    Eigen::VectorXd theta;
    double log_post = 0.0;
    double weight = 0.0;
};

struct HyperGrid {
    std::vector<HyperGridPoint> points;
    bool hessian_fallback = false;
};

/// 5-per-dimension grid in transformed theta centred at the mode, spaced one
/// posterior standard deviation per step (finite-difference Hessian); points
/// below 1e-3 of the maximum weight are dropped and weights renormalized.
HyperGrid explore_grid(const LatentModel& model, const PoissonObs& obs,
                       const Eigen::VectorXd& theta_mode, FitDiagnostics* diag = nullptr);

struct FitResult {
    int n_targets = 0;
    Eigen::VectorXd mean_eta, sd_eta;
    Eigen::VectorXd lo95_eta, hi95_eta; // central 95% interval on the eta scale
    Eigen::VectorXd mean_risk;          // E[exp(eta)]
    std::vector<double> thresholds;     // risk-scale exceedance thresholds
    Eigen::MatrixXd exceedance;         // targets x thresholds
    Eigen::MatrixXd samples;            // n_samples x targets (0 rows when disabled)
    Eigen::VectorXd hyper_mode, hyper_mean, hyper_sd; // natural scale
    std::vector<std::string> hyper_names;
    FitDiagnostics diag;
};

/// Mixture-of-Gaussians posterior marginals of the target predictors plus
/// exceedance probabilities and (optionally) joint posterior samples.
FitResult predictor_marginals(const LatentModel& model, const PoissonObs& obs,
                              const HyperGrid& grid,
                              const std::vector<double>& thresholds, int n_samples,
                              std::uint64_t seed, FitDiagnostics diag = {});

struct FitOptions {
    std::vector<double> thresholds; // risk scale
    int n_samples = 500;
    std::uint64_t seed = 1;
    bool phi_prior_uniform = false;
    double rho_prior_median = 30000.0;
    double beta0_precision = 1e-6;
};

/// BYM2 fit on unit-level counts: targets are the N unit predictors.
FitResult fit_bym(const UnitCounts& counts, const IcarStructure& icar,
                  const FitOptions& options);
LatentModel bym_latent_model(const UnitCounts& counts, const IcarStructure& icar,
                             const FitOptions& options);

/// LGCP fit on evaluation-grid counts: targets are all grid-cell predictors.
FitResult fit_lgcp(const GridCounts& counts, const EvalGrid& grid, const Mesh& mesh,
                   const FemMatrices& fem, const FitOptions& options);
LatentModel lgcp_latent_model(const GridCounts& counts, const EvalGrid& grid,
                              const Mesh& mesh, const FemMatrices& fem,
                              const FitOptions& options);

/// Runs optimize -> explore -> marginals with per-stage diagnostics.
FitResult run_fit(const LatentModel& model, const PoissonObs& obs,
                  const Eigen::VectorXd& theta_init, const FitOptions& options);

} // namespace riskfield

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "riskfield/population.hpp"
#include "riskfield/sparse.hpp"

namespace riskfield {

/// Scaled intrinsic CAR structure over a connected graph. Q_icar = D - W has
/// rank N-1; Q_star = scale_factor * Q_icar so the sum-to-zero-constrained
/// field has geometric-mean marginal variance 1.
struct IcarStructure {
    int n = 0;
    SparseSymMatrix q_icar;
    double scale_factor = 0.0;
    SparseSymMatrix q_star;
    ConstraintSet sum_to_zero;
    Eigen::VectorXd marginal_variance; // of the scaled constrained field
    Eigen::VectorXd ginv_eigenvalues;  // eigenvalues of the scaled generalized inverse,
                                       // ascending, first entry 0 (null direction)
    double logdet_plus = 0.0;          // pseudo log-determinant of q_star
};

IcarStructure icar_precision(const AdjacencyGraph& graph);

struct BymHyper {
    double tau = 1.0; // marginal precision, > 0
    double phi = 0.5; // mixing parameter in [0, 1]
};

/// Joint precision over the stacked latent (v, u*) plus the combination
/// weights of the linear predictor (1/sqrt(tau)) (sqrt(1-phi) v + sqrt(phi) u*).
struct Bym2Structure {
    SparseSymMatrix precision; // blockdiag(I_N, Q_star); constraint carried separately
    ConstraintSet constraints; // sum-to-zero over the u* block
    double v_weight = 0.0;
    double u_weight = 0.0;
};

Bym2Structure bym2_precision(const IcarStructure& s, const BymHyper& h);

/// PC prior for the marginal precision tau: exponential on sigma = 1/sqrt(tau)
/// with rate calibrated by Pr(sigma > sigma0) = alpha.
struct PcPriorTau {
    double rate = 0.0;
    double log_density(double tau) const;
};

PcPriorTau make_pc_prior_tau(double sigma0 = 1.0, double alpha = 0.01);
double pc_log_prior_tau(double tau);

/// PC prior for the BYM2 mixing parameter, computed numerically from the KLD
/// distance of the mixing-phi latent covariance from the base model phi = 0
/// and tabulated on a regular grid over (0, 1).
class PcPriorPhi {
public:
    /// Calibrates the exponential rate by bisection so that the phi-median
    /// equals `median`.
    explicit PcPriorPhi(const IcarStructure& s, double median = 0.5, int grid_size = 512);

    double log_density(double phi) const;
    double cdf(double phi) const;
    double distance(double phi) const;
    double rate() const { return rate_; }

private:
    std::vector<double> phi_, dist_, logdens_, cdf_;
    double rate_ = 0.0;
};

/// One-shot evaluation; builds the tabulated prior for the given structure.
/// Prefer holding a PcPriorPhi when evaluating repeatedly.
double pc_log_prior_phi(double phi, const IcarStructure& s);

} // namespace riskfield

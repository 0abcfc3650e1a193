#include "riskfield/bym.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace riskfield {

IcarStructure icar_precision(const AdjacencyGraph& graph) {
    const int n = graph.n;
    if (n < 1) throw ConfigError("icar_precision: empty graph");
    if (n == 1) {
        // single-unit degenerate case: the constraint pins u* to zero, so the
        // structured block contributes nothing; unit placeholder precision
        IcarStructure s;
        s.n = 1;
        s.q_icar = SparseSymMatrix::from_triplets(1, {{0, 0, 0.0}});
        s.scale_factor = 1.0;
        s.q_star = SparseSymMatrix::identity(1);
        s.sum_to_zero = ConstraintSet::sum_to_zero(1, 0, 1);
        s.marginal_variance = Eigen::VectorXd::Zero(1);
        s.ginv_eigenvalues = Eigen::VectorXd::Zero(1);
        s.logdet_plus = 0.0;
        return s;
    }

    std::vector<Eigen::Triplet<double>> ts;
    for (int i = 0; i < n; ++i) {
        ts.emplace_back(i, i, static_cast<double>(graph.degree(i)));
        for (int j : graph.neighbours[i]) {
            if (j < i) ts.emplace_back(i, j, -1.0);
        }
    }
    IcarStructure s;
    s.n = n;
    s.q_icar = SparseSymMatrix::from_triplets(n, ts);

    // Constrained marginal variances via dense eigendecomposition (desk-scale N).
    Eigen::MatrixXd q = Eigen::MatrixXd(s.q_icar.full());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
    const Eigen::VectorXd& evals = eig.eigenvalues(); // ascending
    const Eigen::MatrixXd& evecs = eig.eigenvectors();
    const double tol = 1e-9 * std::max(1.0, evals[n - 1]);
    if (evals[0] < -tol || evals[1] <= tol) {
        throw DomainError("icar_precision: graph must be connected (rank N-1)");
    }

    Eigen::VectorXd marg = Eigen::VectorXd::Zero(n); // diag of the generalized inverse
    for (int l = 1; l < n; ++l) {
        marg += evecs.col(l).cwiseAbs2() / evals[l];
    }
    double log_sum = 0.0;
    for (int i = 0; i < n; ++i) log_sum += std::log(marg[i]);
    s.scale_factor = std::exp(log_sum / n); // geometric mean of marginal variances

    s.q_star = s.q_icar.scaled(s.scale_factor);
    s.sum_to_zero = ConstraintSet::sum_to_zero(n, 0, n);
    s.marginal_variance = marg / s.scale_factor;

    s.ginv_eigenvalues.resize(n);
    s.ginv_eigenvalues[0] = 0.0;
    s.logdet_plus = 0.0;
    for (int l = 1; l < n; ++l) {
        const double lam_star = s.scale_factor * evals[l];
        s.logdet_plus += std::log(lam_star);
        s.ginv_eigenvalues[l] = 1.0 / lam_star;
    }
    std::sort(s.ginv_eigenvalues.data(), s.ginv_eigenvalues.data() + n);
    return s;
}

Bym2Structure bym2_precision(const IcarStructure& s, const BymHyper& h) {
    if (!(h.tau > 0.0)) throw ConfigError("bym2_precision: tau must be positive");
    if (h.phi < 0.0 || h.phi > 1.0) throw ConfigError("bym2_precision: phi must lie in [0,1]");

    const int n = s.n;
    std::vector<Eigen::Triplet<double>> ts;
    for (int i = 0; i < n; ++i) ts.emplace_back(i, i, 1.0); // v block
    for (int k = 0; k < s.q_star.lower().outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(s.q_star.lower(), k); it; ++it) {
            ts.emplace_back(n + static_cast<int>(it.row()), n + static_cast<int>(it.col()),
                            it.value());
        }
    }
    Bym2Structure out;
    out.precision = SparseSymMatrix::from_triplets(2 * n, ts);
    out.constraints = ConstraintSet::sum_to_zero(2 * n, n, 2 * n);
    const double inv_sqrt_tau = 1.0 / std::sqrt(h.tau);
    out.v_weight = inv_sqrt_tau * std::sqrt(1.0 - h.phi);
    out.u_weight = inv_sqrt_tau * std::sqrt(h.phi);
    return out;
}

double PcPriorTau::log_density(double tau) const {
    if (!(tau > 0.0)) throw DomainError("pc_log_prior_tau: tau must be positive");
    // exponential(rate) on sigma = tau^{-1/2}, transformed to the tau scale
    return std::log(rate / 2.0) - 1.5 * std::log(tau) - rate / std::sqrt(tau);
}

PcPriorTau make_pc_prior_tau(double sigma0, double alpha) {
    if (sigma0 <= 0.0 || alpha <= 0.0 || alpha >= 1.0) {
        throw ConfigError("pc prior tau: need sigma0 > 0, alpha in (0,1)");
    }
    return {-std::log(alpha) / sigma0};
}

double pc_log_prior_tau(double tau) { return make_pc_prior_tau().log_density(tau); }

namespace {

double interp_local(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t b = it - xs.begin();
    const double t = (x - xs[b - 1]) / (xs[b] - xs[b - 1]);
    return (1.0 - t) * ys[b - 1] + t * ys[b];
}

} // namespace

PcPriorPhi::PcPriorPhi(const IcarStructure& s, double median, int grid_size) {
    const int n = s.n;
    const Eigen::VectorXd& gamma = s.ginv_eigenvalues;

    // KLD of N(0, (1-phi) I + phi Sigma*) from the base N(0, I), through the
    // eigenvalues of the scaled generalized inverse Sigma*.
    auto kld = [&](double phi) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double e = 1.0 - phi + phi * gamma[i];
            acc += e - 1.0 - std::log(e);
        }
        return 0.5 * acc;
    };

    // knots concentrated at both endpoints (the density spikes near phi = 1
    // where the distance diverges); support truncated to [eps, 1 - eps]
    const double eps = 1e-6;
    phi_.resize(grid_size);
    dist_.resize(grid_size);
    for (int m = 0; m < grid_size; ++m) {
        const double u = static_cast<double>(m) / (grid_size - 1);
        const double t = std::sin(0.5 * std::numbers::pi * u);
        phi_[m] = eps + (1.0 - 2.0 * eps) * t * t;
        dist_[m] = std::sqrt(2.0 * kld(phi_[m]));
    }

    // exponential density on the distance; the mass between knots is exact
    // for the exponential, which makes the knot-wise CDF exact as well
    auto cdf_table = [&](double rate, std::vector<double>& cdf_out) {
        cdf_out.resize(phi_.size());
        double acc = std::exp(-rate * 0.0) - std::exp(-rate * dist_.front());
        cdf_out[0] = acc;
        for (std::size_t m = 1; m < phi_.size(); ++m) {
            acc += std::exp(-rate * dist_[m - 1]) - std::exp(-rate * dist_[m]);
            cdf_out[m] = acc;
        }
        const double total = acc;
        for (auto& v : cdf_out) v /= total;
        return total;
    };

    auto cdf_at_half = [&](double rate) {
        std::vector<double> table;
        cdf_table(rate, table);
        return interp_local(phi_, table, 0.5);
    };

    double lo = 1e-8, hi = 1e8;
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (cdf_at_half(mid) < median) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rate_ = std::sqrt(lo * hi);

    const double total_mass = cdf_table(rate_, cdf_);
    logdens_.resize(grid_size);
    for (int m = 0; m < grid_size; ++m) {
        // d'(phi) from one-sided/central differences on the table
        const int a = std::max(0, m - 1), b = std::min(grid_size - 1, m + 1);
        const double dprime = (dist_[b] - dist_[a]) / (phi_[b] - phi_[a]);
        logdens_[m] = std::log(rate_) - rate_ * dist_[m] +
                      std::log(std::max(dprime, 1e-300)) - std::log(total_mass);
    }
    // renormalize so the piecewise-exponential interpolant integrates to one
    double z = 0.0;
    for (int m = 1; m < grid_size; ++m) {
        const double a = logdens_[m - 1], b = logdens_[m];
        const double w = phi_[m] - phi_[m - 1];
        z += std::abs(b - a) < 1e-12 ? w * std::exp(a)
                                     : w * (std::exp(b) - std::exp(a)) / (b - a);
    }
    for (auto& v : logdens_) v -= std::log(z);
}

double PcPriorPhi::log_density(double phi) const {
    if (phi <= 0.0 || phi >= 1.0) throw DomainError("pc_log_prior_phi: phi must lie in (0,1)");
    return interp_local(phi_, logdens_, phi);
}

double PcPriorPhi::cdf(double phi) const {
    if (phi <= 0.0) return 0.0;
    if (phi >= 1.0) return 1.0;
    return interp_local(phi_, cdf_, phi);
}

double PcPriorPhi::distance(double phi) const {
    if (phi < 0.0 || phi > 1.0) throw DomainError("pc prior phi distance: phi outside [0,1]");
    if (phi == 0.0) return 0.0;
    return interp_local(phi_, dist_, phi);
}

double pc_log_prior_phi(double phi, const IcarStructure& s) {
    return PcPriorPhi(s).log_density(phi);
}

} // namespace riskfield

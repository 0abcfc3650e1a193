#include "riskfield/lgm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>

namespace riskfield {

namespace {

constexpr double kNewtonGradTol = 1e-6;
constexpr double kNewtonStepTol = 1e-8;
constexpr int kNewtonMaxIter = 100;
constexpr int kMaxHalvings = 30;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_ccdf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

struct ActiveObs {
    Eigen::VectorXd y, e, sd;
    Eigen::SparseMatrix<double> design; // active rows only
    ObsFamily family;
};

ActiveObs filter_rows(const ModelAtTheta& model, const PoissonObs& obs) {
    const auto m = obs.y.size();
    if (obs.offset.size() != m || model.design.rows() != m) {
        throw DomainError("lgm: observation/design dimension mismatch");
    }
    std::vector<int> keep;
    keep.reserve(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (obs.y[i] < 0.0) throw DomainError("lgm: negative count");
        if (obs.offset[i] < 0.0) throw DomainError("lgm: negative offset");
        if (obs.family == ObsFamily::gaussian || obs.offset[i] > 0.0) {
            keep.push_back(static_cast<int>(i));
        }
    }
    ActiveObs act;
    act.family = obs.family;
    const int ma = static_cast<int>(keep.size());
    act.y.resize(ma);
    act.e.resize(ma);
    if (obs.family == ObsFamily::gaussian) {
        if (obs.gauss_sd.size() != m) throw DomainError("lgm: gauss_sd size mismatch");
        act.sd.resize(ma);
    }
    std::vector<Eigen::Triplet<double>> ts;
    for (int r = 0; r < ma; ++r) {
        const int i = keep[r];
        act.y[r] = obs.y[i];
        act.e[r] = obs.offset[i];
        if (obs.family == ObsFamily::gaussian) act.sd[r] = obs.gauss_sd[i];
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> row_major(model.design);
    ts.reserve(model.design.nonZeros());
    for (int r = 0; r < ma; ++r) {
        const int i = keep[r];
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(row_major, i); it;
             ++it) {
            ts.emplace_back(r, static_cast<int>(it.col()), it.value());
        }
    }
    act.design.resize(ma, model.design.cols());
    act.design.setFromTriplets(ts.begin(), ts.end());
    act.design.makeCompressed();
    return act;
}

double log_likelihood(const ActiveObs& act, const Eigen::VectorXd& eta) {
    double ll = 0.0;
    if (act.family == ObsFamily::poisson) {
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double mu = act.e[i] * std::exp(eta[i]);
            ll += act.y[i] * (std::log(act.e[i]) + eta[i]) - mu -
                  std::lgamma(act.y[i] + 1.0);
        }
    } else {
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double r = (act.y[i] - eta[i]) / act.sd[i];
            ll += -0.5 * std::log(2.0 * std::numbers::pi * act.sd[i] * act.sd[i]) -
                  0.5 * r * r;
        }
    }
    return ll;
}

void likelihood_derivs(const ActiveObs& act, const Eigen::VectorXd& eta,
                       Eigen::VectorXd& grad_eta, Eigen::VectorXd& curv_eta) {
    const auto m = eta.size();
    grad_eta.resize(m);
    curv_eta.resize(m);
    if (act.family == ObsFamily::poisson) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const double mu = act.e[i] * std::exp(eta[i]);
            grad_eta[i] = act.y[i] - mu;
            curv_eta[i] = mu;
        }
    } else {
        for (Eigen::Index i = 0; i < m; ++i) {
            const double prec = 1.0 / (act.sd[i] * act.sd[i]);
            grad_eta[i] = (act.y[i] - eta[i]) * prec;
            curv_eta[i] = prec;
        }
    }
}

double dense_logdet_spd(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        throw SingularityError("dense logdet: matrix not positive definite");
    }
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i) s += std::log(llt.matrixL()(i, i));
    return 2.0 * s;
}

} // namespace

GaussianApprox gaussian_approx(const ModelAtTheta& model, const PoissonObs& obs,
                               const Eigen::VectorXd& theta,
                               const Eigen::VectorXd* warm_start) {
    const int n = model.prior_precision.dim();
    const ActiveObs act = filter_rows(model, obs);
    const int k = model.constraints.count();
    const Eigen::MatrixXd& a_c = model.constraints.a;
    Eigen::MatrixXd aat_inv;
    if (k > 0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a_c * a_c.transpose());
        if (!lu.isInvertible()) {
            throw SingularityError("gaussian_approx: dependent constraint rows");
        }
        aat_inv = lu.inverse();
    }

    Eigen::VectorXd x = warm_start && warm_start->size() == n
                            ? *warm_start
                            : Eigen::VectorXd::Zero(n);
    if (k > 0) x -= a_c.transpose() * (aat_inv * (a_c * x)); // start on the manifold

    auto objective = [&](const Eigen::VectorXd& xx) {
        return log_likelihood(act, act.design * xx) - 0.5 * model.prior_precision.quad_form(xx);
    };

    double f = objective(x);
    Eigen::VectorXd grad_eta, curv;
    const Eigen::SparseMatrix<double> q_full = model.prior_precision.full();

    for (int iter = 0; iter < kNewtonMaxIter; ++iter) {
        const Eigen::VectorXd eta = act.design * x;
        likelihood_derivs(act, eta, grad_eta, curv);
        Eigen::VectorXd grad = act.design.transpose() * grad_eta -
                               model.prior_precision.multiply(x);
        Eigen::VectorXd grad_proj = grad;
        if (k > 0) grad_proj -= a_c.transpose() * (aat_inv * (a_c * grad));

        Eigen::SparseMatrix<double> qg =
            q_full + Eigen::SparseMatrix<double>(act.design.transpose() *
                                                 curv.asDiagonal() * act.design);
        CholeskyFactor factor = [&] {
            try {
                return CholeskyFactor(SparseSymMatrix::from_symmetric(qg));
            } catch (const SingularityError& e) {
                throw FitError(std::string("gaussian_approx: ") + e.what(), to_std(theta));
            }
        }();

        Eigen::MatrixXd w, s_inv;
        if (k > 0) {
            w = factor.solve_dense(a_c.transpose());
            Eigen::FullPivLU<Eigen::MatrixXd> lu(a_c * w);
            if (!lu.isInvertible()) {
                throw FitError("gaussian_approx: singular constraint system", to_std(theta));
            }
            s_inv = lu.inverse();
        }

        const bool grad_ok = grad_proj.cwiseAbs().maxCoeff() <= kNewtonGradTol;
        if (grad_ok) {
            const double ll = log_likelihood(act, eta);
            const double quad = model.prior_precision.quad_form(x);
            Eigen::MatrixXd s = k > 0 ? Eigen::MatrixXd(a_c * w) : Eigen::MatrixXd();
            return GaussianApprox{std::move(x), std::move(factor), ll, quad, iter,
                                  std::move(w), std::move(s)};
        }

        const Eigen::VectorXd step = factor.solve(grad);
        double alpha = 1.0;
        Eigen::VectorXd x_new;
        double f_new = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            x_new = x + alpha * step;
            if (k > 0) x_new -= w * (s_inv * (a_c * x_new));
            f_new = objective(x_new);
            if (std::isfinite(f_new) && f_new >= f - 1e-12 * (1.0 + std::abs(f))) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            throw FitError("gaussian_approx: step halving failed to improve objective",
                           to_std(theta));
        }
        const double step_norm = (x_new - x).norm();
        x = std::move(x_new);
        f = f_new;
        if (step_norm <= kNewtonStepTol) {
            // re-linearize at the accepted point so the factor matches the mode
            const Eigen::VectorXd eta2 = act.design * x;
            likelihood_derivs(act, eta2, grad_eta, curv);
            Eigen::SparseMatrix<double> qg2 =
                q_full + Eigen::SparseMatrix<double>(act.design.transpose() *
                                                     curv.asDiagonal() * act.design);
            CholeskyFactor factor2(SparseSymMatrix::from_symmetric(qg2));
            Eigen::MatrixXd w2, s2;
            if (k > 0) {
                w2 = factor2.solve_dense(a_c.transpose());
                s2 = a_c * w2;
            }
            const double ll = log_likelihood(act, eta2);
            const double quad = model.prior_precision.quad_form(x);
            return GaussianApprox{std::move(x), std::move(factor2), ll, quad, iter + 1,
                                  std::move(w2), std::move(s2)};
        }
    }
    throw FitError("gaussian_approx: no convergence in 100 iterations", to_std(theta));
}

double laplace_log_marginal(const ModelAtTheta& model, const PoissonObs& obs,
                            const GaussianApprox& ga) {
    (void)obs;
    const int k = model.constraints.count();
    double logdet_c = ga.factor.logdet();
    if (k > 0) {
        logdet_c += dense_logdet_spd(ga.s) -
                    dense_logdet_spd(model.constraints.a * model.constraints.a.transpose());
    }
    return ga.log_lik - 0.5 * ga.prior_quad + 0.5 * model.prior_logdet_c - 0.5 * logdet_c;
}

double laplace_log_marginal(const LatentModel& model, const PoissonObs& obs,
                            const Eigen::VectorXd& theta) {
    const ModelAtTheta mt = model.build(theta);
    const GaussianApprox ga = gaussian_approx(mt, obs, theta);
    return laplace_log_marginal(mt, obs, ga);
}

namespace {

// Log posterior of theta with mode warm-starting between evaluations.
class ThetaObjective {
public:
    ThetaObjective(const LatentModel& model, const PoissonObs& obs)
        : model_(model), obs_(obs) {}

    double operator()(const Eigen::VectorXd& theta) {
        ++evals_;
        try {
            const ModelAtTheta mt = model_.build(theta);
            GaussianApprox ga = gaussian_approx(mt, obs_, theta,
                                                warm_.size() ? &warm_ : nullptr);
            newton_iters_ += ga.newton_iters;
            const double lp = laplace_log_marginal(mt, obs_, ga) +
                              model_.log_prior_theta(theta);
            warm_ = std::move(ga.mode);
            return lp;
        } catch (const FitError&) {
            return -std::numeric_limits<double>::infinity();
        }
    }

    Eigen::VectorXd clip(Eigen::VectorXd theta, bool* clipped) const {
        for (int i = 0; i < theta.size(); ++i) {
            const double c = std::clamp(theta[i], model_.box_lo[i], model_.box_hi[i]);
            if (c != theta[i] && clipped) *clipped = true;
            theta[i] = c;
        }
        return theta;
    }

    int evals() const { return evals_; }
    int newton_iters() const { return newton_iters_; }
    const Eigen::VectorXd& warm() const { return warm_; }

private:
    const LatentModel& model_;
    const PoissonObs& obs_;
    Eigen::VectorXd warm_;
    int evals_ = 0;
    int newton_iters_ = 0;
};

} // namespace

Eigen::VectorXd optimize_hyper(const LatentModel& model, const PoissonObs& obs,
                               const Eigen::VectorXd& theta_init, FitDiagnostics* diag) {
    const int d = model.hyper_dim;
    if (d == 0) return Eigen::VectorXd();
    if (theta_init.size() != d) throw ConfigError("optimize_hyper: theta_init size mismatch");

    ThetaObjective objective(model, obs);
    bool clipped = false;

    // Nelder-Mead (maximization) with box clipping.
    std::vector<Eigen::VectorXd> vx(d + 1);
    std::vector<double> vf(d + 1);
    vx[0] = objective.clip(theta_init, &clipped);
    for (int i = 0; i < d; ++i) {
        Eigen::VectorXd v = vx[0];
        v[i] += 0.7;
        vx[i + 1] = objective.clip(v, &clipped);
    }
    for (int i = 0; i <= d; ++i) vf[i] = objective(vx[i]);

    const int max_iter = 300;
    for (int it = 0; it < max_iter; ++it) {
        // sort descending by value (best first)
        std::vector<int> ord(d + 1);
        std::iota(ord.begin(), ord.end(), 0);
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return vf[a] > vf[b]; });
        std::vector<Eigen::VectorXd> sx(d + 1);
        std::vector<double> sf(d + 1);
        for (int i = 0; i <= d; ++i) {
            sx[i] = vx[ord[i]];
            sf[i] = vf[ord[i]];
        }
        vx = sx;
        vf = sf;

        double spread = 0.0;
        for (int i = 1; i <= d; ++i) spread = std::max(spread, (vx[i] - vx[0]).norm());
        if (spread <= 1e-4) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < d; ++i) centroid += vx[i];
        centroid /= d;

        const Eigen::VectorXd xr = objective.clip(centroid + (centroid - vx[d]), &clipped);
        const double fr = objective(xr);
        if (fr > vf[0]) {
            const Eigen::VectorXd xe =
                objective.clip(centroid + 2.0 * (centroid - vx[d]), &clipped);
            const double fe = objective(xe);
            if (fe > fr) {
                vx[d] = xe;
                vf[d] = fe;
            } else {
                vx[d] = xr;
                vf[d] = fr;
            }
        } else if (fr > vf[d - 1]) {
            vx[d] = xr;
            vf[d] = fr;
        } else {
            const Eigen::VectorXd xc =
                objective.clip(centroid + 0.5 * (vx[d] - centroid), &clipped);
            const double fc = objective(xc);
            if (fc > vf[d]) {
                vx[d] = xc;
                vf[d] = fc;
            } else {
                for (int i = 1; i <= d; ++i) {
                    vx[i] = objective.clip(vx[0] + 0.5 * (vx[i] - vx[0]), &clipped);
                    vf[i] = objective(vx[i]);
                }
            }
        }
    }

    int best = 0;
    for (int i = 1; i <= d; ++i) {
        if (vf[i] > vf[best]) best = i;
    }
    if (diag) {
        diag->objective_evaluations += objective.evals();
        diag->newton_iterations += objective.newton_iters();
        diag->box_clipped = diag->box_clipped || clipped;
    }
    return vx[best];
}

HyperGrid explore_grid(const LatentModel& model, const PoissonObs& obs,
                       const Eigen::VectorXd& theta_mode, FitDiagnostics* diag) {
    const int d = model.hyper_dim;
    HyperGrid grid;
    ThetaObjective objective(model, obs);

    if (d == 0) {
        grid.points.push_back({Eigen::VectorXd(), objective(Eigen::VectorXd()), 1.0});
        if (diag) {
            diag->grid_size = 1;
            diag->objective_evaluations += objective.evals();
            diag->newton_iterations += objective.newton_iters();
        }
        return grid;
    }

    const double lp0 = objective(theta_mode);
    const double h = 0.1;

    // finite-difference Hessian of the log posterior at the mode
    Eigen::MatrixXd hess(d, d);
    bool fd_ok = std::isfinite(lp0);
    for (int i = 0; i < d && fd_ok; ++i) {
        Eigen::VectorXd tp = theta_mode, tm = theta_mode;
        tp[i] += h;
        tm[i] -= h;
        const double fp = objective(tp), fm = objective(tm);
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            fd_ok = false;
            break;
        }
        hess(i, i) = (fp - 2.0 * lp0 + fm) / (h * h);
        for (int j = i + 1; j < d; ++j) {
            Eigen::VectorXd tpp = theta_mode, tpm = theta_mode, tmp = theta_mode,
                            tmm = theta_mode;
            tpp[i] += h;
            tpp[j] += h;
            tpm[i] += h;
            tpm[j] -= h;
            tmp[i] -= h;
            tmp[j] += h;
            tmm[i] -= h;
            tmm[j] -= h;
            const double v =
                (objective(tpp) - objective(tpm) - objective(tmp) + objective(tmm)) /
                (4.0 * h * h);
            if (!std::isfinite(v)) {
                fd_ok = false;
                break;
            }
            hess(i, j) = hess(j, i) = v;
        }
    }

    Eigen::MatrixXd step(d, d);
    bool fallback = !fd_ok;
    if (fd_ok) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-hess);
        if (eig.eigenvalues().minCoeff() <= 0.0) {
            fallback = true;
        } else {
            step = eig.eigenvectors() *
                   eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
        }
    }
    if (fallback) {
        step = 0.5 * Eigen::MatrixXd::Identity(d, d);
        grid.hessian_fallback = true;
    }

    // 5 points per dimension, one posterior sd per step
    std::vector<Eigen::VectorXd> offsets;
    {
        const int npts = static_cast<int>(std::pow(5, d));
        for (int idx = 0; idx < npts; ++idx) {
            Eigen::VectorXd z(d);
            int rest = idx;
            for (int i = 0; i < d; ++i) {
                z[i] = static_cast<double>(rest % 5 - 2);
                rest /= 5;
            }
            offsets.push_back(z);
        }
    }
    for (const auto& z : offsets) {
        Eigen::VectorXd theta = objective.clip(theta_mode + step * z, nullptr);
        bool dup = false;
        for (const auto& p : grid.points) {
            if ((p.theta - theta).norm() < 1e-12) {
                dup = true;
                break;
            }
        }
        if (dup) continue;
        const double lp = z.isZero(0.0) ? lp0 : objective(theta);
        if (!std::isfinite(lp)) continue;
        grid.points.push_back({std::move(theta), lp, 0.0});
    }

    double lp_max = -std::numeric_limits<double>::infinity();
    for (const auto& p : grid.points) lp_max = std::max(lp_max, p.log_post);
    double total = 0.0;
    for (auto& p : grid.points) {
        p.weight = std::exp(p.log_post - lp_max);
        total += p.weight;
    }
    // drop negligible points, then renormalize
    std::erase_if(grid.points,
                  [&](const HyperGridPoint& p) { return p.weight < 1e-3; });
    total = 0.0;
    for (const auto& p : grid.points) total += p.weight;
    for (auto& p : grid.points) p.weight /= total;

    if (diag) {
        diag->grid_size = static_cast<int>(grid.points.size());
        diag->hessian_fallback = diag->hessian_fallback || grid.hessian_fallback;
        diag->objective_evaluations += objective.evals();
        diag->newton_iterations += objective.newton_iters();
    }
    return grid;
}

namespace {

struct GridPointState {
    Eigen::VectorXd theta;
    double weight = 0.0;
    Eigen::VectorXd mode;
    CholeskyFactor factor;
    Eigen::MatrixXd w, s_inv;
    Eigen::SparseMatrix<double> target_rows;
    Eigen::VectorXd mu;  // per target
    Eigen::VectorXd var; // per target
    ConstraintSet constraints;
};

} // namespace

FitResult predictor_marginals(const LatentModel& model, const PoissonObs& obs,
                              const HyperGrid& grid,
                              const std::vector<double>& thresholds, int n_samples,
                              std::uint64_t seed, FitDiagnostics diag) {
    for (double t : thresholds) {
        if (!(t > 0.0)) throw DomainError("predictor_marginals: thresholds must be positive");
    }
    if (grid.points.empty()) throw DomainError("predictor_marginals: empty hyper grid");

    const int n_targets = model.target_count;
    const int latent = model.latent_dim;
    const int intercept = latent - 1; // beta0 is the final latent coordinate

    std::vector<GridPointState> states;
    states.reserve(grid.points.size());
    Eigen::VectorXd warm;

    for (const auto& p : grid.points) {
        const ModelAtTheta mt = model.build(p.theta);
        GaussianApprox ga = gaussian_approx(mt, obs, p.theta, warm.size() ? &warm : nullptr);
        diag.newton_iterations += ga.newton_iters;
        warm = ga.mode;

        const int k = mt.constraints.count();
        Eigen::MatrixXd s_inv;
        if (k > 0) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(ga.s);
            if (!lu.isInvertible()) {
                throw FitError("predictor_marginals: singular constraint system",
                               to_std(p.theta));
            }
            s_inv = lu.inverse();
        }

        SelectedInverse sel(ga.factor);
        Eigen::VectorXd icol; // exact column of the covariance for the intercept
        if (intercept >= 0) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(latent);
            e[intercept] = 1.0;
            icol = ga.factor.solve(e);
        }

        Eigen::SparseMatrix<double> targets = model.targets(p.theta);
        if (targets.rows() != n_targets) {
            throw DomainError("predictor_marginals: target row count mismatch");
        }
        Eigen::SparseMatrix<double, Eigen::RowMajor> targets_rm(targets);

        Eigen::VectorXd mu(n_targets), var(n_targets);
        for (int g = 0; g < n_targets; ++g) {
            double m = 0.0;
            std::vector<std::pair<int, double>> nz;
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(targets_rm, g);
                 it; ++it) {
                nz.emplace_back(static_cast<int>(it.col()), it.value());
                m += it.value() * ga.mode[static_cast<int>(it.col())];
            }
            double v0 = 0.0;
            bool fallback = false;
            for (std::size_t a = 0; a < nz.size() && !fallback; ++a) {
                for (std::size_t b = 0; b < nz.size() && !fallback; ++b) {
                    const int pa = nz[a].first, pb = nz[b].first;
                    double cov;
                    if (pa == intercept) {
                        cov = icol[pb];
                    } else if (pb == intercept) {
                        cov = icol[pa];
                    } else if (auto c = sel.covariance(pa, pb)) {
                        cov = *c;
                    } else {
                        fallback = true;
                        break;
                    }
                    v0 += nz[a].second * nz[b].second * cov;
                }
            }
            if (fallback) {
                ++diag.variance_fallback_solves;
                Eigen::VectorXd a_dense = Eigen::VectorXd::Zero(latent);
                for (const auto& [idx, val] : nz) a_dense[idx] = val;
                v0 = a_dense.dot(ga.factor.solve(a_dense));
            }
            if (k > 0) {
                Eigen::VectorXd a_dense = Eigen::VectorXd::Zero(latent);
                for (const auto& [idx, val] : nz) a_dense[idx] = val;
                const Eigen::VectorXd aw = ga.w.transpose() * a_dense;
                v0 -= aw.dot(s_inv * aw);
            }
            mu[g] = m;
            var[g] = std::max(v0, 0.0);
        }

        states.push_back({p.theta, p.weight, std::move(ga.mode), std::move(ga.factor),
                          std::move(ga.w), std::move(s_inv), std::move(targets),
                          std::move(mu), std::move(var), mt.constraints});
    }

    FitResult out;
    out.n_targets = n_targets;
    out.thresholds = thresholds;
    out.mean_eta.resize(n_targets);
    out.sd_eta.resize(n_targets);
    out.lo95_eta.resize(n_targets);
    out.hi95_eta.resize(n_targets);
    out.mean_risk.resize(n_targets);
    out.exceedance.resize(n_targets, static_cast<int>(thresholds.size()));

    for (int g = 0; g < n_targets; ++g) {
        double mean = 0.0, second = 0.0, risk = 0.0;
        for (const auto& st : states) {
            mean += st.weight * st.mu[g];
            second += st.weight * (st.var[g] + st.mu[g] * st.mu[g]);
            risk += st.weight * std::exp(st.mu[g] + 0.5 * st.var[g]);
        }
        out.mean_eta[g] = mean;
        out.sd_eta[g] = std::sqrt(std::max(second - mean * mean, 0.0));
        out.mean_risk[g] = risk;

        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            const double cut = std::log(thresholds[t]);
            double p = 0.0;
            for (const auto& st : states) {
                const double sd = std::sqrt(std::max(st.var[g], 1e-300));
                p += st.weight * normal_ccdf((cut - st.mu[g]) / sd);
            }
            out.exceedance(g, static_cast<int>(t)) = std::min(std::max(p, 0.0), 1.0);
        }

        // central 95% interval of the eta mixture by bisection
        auto mix_cdf = [&](double q) {
            double c = 0.0;
            for (const auto& st : states) {
                const double sd = std::sqrt(std::max(st.var[g], 1e-300));
                c += st.weight * normal_cdf((q - st.mu[g]) / sd);
            }
            return c;
        };
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& st : states) {
            const double sd = std::sqrt(std::max(st.var[g], 0.0));
            lo = std::min(lo, st.mu[g] - 10.0 * sd - 1e-8);
            hi = std::max(hi, st.mu[g] + 10.0 * sd + 1e-8);
        }
        auto quantile = [&](double target) {
            double a = lo, b = hi;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a + b);
                if (mix_cdf(mid) < target) {
                    a = mid;
                } else {
                    b = mid;
                }
                if (b - a < 1e-12 * (1.0 + std::abs(b))) break;
            }
            return 0.5 * (a + b);
        };
        out.lo95_eta[g] = quantile(0.025);
        out.hi95_eta[g] = quantile(0.975);
    }

    // joint posterior samples: grid point first, then the Gaussian
    if (n_samples > 0) {
        out.samples.resize(n_samples, n_targets);
        for (int d2 = 0; d2 < n_samples; ++d2) {
            Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(d2));
            const double u = rng.uniform();
            std::size_t pick = 0;
            double acc = 0.0;
            for (std::size_t k2 = 0; k2 < states.size(); ++k2) {
                acc += states[k2].weight;
                if (u <= acc) {
                    pick = k2;
                    break;
                }
                pick = k2;
            }
            const auto& st = states[pick];
            Eigen::VectorXd xs = st.factor.sample(st.mode, rng);
            if (st.constraints.count() > 0) {
                xs -= st.w * (st.s_inv * (st.constraints.a * xs));
            }
            out.samples.row(d2) = (st.target_rows * xs).transpose();
        }
    }

    // hyper posterior summary in the natural scale
    const int d_h = model.hyper_dim;
    out.hyper_names = model.hyper_names;
    if (d_h > 0) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < states.size(); ++i) {
            if (grid.points[i].log_post > grid.points[best].log_post) best = i;
        }
        out.hyper_mode = model.to_natural(states[best].theta);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d_h);
        Eigen::VectorXd second = Eigen::VectorXd::Zero(d_h);
        for (const auto& st : states) {
            const Eigen::VectorXd nat = model.to_natural(st.theta);
            mean += st.weight * nat;
            second += st.weight * nat.cwiseAbs2();
        }
        out.hyper_mean = mean;
        out.hyper_sd = (second - mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
    }

    diag.grid_size = static_cast<int>(states.size());
    out.diag = diag;
    return out;
}

namespace {

Eigen::SparseMatrix<double> bym_rows(int n, int latent, double v_w, double u_w) {
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(3 * n);
    for (int i = 0; i < n; ++i) {
        ts.emplace_back(i, i, v_w);
        ts.emplace_back(i, n + i, u_w);
        ts.emplace_back(i, latent - 1, 1.0);
    }
    Eigen::SparseMatrix<double> a(n, latent);
    a.setFromTriplets(ts.begin(), ts.end());
    a.makeCompressed();
    return a;
}

} // namespace

LatentModel bym_latent_model(const UnitCounts& counts, const IcarStructure& icar,
                             const FitOptions& options) {
    const int n = icar.n;
    if (static_cast<int>(counts.cases.size()) != n ||
        static_cast<int>(counts.population.size()) != n) {
        throw DomainError("bym fit: unit counts do not match the structure");
    }
    const int latent = 2 * n + 1;

    std::vector<Eigen::Triplet<double>> ts;
    for (int i = 0; i < n; ++i) ts.emplace_back(i, i, 1.0);
    for (int k = 0; k < icar.q_star.lower().outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(icar.q_star.lower(), k); it; ++it) {
            ts.emplace_back(n + static_cast<int>(it.row()), n + static_cast<int>(it.col()),
                            it.value());
        }
    }
    ts.emplace_back(latent - 1, latent - 1, options.beta0_precision);
    const SparseSymMatrix prior = SparseSymMatrix::from_triplets(latent, ts);
    const ConstraintSet constraint = ConstraintSet::sum_to_zero(latent, n, 2 * n);
    const double prior_logdet_c = icar.logdet_plus + std::log(options.beta0_precision);

    const PcPriorTau tau_prior = make_pc_prior_tau();
    const auto phi_prior = options.phi_prior_uniform
                               ? std::shared_ptr<PcPriorPhi>()
                               : std::make_shared<PcPriorPhi>(icar);

    LatentModel model;
    model.latent_dim = latent;
    model.hyper_dim = 2;
    model.hyper_names = {"tau", "phi"};
    model.box_lo = Eigen::Vector2d(-5.0, -8.0);
    model.box_hi = Eigen::Vector2d(3.0, 8.0);
    model.target_count = n;

    auto decode = [](const Eigen::VectorXd& theta) {
        const double tau = std::exp(-2.0 * theta[0]); // theta0 = log sd = log(1/sqrt(tau))
        const double phi = 1.0 / (1.0 + std::exp(-theta[1]));
        return std::pair<double, double>(tau, phi);
    };

    model.build = [=](const Eigen::VectorXd& theta) {
        const auto [tau, phi] = decode(theta);
        const double inv_sqrt_tau = 1.0 / std::sqrt(tau);
        ModelAtTheta mt{prior, constraint,
                        bym_rows(n, latent, inv_sqrt_tau * std::sqrt(1.0 - phi),
                                 inv_sqrt_tau * std::sqrt(phi)),
                        prior_logdet_c};
        return mt;
    };
    model.targets = [=](const Eigen::VectorXd& theta) {
        const auto [tau, phi] = decode(theta);
        const double inv_sqrt_tau = 1.0 / std::sqrt(tau);
        return bym_rows(n, latent, inv_sqrt_tau * std::sqrt(1.0 - phi),
                        inv_sqrt_tau * std::sqrt(phi));
    };
    model.log_prior_theta = [=](const Eigen::VectorXd& theta) {
        const auto [tau, phi] = decode(theta);
        // Jacobians: dtau/dtheta0 = -2 tau, dphi/dtheta1 = phi (1 - phi)
        double lp = tau_prior.log_density(tau) + std::log(2.0 * tau);
        lp += std::log(phi * (1.0 - phi));
        if (phi_prior) lp += phi_prior->log_density(phi);
        return lp;
    };
    model.to_natural = [=](const Eigen::VectorXd& theta) {
        const auto [tau, phi] = decode(theta);
        return Eigen::Vector2d(tau, phi);
    };
    return model;
}

FitResult fit_bym(const UnitCounts& counts, const IcarStructure& icar,
                  const FitOptions& options) {
    const LatentModel model = bym_latent_model(counts, icar, options);
    PoissonObs obs;
    const int n = icar.n;
    obs.y.resize(n);
    obs.offset.resize(n);
    for (int i = 0; i < n; ++i) {
        obs.y[i] = static_cast<double>(counts.cases[i]);
        obs.offset[i] = static_cast<double>(counts.population[i]);
    }
    return run_fit(model, obs, Eigen::Vector2d(std::log(0.5), 0.0), options);
}

LatentModel lgcp_latent_model(const GridCounts& counts, const EvalGrid& grid,
                              const Mesh& mesh, const FemMatrices& fem,
                              const FitOptions& options) {
    const int m_nodes = mesh.node_count();
    const int latent = m_nodes + 1;
    const int n_cells = grid.size();
    if (static_cast<int>(counts.cases.size()) != n_cells) {
        throw DomainError("lgcp fit: grid counts do not match the evaluation grid");
    }

    std::vector<Point> centroids(n_cells);
    for (int g = 0; g < n_cells; ++g) centroids[g] = grid.centroid(g);
    const Projector proj = make_projector(mesh, centroids);

    Eigen::SparseMatrix<double> design(n_cells, latent);
    {
        std::vector<Eigen::Triplet<double>> ts;
        ts.reserve(proj.a.nonZeros() + n_cells);
        for (int k = 0; k < proj.a.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(proj.a, k); it; ++it) {
                ts.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                it.value());
            }
        }
        for (int g = 0; g < n_cells; ++g) ts.emplace_back(g, latent - 1, 1.0);
        design.setFromTriplets(ts.begin(), ts.end());
        design.makeCompressed();
    }

    const PcPriorRangeSigma prior_rs = make_pc_prior_range_sigma(options.rho_prior_median);
    const double b0_prec = options.beta0_precision;

    // Q(theta) = tau_s^2 (kappa^4 C + 2 kappa^2 G + G C^{-1} G): precompute parts
    const Eigen::SparseMatrix<double> g_full = fem.stiffness.full();
    const Eigen::SparseMatrix<double> gcg =
        g_full * fem.c_lumped.cwiseInverse().asDiagonal() * g_full;
    Eigen::SparseMatrix<double> c_diag(m_nodes, m_nodes);
    {
        std::vector<Eigen::Triplet<double>> ts;
        for (int i = 0; i < m_nodes; ++i) ts.emplace_back(i, i, fem.c_lumped[i]);
        c_diag.setFromTriplets(ts.begin(), ts.end());
    }

    LatentModel model;
    model.latent_dim = latent;
    model.hyper_dim = 2;
    model.hyper_names = {"rho", "sigma"};
    const double spacing = std::min(mesh.dx, mesh.dy);
    model.box_lo = Eigen::Vector2d(std::log(spacing), -5.0);
    model.box_hi = Eigen::Vector2d(std::log(10.0 * mesh.window.diameter()), 3.0);
    model.target_count = n_cells;

    model.build = [=](const Eigen::VectorXd& theta) {
        const double rho = std::exp(theta[0]);
        const double sigma = std::exp(theta[1]);
        const double kappa = std::sqrt(8.0) / rho;
        const double k2 = kappa * kappa;
        const double tau2 = 1.0 / (4.0 * std::numbers::pi * k2 * sigma * sigma);
        Eigen::SparseMatrix<double> q_field =
            tau2 * (k2 * k2 * c_diag + 2.0 * k2 * g_full + gcg);

        std::vector<Eigen::Triplet<double>> ts;
        ts.reserve(q_field.nonZeros() + 1);
        for (int k = 0; k < q_field.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(q_field, k); it; ++it) {
                if (it.row() >= it.col()) {
                    ts.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                    it.value());
                }
            }
        }
        ts.emplace_back(latent - 1, latent - 1, b0_prec);
        SparseSymMatrix prior = SparseSymMatrix::from_triplets(latent, ts);

        const double field_logdet =
            CholeskyFactor(SparseSymMatrix::from_symmetric(q_field)).logdet();
        return ModelAtTheta{std::move(prior), ConstraintSet::none(latent), design,
                            field_logdet + std::log(b0_prec)};
    };
    model.targets = [=](const Eigen::VectorXd&) { return design; };
    model.log_prior_theta = [=](const Eigen::VectorXd& theta) {
        const double rho = std::exp(theta[0]);
        const double sigma = std::exp(theta[1]);
        // Jacobian of (log rho, log sigma) -> (rho, sigma)
        return prior_rs.log_density(rho, sigma) + std::log(rho) + std::log(sigma);
    };
    model.to_natural = [](const Eigen::VectorXd& theta) {
        return Eigen::Vector2d(std::exp(theta[0]), std::exp(theta[1]));
    };
    return model;
}

FitResult fit_lgcp(const GridCounts& counts, const EvalGrid& grid, const Mesh& mesh,
                   const FemMatrices& fem, const FitOptions& options) {
    const LatentModel model = lgcp_latent_model(counts, grid, mesh, fem, options);
    PoissonObs obs;
    const int n_cells = grid.size();
    obs.y.resize(n_cells);
    obs.offset.resize(n_cells);
    for (int g = 0; g < n_cells; ++g) {
        obs.y[g] = static_cast<double>(counts.cases[g]);
        obs.offset[g] = static_cast<double>(counts.population[g]);
    }
    const double diam = mesh.window.diameter();
    Eigen::Vector2d init(std::log(std::clamp(0.3 * diam, std::exp(model.box_lo[0]),
                                             std::exp(model.box_hi[0]))),
                         std::log(0.3));
    return run_fit(model, obs, init, options);
}

FitResult run_fit(const LatentModel& model, const PoissonObs& obs,
                  const Eigen::VectorXd& theta_init, const FitOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    FitDiagnostics diag;
    const Eigen::VectorXd mode = optimize_hyper(model, obs, theta_init, &diag);
    const HyperGrid grid = explore_grid(model, obs, mode, &diag);
    FitResult result = predictor_marginals(model, obs, grid, options.thresholds,
                                           options.n_samples, options.seed, diag);
    result.diag.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

} // namespace riskfield

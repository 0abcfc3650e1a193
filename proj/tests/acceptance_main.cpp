// Acceptance gate: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Exit code is the number of failures.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "riskfield/bym.hpp"
#include "riskfield/config.hpp"
#include "riskfield/io.hpp"
#include "riskfield/lgm.hpp"
#include "riskfield/metrics.hpp"
#include "riskfield/pipeline.hpp"
#include "riskfield/spde.hpp"
#include "test_util.hpp"

using namespace riskfield;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& msg) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += msg;
        }
    }
    void note(const std::string& msg) {
        if (!detail.empty()) detail += "; ";
        detail += msg;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1
Check criterion1_spde_fidelity() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    const double rho = 3000.0, sigma = 1.0;
    const auto mesh = build_mesh(Window(0, 0, 12000, 9000), rho / 5.0, 2.0 * rho);
    const auto fem = assemble_fem(mesh);
    const CholeskyFactor factor(spde_precision(fem, {rho, sigma}));
    const SelectedInverse sel(factor);

    int pairs = 0, failures = 0;
    double worst = 0.0;
    for (int i = 0; i < mesh.node_count(); ++i) {
        if (!mesh.interior[i]) continue;
        for (int j = 0; j < i; ++j) {
            if (!mesh.interior[j]) continue;
            const double h = distance(mesh.nodes[i], mesh.nodes[j]);
            if (h < 0.1 * rho || h > rho) continue;
            const auto cov = sel.covariance(i, j);
            if (!cov) continue;
            const double truth = matern_covariance(h, {rho, sigma});
            const double rel = std::abs(*cov - truth) / truth;
            worst = std::max(worst, rel);
            if (rel > 0.05) ++failures;
            ++pairs;
        }
    }
    const double elapsed = seconds_since(t0);
    c.require(pairs >= 200, "only " + std::to_string(pairs) + " interior pairs");
    c.require(failures == 0, std::to_string(failures) + " pairs exceed 5% relative error");
    c.require(elapsed < 30.0, "runtime " + fmt(elapsed) + "s exceeds 30s");
    c.note("pairs=" + std::to_string(pairs) + " worst_rel=" + fmt(worst) + " time=" +
           fmt(elapsed) + "s");
    return c;
}

// ---------------------------------------------------------------- criterion 2
AdjacencyGraph random_connected_graph(int n, std::uint64_t seed) {
    Rng rng(seed);
    AdjacencyGraph g;
    g.n = n;
    g.neighbours.assign(n, {});
    auto connect = [&](int a, int b) {
        g.neighbours[a].push_back(b);
        g.neighbours[b].push_back(a);
    };
    for (int i = 1; i < n; ++i) connect(i, static_cast<int>(rng.uniform() * i));
    for (int e = 0; e < n; ++e) {
        const int a = static_cast<int>(rng.uniform() * n);
        const int b = static_cast<int>(rng.uniform() * n);
        if (a != b) connect(a, b);
    }
    for (auto& v : g.neighbours) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return g;
}

Check criterion2_icar_scaling() {
    Check c;
    Rng size_rng(515);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 20 + static_cast<int>(size_rng.uniform() * 280);
        const auto icar = icar_precision(random_connected_graph(n, 7000 + trial));
        const Eigen::VectorXd marg =
            testutil::pinv_diagonal(Eigen::MatrixXd(icar.q_star.full()));
        double log_mean = 0.0;
        for (int i = 0; i < n; ++i) log_mean += std::log(marg[i]);
        const double geo = std::exp(log_mean / n);
        c.require(std::abs(geo - 1.0) <= 1e-6,
                  "graph " + std::to_string(trial) + " (N=" + std::to_string(n) +
                      ") geometric mean " + fmt(geo));
    }
    return c;
}

// ---------------------------------------------------------------- criterion 3
Check criterion3_priors() {
    Check c;
    const auto tau_prior = make_pc_prior_tau();
    const auto tau_dens = [&](double tau) { return std::exp(tau_prior.log_density(tau)); };
    const double p_sigma_tau = testutil::integrate(tau_dens, 1e-9, 1.0, 1e-12);
    c.require(std::abs(p_sigma_tau - 0.01) <= 1e-6,
              "BYM Pr(sigma>1) = " + fmt(p_sigma_tau));

    const auto rs = make_pc_prior_range_sigma();
    const auto rho_dens = [&](double rho) {
        return rs.lambda_rho / (rho * rho) * std::exp(-rs.lambda_rho / rho);
    };
    const double p_rho = testutil::integrate(rho_dens, 1.0, 30000.0, 1e-12);
    c.require(std::abs(p_rho - 0.5) <= 1e-6, "Pr(rho<30000) = " + fmt(p_rho));
    const auto sig_dens = [&](double s) {
        return rs.lambda_sigma * std::exp(-rs.lambda_sigma * s);
    };
    const double p_sigma = testutil::integrate(sig_dens, 1.0, 50.0, 1e-13);
    c.require(std::abs(p_sigma - 0.01) <= 1e-6, "LGCP Pr(sigma>1) = " + fmt(p_sigma));

    // mixing-parameter median on a 6x6 lattice graph
    AdjacencyGraph lattice;
    lattice.n = 36;
    lattice.neighbours.assign(36, {});
    for (int r = 0; r < 6; ++r) {
        for (int col = 0; col < 6; ++col) {
            const int id = r * 6 + col;
            if (col + 1 < 6) {
                lattice.neighbours[id].push_back(id + 1);
                lattice.neighbours[id + 1].push_back(id);
            }
            if (r + 1 < 6) {
                lattice.neighbours[id].push_back(id + 6);
                lattice.neighbours[id + 6].push_back(id);
            }
        }
    }
    for (auto& v : lattice.neighbours) std::sort(v.begin(), v.end());
    const PcPriorPhi phi_prior(icar_precision(lattice));
    c.require(std::abs(phi_prior.cdf(0.5) - 0.5) <= 1e-3,
              "Pr(phi<=0.5) = " + fmt(phi_prior.cdf(0.5)));
    c.note("Pr(sig>1)=" + fmt(p_sigma_tau) + " Pr(rho<30k)=" + fmt(p_rho) +
           " Pr(phi<=.5)=" + fmt(phi_prior.cdf(0.5)));
    return c;
}

// ---------------------------------------------------------------- criterion 4
Eigen::SparseMatrix<double> sparse_identity(int n) {
    Eigen::SparseMatrix<double> a(n, n);
    a.setIdentity();
    return a;
}

double poisson_loglik(double y, double e, double eta) {
    return y * (std::log(e) + eta) - e * std::exp(eta) - std::lgamma(y + 1.0);
}

struct Grid1D {
    std::vector<double> x, logf;
    double step = 0.0;
};

Grid1D conditional_grid(double y, double e, double q, int points, double width) {
    Grid1D g;
    double m = std::log(std::max(y, 0.5) / e);
    for (int it = 0; it < 80; ++it) {
        m += (y - e * std::exp(m) - q * m) / (e * std::exp(m) + q);
    }
    const double sd = 1.0 / std::sqrt(e * std::exp(m) + q);
    g.step = 2.0 * width * sd / (points - 1);
    for (int p = 0; p < points; ++p) {
        const double x = m - width * sd + p * g.step;
        g.x.push_back(x);
        g.logf.push_back(poisson_loglik(y, e, x) - 0.5 * q * x * x +
                         0.5 * std::log(q / (2.0 * std::numbers::pi)));
    }
    return g;
}

struct CellMoments {
    double log_evidence = 0.0, mean = 0.0, sd = 0.0;
};

CellMoments cell_moments(const Grid1D& g) {
    CellMoments out;
    double lmax = -1e300;
    for (double v : g.logf) lmax = std::max(lmax, v);
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < g.x.size(); ++p) {
        const double w = std::exp(g.logf[p] - lmax);
        z += w;
        m1 += w * g.x[p];
        m2 += w * g.x[p] * g.x[p];
    }
    out.log_evidence = lmax + std::log(z * g.step);
    out.mean = m1 / z;
    out.sd = std::sqrt(m2 / z - (m1 / z) * (m1 / z));
    return out;
}

Check criterion4_inference_oracle() {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();

    // toy 1: 3-cell Poisson at fixed hyperparameters
    {
        const std::vector<double> y = {620.0, 900.0, 180.0};
        const std::vector<double> e = {300.0, 300.0, 300.0};
        const double q = 2.0;
        ModelAtTheta mt{SparseSymMatrix::identity(3, q), ConstraintSet::none(3),
                        sparse_identity(3), 3.0 * std::log(q)};
        PoissonObs obs;
        obs.y = Eigen::Vector3d(y[0], y[1], y[2]);
        obs.offset = Eigen::Vector3d(e[0], e[1], e[2]);
        const auto ga = gaussian_approx(mt, obs, Eigen::VectorXd());
        const double laplace = laplace_log_marginal(mt, obs, ga);

        LatentModel model;
        model.latent_dim = 3;
        model.hyper_dim = 0;
        model.target_count = 3;
        model.build = [q](const Eigen::VectorXd&) {
            return ModelAtTheta{SparseSymMatrix::identity(3, q), ConstraintSet::none(3),
                                sparse_identity(3), 3.0 * std::log(q)};
        };
        model.targets = [](const Eigen::VectorXd&) { return sparse_identity(3); };
        model.log_prior_theta = [](const Eigen::VectorXd&) { return 0.0; };
        model.to_natural = [](const Eigen::VectorXd& t) { return t; };
        FitOptions options;
        options.thresholds = {1.0};
        options.n_samples = 0;
        const FitResult fit = run_fit(model, obs, Eigen::VectorXd(), options);

        double oracle_log_evidence = 0.0;
        for (int i = 0; i < 3; ++i) {
            const auto mom = cell_moments(conditional_grid(y[i], e[i], q, 400, 10.0));
            oracle_log_evidence += mom.log_evidence;
            c.require(std::abs(fit.mean_eta[i] - mom.mean) <=
                          0.02 * std::max(std::abs(mom.mean), mom.sd),
                      "toy1 mean[" + std::to_string(i) + "] engine " + fmt(fit.mean_eta[i]) +
                          " vs oracle " + fmt(mom.mean));
            c.require(std::abs(fit.sd_eta[i] - mom.sd) <= 0.02 * mom.sd,
                      "toy1 sd[" + std::to_string(i) + "] engine " + fmt(fit.sd_eta[i]) +
                          " vs oracle " + fmt(mom.sd));
        }
        c.require(std::abs(laplace - oracle_log_evidence) <= 1e-3,
                  "toy1 laplace " + fmt(laplace) + " vs quadrature " +
                      fmt(oracle_log_evidence));
    }

    // toy 2: 2-cell Poisson with a 1-dimensional hyperparameter
    {
        const std::vector<double> y = {140.0, 160.0};
        const std::vector<double> e = {100.0, 100.0};
        LatentModel model;
        model.latent_dim = 2;
        model.hyper_dim = 1;
        model.hyper_names = {"tau"};
        model.box_lo = Eigen::VectorXd::Constant(1, -6.0);
        model.box_hi = Eigen::VectorXd::Constant(1, 6.0);
        model.target_count = 2;
        model.build = [](const Eigen::VectorXd& theta) {
            const double q = std::exp(theta[0]);
            return ModelAtTheta{SparseSymMatrix::identity(2, q), ConstraintSet::none(2),
                                sparse_identity(2), 2.0 * theta[0]};
        };
        model.targets = [](const Eigen::VectorXd&) { return sparse_identity(2); };
        model.log_prior_theta = [](const Eigen::VectorXd& theta) {
            return pc_log_prior_tau(std::exp(theta[0])) + theta[0];
        };
        model.to_natural = [](const Eigen::VectorXd& theta) {
            return Eigen::VectorXd::Constant(1, std::exp(theta[0]));
        };
        PoissonObs obs;
        obs.y = Eigen::Vector2d(y[0], y[1]);
        obs.offset = Eigen::Vector2d(e[0], e[1]);
        FitOptions options;
        options.thresholds = {1.0};
        options.n_samples = 0;
        const FitResult fit = run_fit(model, obs, Eigen::VectorXd::Zero(1), options);

        // (theta, x) tensor quadrature
        const int nt = 240;
        double lmax = -1e300;
        std::vector<double> lz(nt);
        std::vector<std::array<CellMoments, 2>> cm(nt);
        for (int t = 0; t < nt; ++t) {
            const double theta = -6.0 + 12.0 * t / (nt - 1);
            const double q = std::exp(theta);
            double le = 0.0;
            for (int i = 0; i < 2; ++i) {
                cm[t][i] = cell_moments(conditional_grid(y[i], e[i], q, 300, 10.0));
                le += cm[t][i].log_evidence;
            }
            lz[t] = le + pc_log_prior_tau(q) + theta;
            lmax = std::max(lmax, lz[t]);
        }
        double z = 0.0;
        double m1[2] = {0, 0}, m2[2] = {0, 0};
        for (int t = 0; t < nt; ++t) {
            const double w = std::exp(lz[t] - lmax);
            z += w;
            for (int i = 0; i < 2; ++i) {
                m1[i] += w * cm[t][i].mean;
                m2[i] += w * (cm[t][i].sd * cm[t][i].sd + cm[t][i].mean * cm[t][i].mean);
            }
        }
        for (int i = 0; i < 2; ++i) {
            const double mean = m1[i] / z;
            const double sd = std::sqrt(m2[i] / z - mean * mean);
            c.require(std::abs(fit.mean_eta[i] - mean) <= 0.02 * std::max(std::abs(mean), sd),
                      "toy2 mean[" + std::to_string(i) + "] engine " +
                          fmt(fit.mean_eta[i]) + " vs oracle " + fmt(mean));
            c.require(std::abs(fit.sd_eta[i] - sd) <= 0.02 * sd,
                      "toy2 sd[" + std::to_string(i) + "] engine " + fmt(fit.sd_eta[i]) +
                          " vs oracle " + fmt(sd));
        }
    }

    // toy 3: Gaussian conjugate exactness
    {
        const double q = 2.5, s = 0.7, yv = 1.3;
        ModelAtTheta mt{SparseSymMatrix::identity(1, q), ConstraintSet::none(1),
                        sparse_identity(1), std::log(q)};
        PoissonObs obs;
        obs.y = Eigen::VectorXd::Constant(1, yv);
        obs.offset = Eigen::VectorXd::Constant(1, 1.0);
        obs.family = ObsFamily::gaussian;
        obs.gauss_sd = Eigen::VectorXd::Constant(1, s);
        const auto ga = gaussian_approx(mt, obs, Eigen::VectorXd());
        const double laplace = laplace_log_marginal(mt, obs, ga);
        const double v = s * s + 1.0 / q;
        const double exact = -0.5 * std::log(2.0 * std::numbers::pi * v) -
                             0.5 * yv * yv / v;
        c.require(std::abs(laplace - exact) <= 1e-10,
                  "gaussian-conjugate laplace error " + fmt(std::abs(laplace - exact)));
    }

    const double elapsed = seconds_since(t0);
    c.require(elapsed < 60.0, "runtime " + fmt(elapsed) + "s exceeds 60s");
    c.note("time=" + fmt(elapsed) + "s");
    return c;
}

// ---------------------------------------------------------------- criterion 5
ScenarioConfig desk_config() {
    ScenarioConfig cfg; // desk-scale defaults from the config structure
    cfg.scenario_id = "acceptance";
    cfg.replicates = 30;
    cfg.k = 5.0;
    cfg.mesh_extension = 12000.0;
    return cfg;
}

Check criterion5_simulation_closure() {
    Check c;
    auto cfg = desk_config();
    const auto pop = build_synthetic_population(cfg.window, cfg.cell_size, cfg.total,
                                                cfg.centres, cfg.population_seed,
                                                cfg.floor_fraction);
    CircleSpec circles;
    for (const auto& g : cfg.centres) circles.centres.push_back(g.centre);

    const double target = 5.0 * 334.0;
    for (SurfaceShape shape : {SurfaceShape::step, SurfaceShape::smooth}) {
        for (double r : {1000.0, 5000.0, 10000.0}) {
            for (double cr : {2.0, 5.0}) {
                circles.radius = r;
                const auto s = solve_surface_parameters(pop, circles, cr, 5.0, 334.0, shape);
                const double got = expected_cases(s, pop);
                c.require(std::abs(got - target) <= 1e-6 * target,
                          std::string(shape == SurfaceShape::step ? "step" : "smooth") +
                              " r=" + fmt(r) + " c=" + fmt(cr) + " expected " + fmt(got));
            }
        }
    }

    const auto flat = solve_surface_parameters(pop, circles, 1.0, 5.0, 334.0,
                                               SurfaceShape::flat);
    const double lambda0 = std::get<FlatSurface>(flat).lambda0;
    const int reps = 200;
    double mean = 0.0;
    for (int j = 0; j < reps; ++j) {
        mean += static_cast<double>(simulate_dataset(flat, pop, 90000 + j).total_cases);
    }
    mean /= reps;
    const double se = std::sqrt(target * (1.0 - lambda0) / reps);
    c.require(std::abs(mean - target) <= 3.0 * se,
              "flat replicate mean " + fmt(mean) + " vs " + fmt(target) + " (3se=" +
                  fmt(3.0 * se) + ")");
    c.note("flat_mean=" + fmt(mean) + " 3se=" + fmt(3.0 * se));
    return c;
}

// ------------------------------------------------------------- criteria 6 & 7
double median_of(const std::vector<ReplicateMetrics>& rows,
                 double (*get)(const ReplicateMetrics&)) {
    std::vector<double> vals;
    for (const auto& rm : rows) {
        if (rm.ok()) vals.push_back(get(rm));
    }
    if (vals.empty()) return std::numeric_limits<double>::quiet_NaN();
    return percentile(vals, 0.5);
}

struct SimOutcome {
    double auc_bym = 0.0, auc_lgcp = 0.0;
    double rmise_bym = 0.0, rmise_lgcp = 0.0;
    double pj_bym = 0.0, pj_lgcp = 0.0;
    int errors = 0;
};

SimOutcome run_desk_scenario(SurfaceShape shape, double r, double cr, int jobs) {
    auto cfg = desk_config();
    cfg.shape = shape;
    cfg.r = r;
    cfg.c = cr;
    cfg.scenario_id = std::string(shape == SurfaceShape::step ? "step" : "smooth") + "_r" +
                      std::to_string(static_cast<int>(r)) + "_c" +
                      std::to_string(static_cast<int>(cr));
    const ScenarioRun run = run_scenario_in_memory(cfg, jobs);
    SimOutcome out;
    const auto& bym = run.by_model.at("bym");
    const auto& lgcp = run.by_model.at("lgcp");
    for (const auto& rm : bym) {
        if (!rm.ok()) ++out.errors;
    }
    for (const auto& rm : lgcp) {
        if (!rm.ok()) ++out.errors;
    }
    out.auc_bym = median_of(bym, [](const ReplicateMetrics& m) { return m.auc_area; });
    out.auc_lgcp = median_of(lgcp, [](const ReplicateMetrics& m) { return m.auc_area; });
    out.rmise_bym = median_of(bym, [](const ReplicateMetrics& m) { return m.rmise_log_unit; });
    out.rmise_lgcp =
        median_of(lgcp, [](const ReplicateMetrics& m) { return m.rmise_log_unit; });
    out.pj_bym = median_of(bym, [](const ReplicateMetrics& m) { return m.coverage_pj; });
    out.pj_lgcp = median_of(lgcp, [](const ReplicateMetrics& m) { return m.coverage_pj; });
    return out;
}

Check criterion6_directional(int jobs) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();

    const SimOutcome step_big = run_desk_scenario(SurfaceShape::step, 10000.0, 5.0, jobs);
    const SimOutcome smooth_big = run_desk_scenario(SurfaceShape::smooth, 10000.0, 5.0, jobs);
    const SimOutcome step_small = run_desk_scenario(SurfaceShape::step, 1000.0, 2.0, jobs);
    const SimOutcome smooth_small =
        run_desk_scenario(SurfaceShape::smooth, 1000.0, 2.0, jobs);

    c.require(step_big.errors + smooth_big.errors + step_small.errors +
                      smooth_small.errors ==
                  0,
              "fit errors occurred");
    // (a) LGCP finds high-risk areas better at large radius and strong signal
    c.require(step_big.auc_lgcp > step_big.auc_bym,
              "AUC step r10 c5: lgcp " + fmt(step_big.auc_lgcp) + " <= bym " +
                  fmt(step_big.auc_bym));
    c.require(smooth_big.auc_lgcp > smooth_big.auc_bym,
              "AUC smooth r10 c5: lgcp " + fmt(smooth_big.auc_lgcp) + " <= bym " +
                  fmt(smooth_big.auc_bym));
    // (b) LGCP recovers the smooth large-radius surface better
    c.require(smooth_big.rmise_lgcp < smooth_big.rmise_bym,
              "RMISE smooth r10 c5: lgcp " + fmt(smooth_big.rmise_lgcp) + " >= bym " +
                  fmt(smooth_big.rmise_bym));
    // (c) the small-radius reversal favours BYM
    c.require(step_small.rmise_bym < step_small.rmise_lgcp,
              "RMISE step r1 c2: bym " + fmt(step_small.rmise_bym) + " >= lgcp " +
                  fmt(step_small.rmise_lgcp));
    c.require(smooth_small.rmise_bym < smooth_small.rmise_lgcp,
              "RMISE smooth r1 c2: bym " + fmt(smooth_small.rmise_bym) + " >= lgcp " +
                  fmt(smooth_small.rmise_lgcp));

    c.note("AUC(step r10): lgcp=" + fmt(step_big.auc_lgcp) + " bym=" +
           fmt(step_big.auc_bym) + "; AUC(smooth r10): lgcp=" + fmt(smooth_big.auc_lgcp) +
           " bym=" + fmt(smooth_big.auc_bym) + "; RMISE(smooth r10): lgcp=" +
           fmt(smooth_big.rmise_lgcp) + " bym=" + fmt(smooth_big.rmise_bym) +
           "; RMISE(step r1): bym=" + fmt(step_small.rmise_bym) + " lgcp=" +
           fmt(step_small.rmise_lgcp) + "; RMISE(smooth r1): bym=" +
           fmt(smooth_small.rmise_bym) + " lgcp=" + fmt(smooth_small.rmise_lgcp) +
           "; time=" + fmt(seconds_since(t0)) + "s");
    return c;
}

Check criterion7_coverage(int jobs) {
    Check c;
    const SimOutcome smooth_mid = run_desk_scenario(SurfaceShape::smooth, 5000.0, 5.0, jobs);
    c.require(smooth_mid.errors == 0, "fit errors occurred");
    c.require(smooth_mid.pj_lgcp >= smooth_mid.pj_bym,
              "coverage smooth r5 c5: lgcp " + fmt(smooth_mid.pj_lgcp) + " < bym " +
                  fmt(smooth_mid.pj_bym));
    c.note("p_j lgcp=" + fmt(smooth_mid.pj_lgcp) + " bym=" + fmt(smooth_mid.pj_bym));
    return c;
}

// ---------------------------------------------------------------- criterion 8
Check criterion8_metrics_suite() {
    Check c;
    // degenerate posterior -> zero RMISE
    {
        EvalGrid grid;
        grid.window = Window(0, 0, 2, 1);
        grid.cell_size = 1.0;
        grid.nrows = 1;
        grid.ncols = 2;
        grid.population = {1, 1};
        const std::vector<double> truth = {0.1, 0.2};
        Eigen::MatrixXd samples(150, 2);
        samples.col(0).setConstant(std::log(0.1));
        samples.col(1).setConstant(std::log(0.2));
        c.require(rmise(truth, samples, grid, BWeight::unit, RScale::log) == 0.0,
                  "degenerate RMISE not zero");
        samples.col(0).setConstant(std::log(0.1) + 0.25);
        samples.col(1).setConstant(std::log(0.2));
        const double expected = std::sqrt(1.0 * 0.25 * 0.25);
        c.require(std::abs(rmise(truth, samples, grid, BWeight::unit, RScale::log) -
                           expected) < 1e-12,
                  "plug-in RMISE mismatch");
    }
    // coverage patterns
    {
        const auto cov = coverage({{1, 0}, {0, 1}});
        c.require(cov.p_g[0] == 0.5 && cov.p_j[0] == 0.5, "half-coverage pattern");
    }
    // ROC identities
    {
        const std::vector<char> truth = {1, 1, 0, 0};
        const std::vector<double> w = {1, 1, 1, 1};
        const auto q = MetricsConfig::default_q_grid();
        c.require(roc_auc(truth, {0.9, 0.8, 0.2, 0.1}, w, q).auc == 1.0, "perfect AUC");
        c.require(std::abs(roc_auc(truth, {0.4, 0.4, 0.4, 0.4}, w, q).auc - 0.5) < 1e-12,
                  "chance AUC");
    }
    // AUC invariance on 100 random score vectors
    {
        Rng rng(2718);
        const auto q = MetricsConfig::default_q_grid();
        int tested = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 25;
            std::vector<char> truth(n);
            std::vector<double> scores(n), w(n);
            int pos = 0;
            for (int i = 0; i < n; ++i) {
                truth[i] = rng.uniform() < 0.5 ? 1 : 0;
                pos += truth[i];
                scores[i] = rng.uniform();
                w[i] = 0.5 + rng.uniform();
            }
            if (pos == 0 || pos == n) continue;
            ++tested;
            const double base = roc_auc(truth, scores, w, q).auc;
            auto trans = scores;
            const double a = 0.5 + 2.0 * rng.uniform();
            for (auto& s : trans) s = std::exp(a * s) + 0.1 * s;
            const double after = roc_auc(truth, trans, w, q).auc;
            if (std::abs(base - after) > 1e-12) {
                c.require(false, "AUC changed under monotone transform (trial " +
                                     std::to_string(trial) + ")");
                break;
            }
        }
        c.require(tested >= 90, "too few usable random vectors");
    }
    // percentile conventions
    c.require(scenario_summary({1.0, 2.0, 3.0}).median == 2.0, "median of {1,2,3}");
    {
        const auto s = scenario_summary({4.2});
        c.require(s.median == 4.2 && s.lo == 4.2 && s.hi == 4.2, "single-value percentiles");
    }
    return c;
}

// ---------------------------------------------------------------- criterion 9
Check criterion9_determinism() {
    Check c;
    ScenarioConfig cfg;
    cfg.scenario_id = "det";
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
    cfg.samples = 150;

    const fs::path root = fs::temp_directory_path() / "riskfield_acceptance_det";
    fs::remove_all(root);
    for (const char* run : {"a", "b"}) {
        const std::string dir = (root / run).string();
        run_simulate(cfg, dir + "/data");
        run_fit_cmd(cfg, dir + "/data", dir + "/fits", run[0] == 'a' ? 3 : 1);
        run_evaluate_cmd(cfg, dir + "/data", dir + "/fits", dir + "/metrics");
    }
    int compared = 0;
    for (const char* sub : {"data", "fits", "metrics"}) {
        for (const auto& entry : fs::recursive_directory_iterator(root / "a" / sub)) {
            if (!entry.is_regular_file()) continue;
            if (entry.path().extension() != ".csv" && entry.path().extension() != ".txt") {
                continue; // diagnostics JSONL carries wall-clock runtimes
            }
            const auto rel = fs::relative(entry.path(), root / "a");
            std::ifstream fa(entry.path(), std::ios::binary);
            std::ifstream fb(root / "b" / rel, std::ios::binary);
            std::ostringstream sa, sb;
            sa << fa.rdbuf();
            sb << fb.rdbuf();
            if (sa.str() != sb.str()) {
                c.require(false, "file differs between runs: " + rel.string());
            }
            ++compared;
        }
    }
    c.require(compared >= 10, "too few files compared (" + std::to_string(compared) + ")");
    c.note(std::to_string(compared) + " files byte-identical");
    fs::remove_all(root);
    return c;
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    int jobs = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            std::istringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
        } else if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc) {
            jobs = std::stoi(argv[++i]);
        }
    }
    const int effective_jobs = resolve_jobs(jobs);

    struct Item {
        int id;
        const char* name;
        std::function<Check()> run;
    };
    const std::vector<Item> items = {
        {1, "SPDE covariance fidelity", criterion1_spde_fidelity},
        {2, "ICAR scaling", criterion2_icar_scaling},
        {3, "prior calibrations", criterion3_priors},
        {4, "inference oracle", criterion4_inference_oracle},
        {5, "simulation closure", criterion5_simulation_closure},
        {6, "directional reproduction",
         [effective_jobs] { return criterion6_directional(effective_jobs); }},
        {7, "coverage direction",
         [effective_jobs] { return criterion7_coverage(effective_jobs); }},
        {8, "metrics unit suite", criterion8_metrics_suite},
        {9, "end-to-end determinism", criterion9_determinism},
    };

    int failures = 0;
    for (const auto& item : items) {
        if (!only.empty() && only.count(item.id) == 0) continue;
        Check c;
        try {
            c = item.run();
        } catch (const std::exception& e) {
            c.pass = false;
            c.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d (%s)%s%s\n", c.pass ? "PASS" : "FAIL", item.id,
                    item.name, c.detail.empty() ? "" : ": ", c.detail.c_str());
        std::fflush(stdout);
        if (!c.pass) ++failures;
    }
    return failures;
}

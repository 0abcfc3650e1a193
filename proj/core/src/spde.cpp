#include "riskfield/spde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace riskfield {

Mesh build_mesh(const Window& window, double spacing, double extension) {
    if (spacing <= 0.0) throw ConfigError("build_mesh: spacing must be positive");
    if (extension < 0.0) throw ConfigError("build_mesh: extension must be non-negative");

    Mesh mesh;
    mesh.window = window;
    mesh.extension = extension;
    mesh.x0 = window.xmin - extension;
    mesh.y0 = window.ymin - extension;
    const double w = window.width() + 2.0 * extension;
    const double h = window.height() + 2.0 * extension;
    const int ix = std::max(1, static_cast<int>(std::ceil(w / spacing - 1e-9)));
    const int iy = std::max(1, static_cast<int>(std::ceil(h / spacing - 1e-9)));
    mesh.dx = w / ix;
    mesh.dy = h / iy;
    mesh.nx = ix + 1;
    mesh.ny = iy + 1;

    mesh.nodes.reserve(static_cast<std::size_t>(mesh.nx) * mesh.ny);
    mesh.interior.reserve(mesh.nodes.capacity());
    for (int r = 0; r < mesh.ny; ++r) {
        for (int c = 0; c < mesh.nx; ++c) {
            const Point p{mesh.x0 + c * mesh.dx, mesh.y0 + r * mesh.dy};
            mesh.nodes.push_back(p);
            mesh.interior.push_back(window.contains(p));
        }
    }
    auto nid = [&](int r, int c) { return r * mesh.nx + c; };
    mesh.triangles.reserve(static_cast<std::size_t>(ix) * iy * 2);
    for (int r = 0; r < iy; ++r) {
        for (int c = 0; c < ix; ++c) {
            const int bl = nid(r, c), br = nid(r, c + 1);
            const int tl = nid(r + 1, c), tr = nid(r + 1, c + 1);
            mesh.triangles.push_back({bl, br, tr});
            mesh.triangles.push_back({bl, tr, tl});
        }
    }
    return mesh;
}

double default_mesh_extension(const Window& window) { return 0.5 * window.diameter(); }

FemMatrices assemble_fem(const Mesh& mesh) {
    const int n = mesh.node_count();
    FemMatrices fem;
    fem.c_lumped = Eigen::VectorXd::Zero(n);

    std::vector<Eigen::Triplet<double>> off; // strictly off-diagonal stiffness entries
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);

    for (const auto& tri : mesh.triangles) {
        const Point a = mesh.nodes[tri[0]];
        const Point b = mesh.nodes[tri[1]];
        const Point c = mesh.nodes[tri[2]];
        const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        const double area = 0.5 * det;
        if (!(area > 1e-12)) throw DomainError("assemble_fem: degenerate triangle");
        fem.mesh_area += area;

        // constant element gradients of the three hat functions
        const double gx[3] = {(b.y - c.y) / det, (c.y - a.y) / det, (a.y - b.y) / det};
        const double gy[3] = {(c.x - b.x) / det, (a.x - c.x) / det, (b.x - a.x) / det};
        for (int i = 0; i < 3; ++i) {
            fem.c_lumped[tri[i]] += area / 3.0;
            for (int j = i + 1; j < 3; ++j) {
                const double k = area * (gx[i] * gx[j] + gy[i] * gy[j]);
                off.emplace_back(tri[i], tri[j], k);
                off.emplace_back(tri[j], tri[i], k);
            }
        }
    }

    // diagonal as negative row sum keeps row sums exactly zero
    Eigen::SparseMatrix<double> g(n, n);
    g.setFromTriplets(off.begin(), off.end());
    for (int k = 0; k < g.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(g, k); it; ++it) {
            diag[it.row()] -= it.value();
        }
    }
    std::vector<Eigen::Triplet<double>> all;
    all.reserve(off.size() + n);
    for (const auto& t : off) all.push_back(t);
    for (int i = 0; i < n; ++i) all.emplace_back(i, i, diag[i]);
    Eigen::SparseMatrix<double> gfull(n, n);
    gfull.setFromTriplets(all.begin(), all.end());
    fem.stiffness = SparseSymMatrix::from_symmetric(gfull);
    return fem;
}

SparseSymMatrix spde_precision(const FemMatrices& fem, const MaternHyper& hyper) {
    if (!(hyper.rho > 0.0) || !(hyper.sigma > 0.0)) {
        throw ConfigError("spde_precision: rho and sigma must be positive");
    }
    const double kappa = std::sqrt(8.0) / hyper.rho;
    const double tau2 =
        1.0 / (4.0 * std::numbers::pi * kappa * kappa * hyper.sigma * hyper.sigma);

    const Eigen::SparseMatrix<double> g = fem.stiffness.full();
    const int n = static_cast<int>(g.rows());
    Eigen::VectorXd cinv = fem.c_lumped.cwiseInverse();
    Eigen::SparseMatrix<double> gcg = g * cinv.asDiagonal() * g;

    Eigen::SparseMatrix<double> cmat(n, n);
    {
        std::vector<Eigen::Triplet<double>> ts;
        ts.reserve(n);
        for (int i = 0; i < n; ++i) ts.emplace_back(i, i, fem.c_lumped[i]);
        cmat.setFromTriplets(ts.begin(), ts.end());
    }
    const double k2 = kappa * kappa;
    Eigen::SparseMatrix<double> q = tau2 * (k2 * k2 * cmat + 2.0 * k2 * g + gcg);
    return SparseSymMatrix::from_symmetric(q);
}

double matern_covariance(double h, const MaternHyper& hyper) {
    if (h < 0.0) throw DomainError("matern_covariance: distance must be non-negative");
    const double s2 = hyper.sigma * hyper.sigma;
    if (h == 0.0) return s2;
    const double x = std::sqrt(8.0) / hyper.rho * h;
    return s2 * x * std::cyl_bessel_k(1.0, x);
}

Projector make_projector(const Mesh& mesh, std::span<const Point> points) {
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(points.size() * 3);
    const double xmax = mesh.x0 + (mesh.nx - 1) * mesh.dx;
    const double ymax = mesh.y0 + (mesh.ny - 1) * mesh.dy;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const Point pt = points[p];
        if (pt.x < mesh.x0 - 1e-9 || pt.x > xmax + 1e-9 || pt.y < mesh.y0 - 1e-9 ||
            pt.y > ymax + 1e-9) {
            throw DomainError("projector: point outside mesh hull");
        }
        int cx = static_cast<int>((pt.x - mesh.x0) / mesh.dx);
        int cy = static_cast<int>((pt.y - mesh.y0) / mesh.dy);
        cx = std::clamp(cx, 0, mesh.nx - 2);
        cy = std::clamp(cy, 0, mesh.ny - 2);
        const double u = (pt.x - (mesh.x0 + cx * mesh.dx)) / mesh.dx;
        const double v = (pt.y - (mesh.y0 + cy * mesh.dy)) / mesh.dy;
        const int bl = cy * mesh.nx + cx, br = bl + 1;
        const int tl = bl + mesh.nx, tr = tl + 1;
        // diagonal bl-tr splits the cell; barycentric weights are affine in (u, v)
        auto push = [&](int node, double w) {
            if (w != 0.0) ts.emplace_back(static_cast<int>(p), node, w);
        };
        if (u >= v) {
            push(bl, 1.0 - u);
            push(br, u - v);
            push(tr, v);
        } else {
            push(bl, 1.0 - v);
            push(tr, u);
            push(tl, v - u);
        }
    }
    Projector proj;
    proj.a.resize(static_cast<int>(points.size()), mesh.node_count());
    proj.a.setFromTriplets(ts.begin(), ts.end());
    proj.a.makeCompressed();
    return proj;
}

double PcPriorRangeSigma::log_density(double rho, double sigma) const {
    if (!(rho > 0.0) || !(sigma > 0.0)) {
        throw DomainError("pc prior (rho,sigma): arguments must be positive");
    }
    return std::log(lambda_rho) - 2.0 * std::log(rho) - lambda_rho / rho +
           std::log(lambda_sigma) - lambda_sigma * sigma;
}

PcPriorRangeSigma make_pc_prior_range_sigma(double rho0, double alpha_rho, double sigma0,
                                            double alpha_sigma) {
    if (rho0 <= 0.0 || sigma0 <= 0.0 || alpha_rho <= 0.0 || alpha_rho >= 1.0 ||
        alpha_sigma <= 0.0 || alpha_sigma >= 1.0) {
        throw ConfigError("pc prior (rho,sigma): invalid calibration");
    }
    return {-rho0 * std::log(alpha_rho), -std::log(alpha_sigma) / sigma0};
}

double pc_log_prior_range_sigma(const MaternHyper& hyper) {
    return make_pc_prior_range_sigma().log_density(hyper.rho, hyper.sigma);
}

} // namespace riskfield

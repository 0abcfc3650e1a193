#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>

#include "riskfield/rng.hpp"

namespace testutil {

// Adaptive Simpson quadrature (oracle-grade; independent of library code).
inline double simpson_rec(const std::function<double(double)>& f, double a, double b,
                          double fa, double fm, double fb, double whole, double tol,
                          int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int depth = 60) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Random sparse-ish SPD matrix: A = B B^T + shift I with banded random B.
inline Eigen::MatrixXd random_spd(int n, std::uint64_t seed, double shift = 0.5) {
    riskfield::Rng rng(seed);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = std::max(0, i - 3); j <= i; ++j) {
            b(i, j) = 2.0 * rng.uniform() - 1.0;
        }
    }
    return b * b.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
}

// Dense marginal variances of the pseudo-inverse (null space dropped).
inline Eigen::VectorXd pinv_diagonal(const Eigen::MatrixXd& q, double tol = 1e-9) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
    const double cutoff = tol * std::max(1.0, eig.eigenvalues().maxCoeff());
    Eigen::VectorXd d = Eigen::VectorXd::Zero(q.rows());
    for (int l = 0; l < q.rows(); ++l) {
        if (eig.eigenvalues()[l] > cutoff) {
            d += eig.eigenvectors().col(l).cwiseAbs2() / eig.eigenvalues()[l];
        }
    }
    return d;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace testutil

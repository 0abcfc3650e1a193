#include "riskfield/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace riskfield {

SparseSymMatrix SparseSymMatrix::from_triplets(
    int n, const std::vector<Eigen::Triplet<double>>& entries) {
    std::vector<Eigen::Triplet<double>> lower_entries;
    lower_entries.reserve(entries.size());
    for (const auto& t : entries) {
        if (!std::isfinite(t.value())) {
            throw DomainError("SparseSymMatrix: non-finite entry");
        }
        const int r = std::max(t.row(), t.col());
        const int c = std::min(t.row(), t.col());
        lower_entries.emplace_back(r, c, t.value());
    }
    SparseSymMatrix m(n);
    m.lower_.setFromTriplets(lower_entries.begin(), lower_entries.end());
    m.lower_.makeCompressed();
    return m;
}

SparseSymMatrix SparseSymMatrix::identity(int n, double value) {
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(n);
    for (int i = 0; i < n; ++i) ts.emplace_back(i, i, value);
    return from_triplets(n, ts);
}

SparseSymMatrix SparseSymMatrix::from_symmetric(const Eigen::SparseMatrix<double>& sym) {
    SparseSymMatrix m(static_cast<int>(sym.rows()));
    m.lower_ = sym.triangularView<Eigen::Lower>();
    m.lower_.makeCompressed();
    for (int k = 0; k < m.lower_.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m.lower_, k); it; ++it) {
            if (!std::isfinite(it.value())) {
                throw DomainError("SparseSymMatrix: non-finite entry");
            }
        }
    }
    return m;
}

SparseSymMatrix SparseSymMatrix::scaled(double a) const {
    SparseSymMatrix m(dim());
    m.lower_ = lower_ * a;
    return m;
}

ConstraintSet ConstraintSet::sum_to_zero(int n, int begin, int end) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, n);
    for (int i = begin; i < end; ++i) a(0, i) = 1.0;
    return {a};
}

namespace {

using Llt = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                                 Eigen::AMDOrdering<int>>;

struct FactorParts {
    Eigen::SparseMatrix<double> l;
    Eigen::VectorXi perm, perm_inv;
    bool ok = false;
};

FactorParts try_factor(const Eigen::SparseMatrix<double>& full) {
    Llt llt;
    llt.compute(full);
    FactorParts parts;
    if (llt.info() != Eigen::Success) return parts;
    parts.l = llt.matrixL();
    parts.l.makeCompressed();
    // guard against non-positive or vanishing pivots that slipped through
    // (semi-definite inputs can produce a spurious ~sqrt(eps) pivot)
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (int j = 0; j < parts.l.outerSize(); ++j) {
        const double d = parts.l.coeff(j, j);
        if (!(d > 0.0) || !std::isfinite(d)) return parts;
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
    }
    if (dmin < 1e-7 * dmax) return parts;
    const auto& idx = llt.permutationP().indices();
    const int n = static_cast<int>(full.rows());
    parts.perm.resize(n);
    parts.perm_inv.resize(n);
    // Eigen convention: (P x)_{indices(i)} = x_i, i.e. indices maps
    // original -> permuted position.
    for (int i = 0; i < n; ++i) {
        parts.perm_inv[i] = idx[i];
        parts.perm[idx[i]] = i;
    }
    parts.ok = true;
    return parts;
}

} // namespace

CholeskyFactor::CholeskyFactor(const SparseSymMatrix& q, JitterPolicy jitter) {
    n_ = q.dim();
    if (n_ == 0) throw DomainError("cholesky: empty matrix");
    Eigen::SparseMatrix<double> full = q.full();

    FactorParts parts = try_factor(full);
    if (!parts.ok && jitter == JitterPolicy::adaptive) {
        const double mean_diag = q.diagonal().sum() / n_;
        double eps = 1e-9 * std::abs(mean_diag);
        if (eps <= 0.0) eps = 1e-12;
        const double eps_max = 1e-3 * std::max(std::abs(mean_diag), 1.0);
        Eigen::SparseMatrix<double> eye(n_, n_);
        eye.setIdentity();
        while (!parts.ok && eps <= eps_max) {
            Eigen::SparseMatrix<double> shifted = full + eps * eye;
            parts = try_factor(shifted);
            if (parts.ok) jitter_ = eps;
            eps *= 10.0;
        }
    }
    if (!parts.ok) {
        throw SingularityError("cholesky: matrix is not positive definite" +
                               std::string(jitter == JitterPolicy::adaptive
                                               ? " (max jitter exhausted)"
                                               : ""));
    }
    l_ = std::move(parts.l);
    perm_ = std::move(parts.perm);
    perm_inv_ = std::move(parts.perm_inv);
}

double CholeskyFactor::logdet() const {
    double s = 0.0;
    for (int j = 0; j < n_; ++j) s += std::log(l_.coeff(j, j));
    return 2.0 * s;
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b) const {
    if (b.size() != n_) throw DomainError("cholesky solve: dimension mismatch");
    // Q = P^T L L^T P with (P x)_{perm_inv[i]} = x_i.
    Eigen::VectorXd pb(n_);
    for (int i = 0; i < n_; ++i) pb[perm_inv_[i]] = b[i];
    Eigen::VectorXd y = l_.triangularView<Eigen::Lower>().solve(pb);
    Eigen::VectorXd w = l_.transpose().triangularView<Eigen::Upper>().solve(y);
    Eigen::VectorXd x(n_);
    for (int i = 0; i < n_; ++i) x[i] = w[perm_inv_[i]];
    return x;
}

Eigen::MatrixXd CholeskyFactor::solve_dense(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd x(b.rows(), b.cols());
    for (int c = 0; c < b.cols(); ++c) x.col(c) = solve(b.col(c));
    return x;
}

Eigen::VectorXd CholeskyFactor::sample(const Eigen::VectorXd& mean, Rng& rng) const {
    if (mean.size() != n_) throw DomainError("cholesky sample: dimension mismatch");
    Eigen::VectorXd z(n_);
    for (int i = 0; i < n_; ++i) z[i] = rng.normal();
    // x = mean + P^T L^{-T} z has covariance Q^{-1}
    Eigen::VectorXd w = l_.transpose().triangularView<Eigen::Upper>().solve(z);
    Eigen::VectorXd x(n_);
    for (int i = 0; i < n_; ++i) x[i] = mean[i] + w[perm_inv_[i]];
    return x;
}

CholeskyFactor cholesky(const SparseSymMatrix& q, JitterPolicy jitter) {
    return CholeskyFactor(q, jitter);
}

Eigen::VectorXd solve(const CholeskyFactor& f, const Eigen::VectorXd& b) {
    return f.solve(b);
}

double logdet(const CholeskyFactor& f) { return f.logdet(); }

Eigen::VectorXd sample_gaussian(const CholeskyFactor& f, const Eigen::VectorXd& mean,
                                std::uint64_t seed) {
    Rng rng(seed);
    return f.sample(mean, rng);
}

Eigen::VectorXd sample_gaussian(const CholeskyFactor& f, const Eigen::VectorXd& mean,
                                Rng& rng) {
    return f.sample(mean, rng);
}

Eigen::VectorXd sample_constrained(const CholeskyFactor& f, const Eigen::VectorXd& mean,
                                   const ConstraintSet& c, Rng& rng) {
    Eigen::VectorXd x = f.sample(mean, rng);
    const int k = c.count();
    if (k == 0) return x;
    Eigen::MatrixXd w = f.solve_dense(c.a.transpose()); // Q^{-1} A^T
    Eigen::MatrixXd s = c.a * w;                        // A Q^{-1} A^T
    Eigen::FullPivLU<Eigen::MatrixXd> lu(s);
    if (!lu.isInvertible()) {
        throw SingularityError("sample_constrained: singular constraint system");
    }
    x -= w * lu.solve(c.a * x);
    return x;
}

Eigen::VectorXd sample_constrained(const CholeskyFactor& f, const Eigen::VectorXd& mean,
                                   const ConstraintSet& c, std::uint64_t seed) {
    Rng rng(seed);
    return sample_constrained(f, mean, c, rng);
}

SelectedInverse::SelectedInverse(const CholeskyFactor& f)
    : z_(f.matrix_l()), perm_inv_(f.dim()) {
    for (int i = 0; i < f.dim(); ++i) perm_inv_[i] = f.permuted_index(i);
    const Eigen::SparseMatrix<double>& l = f.matrix_l();
    const int n = static_cast<int>(l.rows());
    const int* outer = l.outerIndexPtr();
    const int* inner = l.innerIndexPtr();
    const double* lv = l.valuePtr();
    double* zv = z_.valuePtr();

    auto z_at = [&](int row, int col) -> double {
        // binary search in column col (row >= col); pattern-closed lookups only
        const int lo = outer[col], hi = outer[col + 1];
        const int* first = inner + lo;
        const int* last = inner + hi;
        const int* it = std::lower_bound(first, last, row);
        if (it == last || *it != row) return 0.0; // outside pattern (cancelled fill)
        return zv[lo + (it - first)];
    };

    for (int j = n - 1; j >= 0; --j) {
        const int start = outer[j], end = outer[j + 1];
        const double ljj = lv[start]; // diagonal entry comes first in a sorted column
        for (int q = end - 1; q >= start; --q) {
            const int i = inner[q];
            double sum = 0.0;
            for (int t = start + 1; t < end; ++t) {
                const int k = inner[t];
                sum += (lv[t] / ljj) * z_at(std::max(k, i), std::min(k, i));
            }
            zv[q] = (i == j ? 1.0 / (ljj * ljj) : 0.0) - sum;
        }
    }

    diag_.resize(n);
    for (int i = 0; i < n; ++i) {
        const int p = perm_inv_[i];
        diag_[i] = z_at(p, p);
    }
}

double SelectedInverse::lookup_permuted(int row, int col) const {
    const int lo = z_.outerIndexPtr()[col], hi = z_.outerIndexPtr()[col + 1];
    const int* inner = z_.innerIndexPtr();
    const int* it = std::lower_bound(inner + lo, inner + hi, row);
    return (it != inner + hi && *it == row) ? z_.valuePtr()[lo + (it - (inner + lo))] : 0.0;
}

std::optional<double> SelectedInverse::covariance(int i, int j) const {
    const int pi = perm_inv_[i], pj = perm_inv_[j];
    const int row = std::max(pi, pj), col = std::min(pi, pj);
    const int lo = z_.outerIndexPtr()[col], hi = z_.outerIndexPtr()[col + 1];
    const int* inner = z_.innerIndexPtr();
    const int* it = std::lower_bound(inner + lo, inner + hi, row);
    if (it == inner + hi || *it != row) return std::nullopt;
    return z_.valuePtr()[lo + (it - (inner + lo))];
}

Eigen::VectorXd selected_inverse_diagonal(const CholeskyFactor& f) {
    return SelectedInverse(f).diagonal();
}

} // namespace riskfield

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "riskfield/errors.hpp"
#include "riskfield/rng.hpp"

namespace riskfield {

/// Sparse symmetric matrix, stored as its lower triangle.
class SparseSymMatrix {
public:
    SparseSymMatrix() = default;
    explicit SparseSymMatrix(int n) : lower_(n, n) {}

    /// Builds from triplets; entries from either triangle are mirrored to the
    /// lower one and duplicates are summed. Rejects NaN/Inf values.
    static SparseSymMatrix from_triplets(int n,
                                         const std::vector<Eigen::Triplet<double>>& entries);
    static SparseSymMatrix identity(int n, double value = 1.0);
    /// Takes the lower triangle of an assembled symmetric Eigen matrix.
    static SparseSymMatrix from_symmetric(const Eigen::SparseMatrix<double>& sym);

    int dim() const { return static_cast<int>(lower_.rows()); }
    const Eigen::SparseMatrix<double>& lower() const { return lower_; }
    Eigen::SparseMatrix<double> full() const {
        return lower_.selfadjointView<Eigen::Lower>();
    }

    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
        return lower_.selfadjointView<Eigen::Lower>() * x;
    }
    double quad_form(const Eigen::VectorXd& x) const { return x.dot(multiply(x)); }
    Eigen::VectorXd diagonal() const { return lower_.diagonal(); }
    SparseSymMatrix scaled(double a) const;

private:
    Eigen::SparseMatrix<double> lower_;
};

/// Hard linear constraints A x = 0; rows must be linearly independent.
struct ConstraintSet {
    Eigen::MatrixXd a; // k x n, k may be zero

    int count() const { return static_cast<int>(a.rows()); }
    static ConstraintSet none(int n) { return {Eigen::MatrixXd(0, n)}; }
    /// Single all-ones row over [begin, end).
    static ConstraintSet sum_to_zero(int n, int begin, int end);
};

enum class JitterPolicy { none, adaptive };

/// Sparse Cholesky factorization P Q P^T = L L^T with AMD fill-reducing
/// ordering. Immutable after construction; safe for concurrent solves.
class CholeskyFactor {
public:
    CholeskyFactor(const SparseSymMatrix& q, JitterPolicy jitter = JitterPolicy::none);

    int dim() const { return n_; }
    double logdet() const;
    double jitter_used() const { return jitter_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd solve_dense(const Eigen::MatrixXd& b) const;

    /// Draw from N(mean, Q^{-1}).
    Eigen::VectorXd sample(const Eigen::VectorXd& mean, Rng& rng) const;

    /// Lower factor (CSC, sorted) and the permutation p with
    /// (P Q P^T)_{ij} = Q_{p_i p_j}.
    const Eigen::SparseMatrix<double>& matrix_l() const { return l_; }
    const Eigen::VectorXi& permutation() const { return perm_; }
    /// Position of original index i in the permuted ordering.
    int permuted_index(int i) const { return perm_inv_[i]; }

private:
    int n_ = 0;
    double jitter_ = 0.0;
    Eigen::SparseMatrix<double> l_;
    Eigen::VectorXi perm_;     // permuted -> original
    Eigen::VectorXi perm_inv_; // original -> permuted
};

CholeskyFactor cholesky(const SparseSymMatrix& q, JitterPolicy jitter = JitterPolicy::none);
Eigen::VectorXd solve(const CholeskyFactor& f, const Eigen::VectorXd& b);
double logdet(const CholeskyFactor& f);
Eigen::VectorXd sample_gaussian(const CholeskyFactor& f, const Eigen::VectorXd& mean,
                                std::uint64_t seed);
Eigen::VectorXd sample_gaussian(const CholeskyFactor& f, const Eigen::VectorXd& mean,
                                Rng& rng);

/// Conditioning-by-kriging: x* = x - Q^{-1} A^T (A Q^{-1} A^T)^{-1} A x,
/// which satisfies A x* = 0 exactly and has the conditioned distribution.
Eigen::VectorXd sample_constrained(const CholeskyFactor& f, const Eigen::VectorXd& mean,
                                   const ConstraintSet& c, std::uint64_t seed);
Eigen::VectorXd sample_constrained(const CholeskyFactor& f, const Eigen::VectorXd& mean,
                                   const ConstraintSet& c, Rng& rng);

/// Takahashi recursion over the factor pattern: every entry of Q^{-1} whose
/// position falls in the pattern of L + L^T, in particular the full diagonal.
class SelectedInverse {
public:
    explicit SelectedInverse(const CholeskyFactor& f);

    const Eigen::VectorXd& diagonal() const { return diag_; }
    double variance(int i) const { return diag_[i]; }
    /// Covariance (Q^{-1})_{ij} if (i,j) lies in the factor pattern.
    std::optional<double> covariance(int i, int j) const;

private:
    double lookup_permuted(int row, int col) const; // row >= col, factor pattern

    Eigen::SparseMatrix<double> z_; // pattern of L, values of (L L^T)^{-1}
    Eigen::VectorXi perm_inv_;
    Eigen::VectorXd diag_;
};

Eigen::VectorXd selected_inverse_diagonal(const CholeskyFactor& f);

} // namespace riskfield

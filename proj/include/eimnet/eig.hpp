#pragma once

#include "eimnet/errors.hpp"
#include "eimnet/lti.hpp"

#include <Eigen/Eigenvalues>

#include <vector>

namespace eimnet {

/// A = R * diag(values) * T with T * R = I.
struct EigenDecomposition {
    CVector values;
    CMatrix right;  ///< columns r_k
    CMatrix left;   ///< rows t_k

    Index size() const { return values.size(); }
    /// Participation matrix r_k t_k of eigenvalue k.
    CMatrix participation(Index k) const { return right.col(k) * left.row(k); }
};

/// Eigen-decomposition with bi-orthonormal left eigenvectors (T = R^{-1}).
/// Throws DefectiveMatrix when the eigenvector matrix condition number exceeds `condition_cap`.
template <typename Derived>
EigenDecomposition eig_lr(const Eigen::MatrixBase<Derived>& a, double condition_cap = 1e12) {
    static_assert(Derived::RowsAtCompileTime == Eigen::Dynamic || Derived::RowsAtCompileTime == Derived::ColsAtCompileTime);
    if (a.rows() != a.cols()) throw DimensionMismatch("eig_lr needs a square matrix");
    const CMatrix ac = a.template cast<cplx>();
    Eigen::ComplexEigenSolver<CMatrix> solver(ac, true);
    if (solver.info() != Eigen::Success) throw DefectiveMatrix(INFINITY);

    EigenDecomposition out;
    out.values = solver.eigenvalues();
    out.right = solver.eigenvectors();
    for (Index k = 0; k < out.right.cols(); ++k) out.right.col(k).normalize();

    Eigen::PartialPivLU<CMatrix> lu(out.right);
    const double rcond = lu.rcond();
    if (!(rcond > 0.0) || 1.0 / rcond > condition_cap) throw DefectiveMatrix(rcond > 0.0 ? 1.0 / rcond : INFINITY);
    out.left = lu.inverse();
    return out;
}

/// Index pairing of two eigenvalue sets: perm[i] is the entry of `next` matched to `prev[i]`.
/// Greedy over globally ascending pair distance.
std::vector<Index> match_eigenvalues(const CVector& prev, const CVector& next);

struct EigenLociOptions {
    EvalOptions eval{};
    /// Relative displacement (vs. local eigenvalue magnitude) that triggers step bisection.
    double bisect_threshold = 0.2;
    int max_bisect_depth = 6;
};

/// Continuous eigenvalue traces of m(j 2 pi f).
struct EigenLoci {
    std::vector<double> freqs_hz;  ///< includes points inserted by bisection
    CMatrix values;                ///< rows: frequency points, cols: traces

    Index traces() const { return values.cols(); }
};

/// Throws the evaluation error annotated with the offending frequency when a point fails.
EigenLoci eig_loci(const TransferMatrix& m, const std::vector<double>& grid_hz, const EigenLociOptions& opts = {});

/// n points, log-spaced over [f_min, f_max].
std::vector<double> log_grid(double f_min, double f_max, int n);

}  // namespace eimnet

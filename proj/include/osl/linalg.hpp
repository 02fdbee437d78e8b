#ifndef OSL_LINALG_HPP
#define OSL_LINALG_HPP

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "osl/core.hpp"

namespace osl::linalg {

// Reciprocal-condition floor below which a symmetric matrix is treated as
// singular, even if the Cholesky pivots stayed positive through roundoff.
inline constexpr double kSingularRcond = 1e-13;

/// Cholesky factor of an SPD matrix; throws NumericDomainError otherwise.
[[nodiscard]] inline Eigen::LLT<Matrix> spd_factor(const Matrix& a, const std::string& what) {
    require(a.rows() == a.cols(), what + ": matrix must be square");
    if (!a.allFinite()) throw NumericDomainError(what + ": non-finite matrix entry");
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || !(llt.rcond() > kSingularRcond))
        throw NumericDomainError(what + ": matrix is not symmetric positive definite");
    return llt;
}

[[nodiscard]] inline bool is_spd(const Matrix& a) {
    if (a.rows() != a.cols() || !a.allFinite()) return false;
    Eigen::LLT<Matrix> llt(a);
    return llt.info() == Eigen::Success && llt.rcond() > kSingularRcond;
}

[[nodiscard]] inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

[[nodiscard]] inline Vector symmetric_eigenvalues(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericDomainError("symmetric eigensolve failed");
    return es.eigenvalues();
}

/// Eigenvalues of the pencil (a, b) with b SPD, ascending. Computed by
/// whitening with the Cholesky factor of b: L^{-1} a L^{-T}.
[[nodiscard]] inline Vector generalized_eigenvalues(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "generalized_eigenvalues: dimension mismatch");
    const auto llt = spd_factor(b, "generalized_eigenvalues");
    Matrix w = llt.matrixL().solve(a);
    w = llt.matrixL().solve(w.transpose()).transpose();
    return symmetric_eigenvalues(w);
}

} // namespace osl::linalg

#endif

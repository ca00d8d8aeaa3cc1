#pragma once

// Dense Sylvester and Lyapunov solvers (Bartels-Stewart on real Schur forms).
//
// Everything here works on a pair of real Schur factorizations so callers can
// factor a large operator once and reuse it across many right-hand sides.

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "netred/errors.hpp"

namespace netred {

/// A = Z T Z^T with Z orthogonal and T upper quasi-triangular.
template <typename Scalar = double>
struct RealSchurFactor {
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    MatrixType T;
    MatrixType Z;

    RealSchurFactor() = default;

    explicit RealSchurFactor(const MatrixType& a) {
        if (a.rows() == 0) {
            T.resize(0, 0);
            Z.resize(0, 0);
            return;
        }
        Eigen::RealSchur<MatrixType> schur(a, /*computeU=*/true);
        if (schur.info() != Eigen::Success) throw SylvesterSolveFailure("real Schur factorization did not converge");
        T = schur.matrixT();
        Z = schur.matrixU();
        // Eigen leaves tiny garbage below the quasi-triangular part.
        for (Eigen::Index j = 0; j < T.cols(); ++j)
            for (Eigen::Index i = j + 2; i < T.rows(); ++i) T(i, j) = Scalar(0);
    }

    Eigen::Index size() const { return T.rows(); }

    /// Largest real part over the eigenvalues of T.
    Scalar spectral_abscissa() const {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index k = 0; k < T.rows();) {
            if (k + 1 < T.rows() && T(k + 1, k) != Scalar(0)) {
                best = std::max(best, (T(k, k) + T(k + 1, k + 1)) / Scalar(2));
                k += 2;
            } else {
                best = std::max(best, T(k, k));
                k += 1;
            }
        }
        return best;
    }
};

namespace detail {

/// Start index and size (1 or 2) of each diagonal block of a quasi-triangular T.
template <typename MatrixType>
std::vector<std::pair<Eigen::Index, Eigen::Index>> diagonal_blocks(const MatrixType& t) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
    for (Eigen::Index k = 0; k < t.rows();) {
        const Eigen::Index size = (k + 1 < t.rows() && t(k + 1, k) != 0) ? 2 : 1;
        blocks.emplace_back(k, size);
        k += size;
    }
    return blocks;
}

}  // namespace detail

/// Solves T1 Y + Y T2^T = C for upper quasi-triangular T1 (p x p) and
/// T2 (q x q). Column blocks are swept right to left, row blocks bottom up;
/// each diagonal coupling is a Kronecker system of size at most 4.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_quasi_triangular_sylvester(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& t1,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& t2,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& c) {
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Small = Eigen::Matrix<Scalar, 4, 4>;
    using SmallVec = Eigen::Matrix<Scalar, 4, 1>;

    const Eigen::Index p = t1.rows();
    const Eigen::Index q = t2.rows();
    MatrixType y = MatrixType::Zero(p, q);
    if (p == 0 || q == 0) return y;

    const auto rows = detail::diagonal_blocks(t1);
    const auto cols = detail::diagonal_blocks(t2);
    const Scalar scale = std::max(t1.cwiseAbs().maxCoeff(), t2.cwiseAbs().maxCoeff());
    const Scalar tiny = std::numeric_limits<Scalar>::epsilon() * std::max(scale, Scalar(1)) * Scalar(16);

    for (auto cb = cols.rbegin(); cb != cols.rend(); ++cb) {
        const auto [j0, nj] = *cb;
        // Coupling with already solved columns to the right: Y_k T2(j, k)^T.
        MatrixType rhs = c.middleCols(j0, nj);
        const Eigen::Index right = q - (j0 + nj);
        if (right > 0) rhs.noalias() -= y.rightCols(right) * t2.block(j0, j0 + nj, nj, right).transpose();
        const MatrixType s = t2.block(j0, j0, nj, nj);

        for (auto rb = rows.rbegin(); rb != rows.rend(); ++rb) {
            const auto [i0, ni] = *rb;
            MatrixType r = rhs.middleRows(i0, ni);
            const Eigen::Index below = p - (i0 + ni);
            if (below > 0) r.noalias() -= t1.block(i0, i0 + ni, ni, below) * y.block(i0 + ni, j0, below, nj);

            // (I_nj (x) T1_ii + S (x) I_ni) vec(Y_ij) = vec(R)
            const Eigen::Index dim = ni * nj;
            Small k = Small::Zero();
            for (Eigen::Index b = 0; b < nj; ++b)
                for (Eigen::Index a = 0; a < nj; ++a)
                    for (Eigen::Index i = 0; i < ni; ++i) {
                        k(a * ni + i, b * ni + i) += s(a, b);
                        if (a == b)
                            for (Eigen::Index l = 0; l < ni; ++l) k(a * ni + i, b * ni + l) += t1(i0 + i, i0 + l);
                    }
            SmallVec rv = SmallVec::Zero();
            for (Eigen::Index b = 0; b < nj; ++b)
                for (Eigen::Index i = 0; i < ni; ++i) rv(b * ni + i) = r(i, b);

            const auto kd = k.topLeftCorner(dim, dim);
            Eigen::FullPivLU<MatrixType> lu(kd);
            const Scalar pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
            if (!(pivot > tiny))
                throw SylvesterSolveFailure("Sylvester operator is numerically singular (eigenvalues of the two "
                                            "coefficients nearly cancel)");
            const MatrixType sol = lu.solve(rv.head(dim));
            for (Eigen::Index b = 0; b < nj; ++b)
                for (Eigen::Index i = 0; i < ni; ++i) y(i0 + i, j0 + b) = sol(b * ni + i);
        }
    }
    return y;
}

/// Solves A X + X B^T = C given Schur factors of A and B.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_sylvester(
    const RealSchurFactor<Scalar>& a, const RealSchurFactor<Scalar>& b,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& c) {
    if (c.rows() != a.size() || c.cols() != b.size())
        throw InvalidArgument("Sylvester right-hand side has mismatched dimensions");
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> ct = a.Z.transpose() * c * b.Z;
    const auto y = solve_quasi_triangular_sylvester<Scalar>(a.T, b.T, ct);
    return a.Z * y * b.Z.transpose();
}

/// Solves A X + X B^T = C (dense convenience overload).
template <typename Derived1, typename Derived2, typename Derived3>
Eigen::Matrix<typename Derived1::Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_sylvester(
    const Eigen::MatrixBase<Derived1>& a, const Eigen::MatrixBase<Derived2>& b,
    const Eigen::MatrixBase<Derived3>& c) {
    using Scalar = typename Derived1::Scalar;
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    return solve_sylvester<Scalar>(RealSchurFactor<Scalar>(MatrixType(a)), RealSchurFactor<Scalar>(MatrixType(b)),
                                   MatrixType(c));
}

/// Solves A X + X A^T + Q = 0 for Hurwitz A; the result is symmetrized.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_lyapunov(
    const RealSchurFactor<Scalar>& a, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& q) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x = solve_sylvester<Scalar>(a, a, (-q).eval());
    return (x + x.transpose()) / Scalar(2);
}

template <typename Derived1, typename Derived2>
Eigen::Matrix<typename Derived1::Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_lyapunov(
    const Eigen::MatrixBase<Derived1>& a, const Eigen::MatrixBase<Derived2>& q) {
    using Scalar = typename Derived1::Scalar;
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    return solve_lyapunov<Scalar>(RealSchurFactor<Scalar>(MatrixType(a)), MatrixType(q));
}

namespace detail {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Upper-triangular R' with R' R'^H = R R^H + y y^H, by Givens rotations
/// that fold y into the columns of R from the last one up.
inline void triangular_rank_one_update(ComplexMatrix& r, ComplexVector y) {
    for (Eigen::Index j = r.cols() - 1; j >= 0; --j) {
        const std::complex<double> a = r(j, j), b = y(j);
        const double h = std::hypot(std::abs(a), std::abs(b));
        if (h == 0.0) continue;
        for (Eigen::Index i = 0; i <= j; ++i) {
            const std::complex<double> ri = r(i, j), yi = y(i);
            r(i, j) = (ri * std::conj(a) + yi * std::conj(b)) / h;
            y(i) = (-ri * b + yi * a) / h;
        }
        y(j) = 0.0;
    }
}

}  // namespace detail

/// Square-root Lyapunov solver. For Hurwitz A returns S with
/// A P + P A^T + B B^T = 0 and P = S S^H (complex Schur form, Hammarling's
/// recursion). Small quadratic forms x^T P x are then computed as ||x^T S||
/// without the cancellation of forming P.
inline Eigen::MatrixXcd lyapunov_factor(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    using detail::ComplexMatrix;
    using detail::ComplexVector;
    const Eigen::Index n = a.rows();
    if (n == 0) return ComplexMatrix(0, 0);
    Eigen::ComplexSchur<Eigen::MatrixXd> schur(a);
    if (schur.info() != Eigen::Success) throw LyapunovSolveFailure("complex Schur factorization did not converge");
    const ComplexMatrix& t = schur.matrixT();
    const ComplexMatrix& z = schur.matrixU();

    ComplexMatrix r = ComplexMatrix::Zero(n, n);
    const ComplexMatrix bt = z.adjoint() * b.cast<std::complex<double>>();
    for (Eigen::Index k = 0; k < bt.cols(); ++k) detail::triangular_rank_one_update(r, bt.col(k));

    ComplexMatrix u = ComplexMatrix::Zero(n, n);
    for (Eigen::Index k = n - 1; k >= 0; --k) {
        const std::complex<double> tau = t(k, k), rho = r(k, k);
        if (!(tau.real() < 0.0))
            throw LyapunovSolveFailure("operator is not Hurwitz (eigenvalue with real part " +
                                       std::to_string(tau.real()) + ")");
        const double mu = std::abs(rho) / std::sqrt(-2.0 * tau.real());
        u(k, k) = mu;
        if (k == 0) break;
        ComplexVector y = r.col(k).head(k);
        if (mu > 0.0) {
            const ComplexVector rhs = -(std::conj(rho) * y + t.col(k).head(k) * (mu * mu)) / mu;
            ComplexMatrix shifted = t.topLeftCorner(k, k);
            shifted.diagonal().array() += std::conj(tau);
            const ComplexVector uk = shifted.triangularView<Eigen::Upper>().solve(rhs);
            u.col(k).head(k) = uk;
            y -= (rho / mu) * uk;
        }
        ComplexMatrix lead = r.topLeftCorner(k, k);
        detail::triangular_rank_one_update(lead, y);
        r.topLeftCorner(k, k) = lead;
    }
    return z * u;
}

/// Real factor [Re S, Im S] of the same P.
inline Eigen::MatrixXd real_lyapunov_factor(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXcd s = lyapunov_factor(a, b);
    Eigen::MatrixXd out(s.rows(), 2 * s.cols());
    out << s.real(), s.imag();
    return out;
}

}  // namespace netred

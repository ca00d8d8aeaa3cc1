#pragma once

// Semistable linear systems x' = A x + B u, y = C x with A = -Lap.
//
// The zero eigenvalue is split off through a biorthogonal pair of null space
// bases; everything else happens on the Hurwitz block that remains.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "netred/errors.hpp"
#include "netred/graph.hpp"
#include "netred/matrix_equations.hpp"

namespace netred {

struct SemistableOptions {
    /// Singular values below rank_factor * n * eps * sigma_max count as zero.
    double rank_factor = 10.0;
    /// Largest acceptable condition number of V0^T U0.
    double max_null_condition = 1e8;
    /// Relative residual accepted for Lyapunov/Sylvester solves.
    double residual_tol = 1e-8;
};

struct SemistableDecomposition {
    Eigen::Index m = 0;
    Matrix A;
    Matrix U;     // n x m, A U = 0
    Matrix V;     // n x m, V^T A = 0, V^T U = I
    Matrix Ubar;  // n x (n-m), orthonormal, V^T Ubar = 0
    Matrix Vbar;  // n x (n-m), [V Vbar]^T [U Ubar] = I
    Matrix Abar;  // Vbar^T A Ubar, Hurwitz
    Matrix J;     // U V^T
    RealSchurFactor<double> schur;  // of Abar
    double rank_tol = 0.0;
    SemistableOptions options;

    Eigen::Index n() const { return A.rows(); }
};

namespace detail {

inline double frob(const Matrix& x) { return x.size() == 0 ? 0.0 : x.norm(); }

inline std::string describe_eigenvalue(const Matrix& t, Eigen::Index k) {
    std::ostringstream os;
    os.precision(6);
    if (k + 1 < t.rows() && t(k + 1, k) != 0.0) {
        const double re = (t(k, k) + t(k + 1, k + 1)) / 2.0;
        const double disc = (t(k, k) - t(k + 1, k + 1)) * (t(k, k) - t(k + 1, k + 1)) / 4.0 + t(k, k + 1) * t(k + 1, k);
        os << re << " +/- " << std::sqrt(std::max(-disc, 0.0)) << "i";
    } else {
        os << t(k, k);
    }
    return os.str();
}

}  // namespace detail

inline SemistableDecomposition decompose(const Matrix& a, const SemistableOptions& opts = {}) {
    if (a.rows() != a.cols()) throw InvalidArgument("system matrix must be square");
    if (!a.allFinite()) throw InvalidArgument("system matrix has non-finite entries");
    const Eigen::Index n = a.rows();
    SemistableDecomposition dec;
    dec.A = a;
    dec.options = opts;
    if (n == 0) return dec;

    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double smax = s(0);
    dec.rank_tol = opts.rank_factor * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * smax;
    Eigen::Index m = 0;
    for (Eigen::Index k = 0; k < n; ++k)
        if (s(k) <= dec.rank_tol) ++m;
    dec.m = m;

    Matrix basis(n, n);
    if (m > 0) {
        const Matrix u0 = svd.matrixV().rightCols(m);
        const Matrix v0 = svd.matrixU().rightCols(m);
        const Matrix w = v0.transpose() * u0;
        Eigen::JacobiSVD<Matrix> wsvd(w);
        const Vector& ws = wsvd.singularValues();
        if (!(ws(m - 1) > 0.0) || ws(0) / ws(m - 1) > opts.max_null_condition)
            throw NotSemistable("zero eigenvalue is not semisimple (left and right null spaces are nearly "
                                "orthogonal)");
        dec.U = u0;
        // Orthonormal complement of im(V) = im(v0).
        Eigen::HouseholderQR<Matrix> qr(v0);
        const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
        dec.Ubar = q.rightCols(n - m);
        basis << dec.U, dec.Ubar;
    } else {
        dec.U.resize(n, 0);
        dec.Ubar = Matrix::Identity(n, n);
        basis = dec.Ubar;
    }

    Eigen::PartialPivLU<Matrix> lu(basis);
    const Matrix basis_inv = lu.inverse();
    if (!basis_inv.allFinite()) throw NotSemistable("null space and range of A are not complementary");
    dec.V = basis_inv.topRows(m).transpose();
    dec.Vbar = basis_inv.bottomRows(n - m).transpose();
    dec.J = dec.U * dec.V.transpose();
    dec.Abar = dec.Vbar.transpose() * a * dec.Ubar;

    dec.schur = RealSchurFactor<double>(dec.Abar);
    const Matrix& t = dec.schur.T;
    for (Eigen::Index k = 0; k < t.rows();) {
        const bool pair = k + 1 < t.rows() && t(k + 1, k) != 0.0;
        const double re = pair ? (t(k, k) + t(k + 1, k + 1)) / 2.0 : t(k, k);
        if (!(re < -dec.rank_tol))
            throw NotSemistable("eigenvalue " + detail::describe_eigenvalue(t, k) +
                                " is not in the open left half-plane");
        k += pair ? 2 : 1;
    }
    return dec;
}

/// Decomposition of A^T from that of A: the roles of the left and right bases
/// swap and only the Schur factor is recomputed.
inline SemistableDecomposition transposed(const SemistableDecomposition& dec) {
    SemistableDecomposition t;
    t.m = dec.m;
    t.A = dec.A.transpose();
    t.U = dec.V;
    t.V = dec.U;
    t.Ubar = dec.Vbar;
    t.Vbar = dec.Ubar;
    t.Abar = dec.Abar.transpose();
    t.J = dec.J.transpose();
    t.schur = RealSchurFactor<double>(t.Abar);
    t.rank_tol = dec.rank_tol;
    t.options = dec.options;
    return t;
}

/// Solves A1 X + X A2^T + R = 0 on two semistable operators, returning the
/// particular solution with no component in ker(A1) x ker(A2). The block of R
/// that lies in both null spaces must vanish for a solution to exist; its
/// norm is reported so the caller can decide.
struct ProjectedSylvesterSolution {
    Matrix X;
    double null_block_norm = 0.0;
};

inline ProjectedSylvesterSolution solve_projected_sylvester(const SemistableDecomposition& d1,
                                                            const SemistableDecomposition& d2, const Matrix& r) {
    if (r.rows() != d1.n() || r.cols() != d2.n()) throw InvalidArgument("right-hand side has mismatched dimensions");
    const Matrix vr = d1.V.transpose() * r;
    const Matrix vbr = d1.Vbar.transpose() * r;
    const Matrix r00 = vr * d2.V;
    const Matrix r0s = vr * d2.Vbar;
    const Matrix rs0 = vbr * d2.V;
    const Matrix rss = vbr * d2.Vbar;

    ProjectedSylvesterSolution out;
    out.null_block_norm = detail::frob(r00);

    // Abar1 Yss + Yss Abar2^T = -Rss
    const Matrix yss = solve_sylvester<double>(d1.schur, d2.schur, (-rss).eval());
    out.X = d1.Ubar * yss * d2.Ubar.transpose();
    if (r0s.size() > 0 && d2.Abar.size() > 0) {
        // Y0s Abar2^T = -R0s
        const Matrix y0s = -d2.Abar.transpose().partialPivLu().solve(r0s.transpose()).transpose();
        out.X += d1.U * y0s * d2.Ubar.transpose();
    }
    if (rs0.size() > 0 && d1.Abar.size() > 0) {
        const Matrix ys0 = -d1.Abar.partialPivLu().solve(rs0);
        out.X += d1.Ubar * ys0 * d2.U.transpose();
    }
    return out;
}

inline double lyapunov_residual(const Matrix& a, const Matrix& p, const Matrix& rhs) {
    return detail::frob(a * p + p * a.transpose() + rhs);
}

/// Pseudo controllability Gramian: the unique symmetric P with
/// A P + P A^T + (I-J) B B^T (I-J)^T = 0 and J P J^T = 0.
inline Matrix pseudo_controllability_gramian(const SemistableDecomposition& dec, const Matrix& b) {
    if (b.rows() != dec.n()) throw InvalidArgument("input matrix has wrong row count");
    const Matrix vb = dec.Vbar.transpose() * b;
    Matrix pbar;
    try {
        pbar = solve_lyapunov<double>(dec.schur, (vb * vb.transpose()).eval());
    } catch (const SylvesterSolveFailure& e) {
        throw LyapunovSolveFailure(e.what());
    }
    Matrix p = dec.Ubar * pbar * dec.Ubar.transpose();
    p = (p + p.transpose()) / 2.0;

    const Matrix ij = Matrix::Identity(dec.n(), dec.n()) - dec.J;
    const Matrix rhs = ij * b * b.transpose() * ij.transpose();
    const double scale = detail::frob(dec.A) * detail::frob(p) + detail::frob(b) * detail::frob(b);
    if (lyapunov_residual(dec.A, p, rhs) > dec.options.residual_tol * std::max(scale, 1e-300) || !p.allFinite())
        throw LyapunovSolveFailure("controllability Gramian residual exceeds tolerance");
    return p;
}

/// Pseudo observability Gramian: the unique symmetric Q with
/// A^T Q + Q A + (I-J)^T C^T C (I-J) = 0 and J^T Q J = 0.
inline Matrix pseudo_observability_gramian(const SemistableDecomposition& dec, const Matrix& c) {
    if (c.cols() != dec.n()) throw InvalidArgument("output matrix has wrong column count");
    const Matrix cu = c * dec.Ubar;
    // Abar^T Qbar + Qbar Abar + Ubar^T C^T C Ubar = 0, solved with the Schur
    // factor of Abar through the transpose.
    Matrix qbar;
    try {
        const RealSchurFactor<double> st(dec.Abar.transpose().eval());
        qbar = solve_lyapunov<double>(st, (cu.transpose() * cu).eval());
    } catch (const SylvesterSolveFailure& e) {
        throw LyapunovSolveFailure(e.what());
    }
    Matrix q = dec.Vbar * qbar * dec.Vbar.transpose();
    q = (q + q.transpose()) / 2.0;

    const Matrix ij = Matrix::Identity(dec.n(), dec.n()) - dec.J;
    const Matrix rhs = ij.transpose() * c.transpose() * c * ij;
    const double scale = detail::frob(dec.A) * detail::frob(q) + detail::frob(c) * detail::frob(c);
    if (lyapunov_residual(dec.A.transpose(), q, rhs) > dec.options.residual_tol * std::max(scale, 1e-300) ||
        !q.allFinite())
        throw LyapunovSolveFailure("observability Gramian residual exceeds tolerance");
    return q;
}

/// Real S with P = S S^T for the pseudo controllability Gramian.
inline Matrix pseudo_controllability_factor(const SemistableDecomposition& dec, const Matrix& b) {
    if (b.rows() != dec.n()) throw InvalidArgument("input matrix has wrong row count");
    return dec.Ubar * real_lyapunov_factor(dec.Abar, (dec.Vbar.transpose() * b).eval());
}

/// Real S with Q = S S^T for the pseudo observability Gramian.
inline Matrix pseudo_observability_factor(const SemistableDecomposition& dec, const Matrix& c) {
    if (c.cols() != dec.n()) throw InvalidArgument("output matrix has wrong column count");
    return dec.Vbar * real_lyapunov_factor(dec.Abar.transpose(), (dec.Ubar.transpose() * c.transpose()).eval());
}

struct PseudoGramians {
    Matrix P;
    Matrix Q;
};

/// Square-root counterparts of PseudoGramians: P = SP SP^T, Q = SQ SQ^T.
struct GramianFactors {
    Matrix SP;
    Matrix SQ;
};

inline GramianFactors pseudo_gramian_factors(const SemistableDecomposition& dec, const Matrix& b, const Matrix& c) {
    return {pseudo_controllability_factor(dec, b), pseudo_observability_factor(dec, c)};
}

inline PseudoGramians pseudo_gramians(const SemistableDecomposition& dec, const Matrix& b, const Matrix& c) {
    return {pseudo_controllability_gramian(dec, b), pseudo_observability_gramian(dec, c)};
}

/// Maps any symmetric solution of the singular Lyapunov equation onto the
/// pseudo Gramian: P = Pa - J Pa J^T.
inline Matrix particular_solution_projection(const SemistableDecomposition& dec, const Matrix& b, const Matrix& pa) {
    if (pa.rows() != dec.n() || pa.cols() != dec.n()) throw InvalidArgument("candidate has wrong dimensions");
    const Matrix ij = Matrix::Identity(dec.n(), dec.n()) - dec.J;
    const Matrix rhs = ij * b * b.transpose() * ij.transpose();
    const double scale = detail::frob(dec.A) * detail::frob(pa) + detail::frob(b) * detail::frob(b);
    if (lyapunov_residual(dec.A, pa, rhs) > dec.options.residual_tol * std::max(scale, 1e-300))
        throw NotASolution("candidate does not satisfy the Lyapunov equation");
    Matrix p = pa - dec.J * pa * dec.J.transpose();
    return (p + p.transpose()) / 2.0;
}

inline double h2_tolerance(const SemistableDecomposition& dec, const Matrix& b, const Matrix& c) {
    return 1e-8 * std::max(detail::frob(c) * detail::frob(dec.J) * detail::frob(b), 1e-300);
}

/// True iff C J B = 0, i.e. the transfer function has no pole at the origin.
inline bool h2_membership(const SemistableDecomposition& dec, const Matrix& b, const Matrix& c) {
    return detail::frob(c * dec.J * b) <= h2_tolerance(dec, b, c);
}

struct H2Norm {
    double value = 0.0;       // sqrt(tr(C P C^T))
    double dual_value = 0.0;  // sqrt(tr(B^T Q B))

    double relative_gap() const {
        const double s = std::max({value * value, dual_value * dual_value, 1e-300});
        return std::abs(value * value - dual_value * dual_value) / s;
    }
};

inline H2Norm h2_norm(const SemistableDecomposition& dec, const PseudoGramians& gram, const Matrix& b,
                      const Matrix& c) {
    if (!h2_membership(dec, b, c))
        throw NotInH2("C J B is nonzero: the transfer function has a pole at the origin");
    H2Norm out;
    out.value = std::sqrt(std::max((c * gram.P * c.transpose()).trace(), 0.0));
    out.dual_value = std::sqrt(std::max((b.transpose() * gram.Q * b).trace(), 0.0));
    return out;
}

namespace detail {

/// Number of singular values above rank_factor * max(r, c) * eps * scale,
/// where scale defaults to the largest singular value of x itself.
inline Eigen::Index numerical_rank(const Matrix& x, double rank_factor, double scale = -1.0) {
    if (x.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(x);
    const Vector& s = svd.singularValues();
    if (scale < 0.0) scale = s(0);
    if (scale == 0.0) return 0;
    const double tau = rank_factor * static_cast<double>(std::max(x.rows(), x.cols())) *
                       std::numeric_limits<double>::epsilon() * scale;
    return (s.array() > tau).count();
}

}  // namespace detail

/// rank P = n - m and V^T B has full row rank.
inline bool controllability_test(const SemistableDecomposition& dec, const Matrix& p, const Matrix& b) {
    if (detail::numerical_rank(p, dec.options.rank_factor) != dec.n() - dec.m) return false;
    if (dec.m == 0) return true;
    const Matrix vb = dec.V.transpose() * b;
    return detail::numerical_rank(vb, dec.options.rank_factor, detail::frob(dec.V) * detail::frob(b)) == dec.m;
}

/// rank Q = n - m and C U has full column rank.
inline bool observability_test(const SemistableDecomposition& dec, const Matrix& q, const Matrix& c) {
    if (detail::numerical_rank(q, dec.options.rank_factor) != dec.n() - dec.m) return false;
    if (dec.m == 0) return true;
    const Matrix cu = c * dec.U;
    return detail::numerical_rank(cu, dec.options.rank_factor, detail::frob(c) * detail::frob(dec.U)) == dec.m;
}

namespace detail {

inline void require_outside_null_space(const SemistableDecomposition& dec, const Vector& x0) {
    if (x0.size() != dec.n()) throw InvalidArgument("initial state has wrong dimension");
    if (dec.m == 0) return;
    const double tol = 1e-8 * std::max(frob(dec.U) * x0.norm(), 1e-300);
    if ((dec.U.transpose() * x0).norm() > tol && x0.norm() > 0.0)
        throw InvalidInitialState("initial state has a component along the null space of A");
}

}  // namespace detail

/// Least energy needed to steer the state from x0 into consensus:
/// x0^T P^+ x0 with the Moore-Penrose pseudoinverse.
inline double input_energy(const SemistableDecomposition& dec, const Matrix& p, const Vector& x0) {
    detail::require_outside_null_space(dec, x0);
    if (x0.norm() == 0.0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p);
    const Vector& lambda = eig.eigenvalues();
    const double tau = dec.options.rank_factor * static_cast<double>(dec.n()) *
                       std::numeric_limits<double>::epsilon() * lambda.cwiseAbs().maxCoeff();
    const Vector z = eig.eigenvectors().transpose() * x0;
    double energy = 0.0;
    for (Eigen::Index k = 0; k < lambda.size(); ++k)
        if (lambda(k) > tau) energy += z(k) * z(k) / lambda(k);
    return energy;
}

/// Output energy released from x0: x0^T Q x0.
inline double output_energy(const SemistableDecomposition& dec, const Matrix& q, const Vector& x0) {
    detail::require_outside_null_space(dec, x0);
    return std::max(x0.dot(q * x0), 0.0);
}

}  // namespace netred

#pragma once

// H2 distance between a network system and a reduced model, by the
// trace formula over Gramians and cross Gramians, and directly from the
// stacked error system.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netred/errors.hpp"
#include "netred/reduction.hpp"
#include "netred/semistable.hpp"

namespace netred {

struct ErrorOptions {
    /// Relative residual accepted for every Lyapunov/Sylvester solve.
    double residual_tol = 1e-8;
    /// ||J - Pi Jhat Pi^+|| <= bounded_tol * ||J||.
    double bounded_tol = 1e-8;
    /// Agreement between the controllability and observability forms,
    /// relative to the size of the individual trace terms.
    double dual_tol = 1e-8;
    /// Solve the cross term with Lhat^T instead of Lhat. Kept for comparison
    /// only; the default is the form that matches the error system.
    bool transposed_cross_term = false;
    SemistableOptions semistable;
};

struct ErrorReport {
    bool bounded = false;
    /// Absent when the error is unbounded.
    std::optional<double> h2_error;
    std::optional<double> dual_h2_error;
    /// Squared error before clamping at zero.
    double squared = 0.0;
    std::string method;
    /// r x n solution of the cross-term equation (trace formula only).
    Matrix cross_gramian;
    std::map<std::string, double> residuals;
    std::map<std::string, double> tolerances;
    bool dual_agrees = true;
};

namespace detail {

inline double sylvester_residual(const Matrix& a1, const Matrix& a2, const Matrix& x, const Matrix& r) {
    return frob(a1 * x + x * a2.transpose() + r);
}

inline void check_sylvester(const Matrix& a1, const Matrix& a2, const Matrix& x, const Matrix& r, double tol,
                            double& residual_out) {
    residual_out = sylvester_residual(a1, a2, x, r);
    const double scale = (frob(a1) + frob(a2)) * frob(x) + frob(r);
    if (!x.allFinite() || residual_out > tol * std::max(scale, 1e-300))
        throw SylvesterSolveFailure("cross Gramian residual exceeds tolerance");
}

inline double signed_sqrt(double sq) { return std::sqrt(std::max(sq, 0.0)); }

}  // namespace detail

/// Caches everything about the full system that the error computations reuse,
/// so many reduced models can be compared cheaply.
class ErrorEvaluator {
public:
    explicit ErrorEvaluator(const NetworkSystem& sys, ErrorOptions opts = {})
        : opts_(opts), laplacian_(sys.laplacian()), F_(sys.F()), H_(sys.H()) {
        opts_.semistable.residual_tol = opts_.residual_tol;
        dec_ = decompose((-laplacian_).eval(), opts_.semistable);
        dec_t_ = transposed(dec_);
        P_ = pseudo_controllability_gramian(dec_, F_);
        Q_ = pseudo_observability_gramian(dec_, H_);
        full_p_term_ = (H_ * P_ * H_.transpose()).trace();
        full_q_term_ = (F_.transpose() * Q_ * F_).trace();
    }

    const SemistableDecomposition& decomposition() const { return dec_; }
    const Matrix& controllability_gramian() const { return P_; }
    const Matrix& observability_gramian() const { return Q_; }
    const ErrorOptions& options() const { return opts_; }

    /// ||J - Pi Jhat Pi^+|| relative to ||J||.
    double boundedness_gap(const ReducedNetwork& red) const {
        const auto dec_r = decompose((-red.Lhat).eval(), opts_.semistable);
        return boundedness_gap(red, dec_r);
    }

    bool bounded(const ReducedNetwork& red) const { return boundedness_gap(red) <= opts_.bounded_tol; }

    ErrorReport thm8(const ReducedNetwork& red) const {
        check_dimensions(red);
        const auto dec_r = decompose((-red.Lhat).eval(), opts_.semistable);
        ErrorReport rep = start_report("thm8_formula");
        const double gap = boundedness_gap(red, dec_r);
        rep.residuals["boundedness"] = gap;
        if (gap > opts_.bounded_tol)
            throw UnboundedError("reduced model does not preserve the limit matrix (relative gap " +
                                 std::to_string(gap) + ")");
        rep.bounded = true;

        const Eigen::Index n = laplacian_.rows(), r = red.Lhat.rows();
        const Matrix in = Matrix::Identity(n, n), ir = Matrix::Identity(r, r);
        const Matrix pr = pseudo_controllability_gramian(dec_r, red.Fhat);
        const Matrix qr = pseudo_observability_gramian(dec_r, red.Hhat);

        // Lhat X + X Lap^T - (I - Jhat) Fhat F^T (I - J)^T = 0.
        const Matrix rhs_p = (ir - dec_r.J) * red.Fhat * F_.transpose() * (in - dec_.J).transpose();
        const auto dec_r_t = transposed(dec_r);
        const SemistableDecomposition& left = opts_.transposed_cross_term ? dec_r_t : dec_r;
        const auto px_sol = solve_projected_sylvester(left, dec_, rhs_p);
        rep.residuals["cross_null_block"] = px_sol.null_block_norm;
        double res = 0.0;
        detail::check_sylvester(left.A, dec_.A, px_sol.X, rhs_p, opts_.residual_tol, res);
        rep.residuals["sylvester_cross"] = res;
        const Matrix jproj = red.PiDagger * dec_.J * red.Pi;
        const Matrix px = px_sol.X - jproj * px_sol.X * dec_.J.transpose();
        rep.cross_gramian = px;

        // Dual: -Lap^T Y - Y Lhat + (I - J)^T H^T Hhat (I - Jhat) = 0.
        const Matrix rhs_q = (in - dec_.J).transpose() * H_.transpose() * red.Hhat * (ir - dec_r.J);
        const SemistableDecomposition& right = opts_.transposed_cross_term ? dec_r : dec_r_t;
        const auto qx_sol = solve_projected_sylvester(dec_t_, right, rhs_q);
        detail::check_sylvester(dec_t_.A, right.A, qx_sol.X, rhs_q, opts_.residual_tol, res);
        rep.residuals["sylvester_cross_dual"] = res;
        const Matrix qx = qx_sol.X - dec_.J.transpose() * qx_sol.X * jproj;

        const double red_p_term = (red.Hhat * pr * red.Hhat.transpose()).trace();
        const double red_q_term = (red.Fhat.transpose() * qr * red.Fhat).trace();
        const double sq = full_p_term_ + red_p_term - 2.0 * (red.Hhat * px * H_.transpose()).trace();
        const double sq_dual = full_q_term_ + red_q_term - 2.0 * (F_.transpose() * qx * red.Fhat).trace();
        finish(rep, sq, sq_dual, std::max({full_p_term_ + red_p_term, full_q_term_ + red_q_term, 1e-300}));
        return rep;
    }

    ErrorReport direct(const ReducedNetwork& red) const {
        check_dimensions(red);
        const auto dec_r = decompose((-red.Lhat).eval(), opts_.semistable);
        const double gap = boundedness_gap(red, dec_r);
        if (gap > opts_.bounded_tol)
            throw UnboundedError("reduced model does not preserve the limit matrix (relative gap " +
                                 std::to_string(gap) + ")");
        ErrorReport rep = stacked_error(laplacian_, F_, H_, red.Lhat, red.Fhat, red.Hhat, opts_);
        rep.residuals["boundedness"] = gap;
        return rep;
    }

    /// H2 distance between two arbitrary network systems with matching input
    /// and output dimensions, from the stacked error system. Unbounded when
    /// the difference of their transfer functions has a pole at the origin.
    static ErrorReport stacked_error(const Matrix& lap1, const Matrix& f1, const Matrix& h1, const Matrix& lap2,
                                     const Matrix& f2, const Matrix& h2, const ErrorOptions& opts = {}) {
        if (f1.cols() != f2.cols() || h1.rows() != h2.rows())
            throw InvalidArgument("systems have different input or output dimensions");
        const Eigen::Index n1 = lap1.rows(), n2 = lap2.rows(), n = n1 + n2;
        Matrix a = Matrix::Zero(n, n);
        a.topLeftCorner(n1, n1) = -lap1;
        a.bottomRightCorner(n2, n2) = -lap2;
        Matrix b(n, f1.cols());
        b << f1, f2;
        Matrix c(h1.rows(), n);
        c << h1, -h2;

        ErrorReport rep = start_report("error_system_gramian", opts);
        SemistableOptions sopts = opts.semistable;
        sopts.residual_tol = opts.residual_tol;
        const auto dec = decompose(a, sopts);
        const double membership = detail::frob(c * dec.J * b);
        rep.residuals["pole_at_origin"] = membership;
        rep.tolerances["pole_at_origin"] = h2_tolerance(dec, b, c);
        if (membership > h2_tolerance(dec, b, c)) {
            rep.bounded = false;
            return rep;
        }
        rep.bounded = true;
        const auto gram = pseudo_gramians(dec, b, c);
        const Matrix ij = Matrix::Identity(n, n) - dec.J;
        rep.residuals["lyapunov"] = lyapunov_residual(a, gram.P, ij * b * b.transpose() * ij.transpose());
        rep.residuals["lyapunov_dual"] = lyapunov_residual(a.transpose(), gram.Q, ij.transpose() * c.transpose() * c * ij);
        // Both traces are sums of nonnegative terms; their scale is the
        // unsigned sum of the diagonal blocks.
        const double scale = std::max({(h1 * gram.P.topLeftCorner(n1, n1) * h1.transpose()).trace() +
                                           (h2 * gram.P.bottomRightCorner(n2, n2) * h2.transpose()).trace(),
                                       1e-300});
        const double sq_trace = (c * gram.P * c.transpose()).trace();
        const double sq_dual = (b.transpose() * gram.Q * b).trace();
        // The reported value comes from the square-root factor: exact
        // cancellations (equal transfer functions) then give zero to working
        // precision instead of sqrt(eps).
        const double value = (c * pseudo_controllability_factor(dec, b)).norm();
        rep.residuals["trace_vs_factor"] = std::abs(sq_trace - value * value) / scale;
        finish(rep, value * value, sq_dual, scale, opts);
        return rep;
    }

private:
    static ErrorReport start_report(const std::string& method, const ErrorOptions& opts) {
        ErrorReport rep;
        rep.method = method;
        rep.tolerances["residual"] = opts.residual_tol;
        rep.tolerances["boundedness"] = opts.bounded_tol;
        rep.tolerances["dual_agreement"] = opts.dual_tol;
        rep.tolerances["rank_factor"] = opts.semistable.rank_factor;
        return rep;
    }

    ErrorReport start_report(const std::string& method) const { return start_report(method, opts_); }

    static void finish(ErrorReport& rep, double sq, double sq_dual, double scale, const ErrorOptions& opts) {
        rep.squared = sq;
        rep.h2_error = detail::signed_sqrt(sq);
        rep.dual_h2_error = detail::signed_sqrt(sq_dual);
        const double gap = std::abs(sq - sq_dual) / scale;
        rep.residuals["dual_gap"] = gap;
        rep.dual_agrees = gap <= opts.dual_tol;
    }

    void finish(ErrorReport& rep, double sq, double sq_dual, double scale) const {
        finish(rep, sq, sq_dual, scale, opts_);
    }

    void check_dimensions(const ReducedNetwork& red) const {
        if (red.Pi.rows() != laplacian_.rows() || red.Fhat.cols() != F_.cols() || red.Hhat.rows() != H_.rows())
            throw InvalidArgument("reduced model does not match the full system");
    }

    double boundedness_gap(const ReducedNetwork& red, const SemistableDecomposition& dec_r) const {
        const double scale = std::max(detail::frob(dec_.J), 1e-300);
        return detail::frob(dec_.J - red.Pi * dec_r.J * red.PiDagger) / scale;
    }

    ErrorOptions opts_;
    Matrix laplacian_;
    Matrix F_;
    Matrix H_;
    SemistableDecomposition dec_;
    SemistableDecomposition dec_t_;
    Matrix P_;
    Matrix Q_;
    double full_p_term_ = 0.0;
    double full_q_term_ = 0.0;
};

inline bool boundedness_test(const NetworkSystem& sys, const ReducedNetwork& red, const ErrorOptions& opts = {}) {
    const auto dec = decompose(sys, opts.semistable);
    const auto dec_r = decompose((-red.Lhat).eval(), opts.semistable);
    return detail::frob(dec.J - red.Pi * dec_r.J * red.PiDagger) <= opts.bounded_tol * detail::frob(dec.J);
}

inline ErrorReport h2_error_thm8(const NetworkSystem& sys, const ReducedNetwork& red, const ErrorOptions& opts = {}) {
    return ErrorEvaluator(sys, opts).thm8(red);
}

inline ErrorReport h2_error_direct(const NetworkSystem& sys, const ReducedNetwork& red, const ErrorOptions& opts = {}) {
    return ErrorEvaluator(sys, opts).direct(red);
}

inline ErrorReport h2_error_between(const NetworkSystem& a, const NetworkSystem& b, const ErrorOptions& opts = {}) {
    return ErrorEvaluator::stacked_error(a.laplacian(), a.F(), a.H(), b.laplacian(), b.F(), b.H(), opts);
}

}  // namespace netred

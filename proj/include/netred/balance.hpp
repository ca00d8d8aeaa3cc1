#pragma once

// Generalized balanced representation M x' = -L x + M F u with L = M * Lap.
// Each leading component is rescaled by its positive left null vector so that
// inside it in-degree equals out-degree.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "netred/errors.hpp"
#include "netred/graph.hpp"

namespace netred {

struct BalancedForm {
    /// Diagonal of M (strictly positive).
    Vector m;
    /// Balanced Laplacian M * Lap.
    Matrix laplacian;
    /// One left null vector per LSCC, in the order of `SccDecomposition::lsccs()`.
    std::vector<Vector> nu;
    /// Weights on vertices outside every LSCC, ascending vertex order.
    Vector nu_rest;

    Matrix M() const { return m.asDiagonal(); }
};

/// Positive vector spanning the left null space of the Laplacian of a
/// strongly connected block, scaled so that its smallest entry is 1.
inline Vector frobenius_left_vector(const Matrix& block) {
    const Eigen::Index k = block.rows();
    if (k == 0 || block.cols() != k) throw InvalidArgument("block must be square and nonempty");
    if (k == 1) return Vector::Ones(1);

    Eigen::JacobiSVD<Matrix> svd(block.transpose(), Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double tau = 10.0 * static_cast<double>(k) * std::numeric_limits<double>::epsilon() * s(0);
    if (s(k - 1) > tau || s(k - 2) <= tau)
        throw NotStronglyConnected("left null space of the block is not one-dimensional");

    Vector nu = svd.matrixV().col(k - 1);
    if (nu(0) < 0) nu = -nu;
    const double floor = 1e-12 * nu.cwiseAbs().maxCoeff();
    if (nu.minCoeff() <= floor) throw NotStronglyConnected("left null vector is not entrywise positive");
    return nu / nu.minCoeff();
}

/// Builds M from the per-LSCC left null vectors and `nu_rest` (all ones by
/// default) on the remaining vertices.
inline BalancedForm build_balanced_form(const Matrix& laplacian, const SccDecomposition& scc,
                                        std::optional<Vector> nu_rest = std::nullopt) {
    const Eigen::Index n = laplacian.rows();
    BalancedForm out;
    out.m = Vector::Ones(n);

    std::vector<int> rest;
    for (int v = 0; v < static_cast<int>(n); ++v)
        if (!scc.in_lscc(v)) rest.push_back(v);

    for (const auto& comp : scc.lsccs()) {
        const auto idx = Eigen::Map<const Eigen::VectorXi>(comp.data(), static_cast<Eigen::Index>(comp.size()));
        const Vector nu = frobenius_left_vector(laplacian(idx, idx));
        for (std::size_t k = 0; k < comp.size(); ++k) out.m(comp[k]) = nu(static_cast<Eigen::Index>(k));
        out.nu.push_back(nu);
    }

    out.nu_rest = nu_rest.value_or(Vector::Ones(static_cast<Eigen::Index>(rest.size())));
    if (out.nu_rest.size() != static_cast<Eigen::Index>(rest.size()))
        throw InvalidArgument("nu_rest must have one entry per vertex outside the leading components");
    if (rest.size() > 0 && !(out.nu_rest.minCoeff() > 0.0)) throw InvalidArgument("nu_rest must be positive");
    for (std::size_t k = 0; k < rest.size(); ++k) out.m(rest[k]) = out.nu_rest(static_cast<Eigen::Index>(k));

    out.laplacian = out.m.asDiagonal() * laplacian;
    return out;
}

inline BalancedForm build_balanced_form(const DiGraph& g, const SccDecomposition& scc,
                                        std::optional<Vector> nu_rest = std::nullopt) {
    return build_balanced_form(build_laplacian(g), scc, std::move(nu_rest));
}

/// True iff inside every LSCC the in- and out-weight of each vertex agree
/// within 1e-8 of the largest diagonal entry.
inline bool is_generalized_balanced(const Matrix& laplacian, const SccDecomposition& scc) {
    if (laplacian.size() == 0) return true;
    const double tol = 1e-8 * std::max(laplacian.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    for (const auto& comp : scc.lsccs()) {
        const auto idx = Eigen::Map<const Eigen::VectorXi>(comp.data(), static_cast<Eigen::Index>(comp.size()));
        const Matrix block = laplacian(idx, idx);
        if ((block.rowwise().sum() - block.colwise().sum().transpose()).cwiseAbs().maxCoeff() > tol) return false;
    }
    return true;
}

}  // namespace netred

#pragma once

// Clustering-based reduction of network systems x' = -Lap x + F u, y = H x.
//
// Pipeline: clusterability classes -> dissimilarities from the pseudo
// Gramians -> distance graph -> max-weight spanning forest with r trees ->
// Petrov-Galerkin projection with the balancing weights M.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netred/balance.hpp"
#include "netred/errors.hpp"
#include "netred/graph.hpp"
#include "netred/semistable.hpp"

namespace netred {

struct ReductionOptions {
    /// Absolute tolerance on consensus-row differences (rows of an orthonormal
    /// null space basis) when deciding clusterability.
    double clusterability_tol = 1e-8;
    /// 0-dissimilarity residual threshold, relative to max|Lap|.
    double zero_dissimilarity_tol = 1e-10;
    /// Dissimilarities below this fraction of the largest finite one are
    /// numerically zero.
    double zero_distance_tol = 1e-10;
    ReachMode reach_mode = ReachMode::any_source;
    SemistableOptions semistable;
};

class NetworkSystem {
public:
    NetworkSystem() = default;

    /// Validates the Laplacian and the input/output dimensions and computes the
    /// SCC structure and balanced form.
    NetworkSystem(Matrix laplacian, Matrix input, Matrix output)
        : laplacian_(std::move(laplacian)), F_(std::move(input)), H_(std::move(output)) {
        graph_ = DiGraph::from_laplacian(laplacian_);
        if (F_.rows() != laplacian_.rows())
            throw InvalidArgument("input matrix must have " + std::to_string(laplacian_.rows()) + " rows");
        if (H_.cols() != laplacian_.rows())
            throw InvalidArgument("output matrix must have " + std::to_string(laplacian_.rows()) + " columns");
        if (!F_.allFinite() || !H_.allFinite()) throw InvalidArgument("input/output matrices must be finite");
        scc_ = scc_decompose(graph_);
        balanced_ = build_balanced_form(laplacian_, scc_);
    }

    NetworkSystem(const DiGraph& g, Matrix input, Matrix output)
        : NetworkSystem(build_laplacian(g), std::move(input), std::move(output)) {}

    int n() const { return static_cast<int>(laplacian_.rows()); }
    const Matrix& laplacian() const { return laplacian_; }
    const Matrix& F() const { return F_; }
    const Matrix& H() const { return H_; }
    const DiGraph& graph() const { return graph_; }
    const SccDecomposition& scc() const { return scc_; }
    const BalancedForm& balanced() const { return balanced_; }
    const Vector& m() const { return balanced_.m; }

    /// Vertices driven directly by some input (nonzero rows of F).
    std::vector<int> input_vertices() const {
        std::vector<int> out;
        for (int v = 0; v < n(); ++v)
            if (F_.row(v).cwiseAbs().maxCoeff() > 0.0) out.push_back(v);
        return out;
    }

    /// Vertices measured directly by some output (nonzero columns of H).
    std::vector<int> output_vertices() const {
        std::vector<int> out;
        if (H_.rows() == 0) return out;
        for (int v = 0; v < n(); ++v)
            if (H_.col(v).cwiseAbs().maxCoeff() > 0.0) out.push_back(v);
        return out;
    }

private:
    Matrix laplacian_;
    Matrix F_;
    Matrix H_;
    DiGraph graph_;
    SccDecomposition scc_;
    BalancedForm balanced_;
};

inline SemistableDecomposition decompose(const NetworkSystem& sys, const SemistableOptions& opts = {}) {
    return decompose((-sys.laplacian()).eval(), opts);
}

class Clustering {
public:
    Clustering() = default;

    /// Cells must be nonempty, disjoint and cover 0..n-1. Each cell is sorted;
    /// the order of the cells is kept.
    Clustering(int n, std::vector<std::vector<int>> cells) : cells_(std::move(cells)), cell_of_(n, -1) {
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            auto& cell = cells_[c];
            if (cell.empty()) throw InvalidArgument("clustering has an empty cell");
            std::sort(cell.begin(), cell.end());
            for (int v : cell) {
                if (v < 0 || v >= n) throw InvalidArgument("clustering refers to vertex " + std::to_string(v + 1));
                if (cell_of_[static_cast<std::size_t>(v)] != -1)
                    throw InvalidArgument("vertex " + std::to_string(v + 1) + " appears in two cells");
                cell_of_[static_cast<std::size_t>(v)] = static_cast<int>(c);
            }
        }
        for (int v = 0; v < n; ++v)
            if (cell_of_[static_cast<std::size_t>(v)] == -1)
                throw InvalidArgument("vertex " + std::to_string(v + 1) + " is not in any cell");
    }

    /// Groups vertices by label; cells are ordered by their smallest vertex.
    static Clustering from_labels(const std::vector<int>& label) {
        const int n = static_cast<int>(label.size());
        std::vector<std::vector<int>> cells;
        std::vector<std::pair<int, int>> seen;  // label -> cell index
        for (int v = 0; v < n; ++v) {
            auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == label[v]; });
            if (it == seen.end()) {
                seen.emplace_back(label[v], static_cast<int>(cells.size()));
                cells.push_back({v});
            } else {
                cells[static_cast<std::size_t>(it->second)].push_back(v);
            }
        }
        return Clustering(n, std::move(cells));
    }

    static Clustering identity(int n) {
        std::vector<std::vector<int>> cells;
        for (int v = 0; v < n; ++v) cells.push_back({v});
        return Clustering(n, std::move(cells));
    }

    int n() const { return static_cast<int>(cell_of_.size()); }
    int order() const { return static_cast<int>(cells_.size()); }
    const std::vector<std::vector<int>>& cells() const { return cells_; }
    int cell_of(int v) const { return cell_of_.at(static_cast<std::size_t>(v)); }

    /// Binary n x r matrix with Pi(v, c) = 1 iff v is in cell c.
    Matrix characteristic() const {
        Matrix pi = Matrix::Zero(n(), order());
        for (int v = 0; v < n(); ++v) pi(v, cell_of_[static_cast<std::size_t>(v)]) = 1.0;
        return pi;
    }

private:
    std::vector<std::vector<int>> cells_;
    std::vector<int> cell_of_;
};

/// Equivalence classes of mutually clusterable vertices: each LSCC is one
/// class; vertices outside every LSCC are grouped by their consensus value
/// (equal rows of the right null space basis).
struct ClusterableClasses {
    std::vector<int> class_of;
    int count = 0;

    bool together(int i, int j) const {
        return class_of[static_cast<std::size_t>(i)] == class_of[static_cast<std::size_t>(j)];
    }
};

inline ClusterableClasses clusterable_classes(const NetworkSystem& sys, const SemistableDecomposition& dec,
                                              const ReductionOptions& opts = {}) {
    const int n = sys.n();
    const auto& scc = sys.scc();
    ClusterableClasses out;
    out.class_of.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < scc.components.size(); ++c) {
        if (!scc.is_lscc[c]) continue;
        for (int v : scc.components[c]) out.class_of[static_cast<std::size_t>(v)] = out.count;
        ++out.count;
    }
    // U has orthonormal columns, so its rows have norm at most one.
    std::vector<int> reps;
    for (int v = 0; v < n; ++v) {
        if (scc.in_lscc(v)) continue;
        int found = -1;
        for (int r : reps)
            if ((dec.U.row(v) - dec.U.row(r)).norm() <= opts.clusterability_tol) {
                found = out.class_of[static_cast<std::size_t>(r)];
                break;
            }
        if (found < 0) {
            reps.push_back(v);
            found = out.count++;
        }
        out.class_of[static_cast<std::size_t>(v)] = found;
    }
    return out;
}

/// Vertices i and j reach consensus and are either in the same LSCC or both
/// outside every LSCC.
inline bool clusterable(const NetworkSystem& sys, const SemistableDecomposition& dec, int i, int j,
                        const ReductionOptions& opts = {}) {
    if (i == j) return true;
    const auto& scc = sys.scc();
    const bool li = scc.in_lscc(i), lj = scc.in_lscc(j);
    if (li || lj) return scc.component_of[static_cast<std::size_t>(i)] == scc.component_of[static_cast<std::size_t>(j)];
    return (dec.U.row(i) - dec.U.row(j)).norm() <= opts.clusterability_tol;
}

/// Null-space form of the same test: e_ij^T U = 0 and e_ij^T M^{-1} V = 0.
inline bool clusterable_numeric(const NetworkSystem& sys, const SemistableDecomposition& dec, int i, int j,
                                const ReductionOptions& opts = {}) {
    if (dec.m == 0) return true;
    const Matrix mv = sys.m().cwiseInverse().asDiagonal() * dec.V;
    const double scale = mv.rowwise().norm().maxCoeff();
    return (dec.U.row(i) - dec.U.row(j)).norm() <= opts.clusterability_tol &&
           (mv.row(i) - mv.row(j)).norm() <= opts.clusterability_tol * std::max(scale, 1e-300);
}

/// Input and output dissimilarities; entries for unclusterable pairs are
/// +infinity and `clusterable` is false there.
struct DissimilarityMatrix {
    Matrix input;
    Matrix output;
    Matrix value;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> clusterable;

    int n() const { return static_cast<int>(value.rows()); }
    bool finite(int i, int j) const { return clusterable(i, j); }
};

/// D_ij = sqrt(e_ij^T P e_ij) * sqrt(e_ij^T M^{-1} Q M^{-1} e_ij) for the
/// Gramians P of (-Lap, F) and Q of (H, -Lap).
inline DissimilarityMatrix dissimilarity_matrix(const NetworkSystem& sys, const PseudoGramians& gram,
                                                const ClusterableClasses& classes) {
    const int n = sys.n();
    const Vector minv = sys.m().cwiseInverse();
    const Matrix qw = minv.asDiagonal() * gram.Q * minv.asDiagonal();
    DissimilarityMatrix d;
    d.input = Matrix::Zero(n, n);
    d.output = Matrix::Zero(n, n);
    d.value = Matrix::Zero(n, n);
    d.clusterable.setConstant(n, n, false);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        d.clusterable(i, i) = true;
        for (int j = i + 1; j < n; ++j) {
            const bool ok = classes.together(i, j);
            d.clusterable(i, j) = d.clusterable(j, i) = ok;
            const double di = std::sqrt(std::max(gram.P(i, i) + gram.P(j, j) - 2.0 * gram.P(i, j), 0.0));
            const double dout = std::sqrt(std::max(qw(i, i) + qw(j, j) - 2.0 * qw(i, j), 0.0));
            d.input(i, j) = d.input(j, i) = ok ? di : inf;
            d.output(i, j) = d.output(j, i) = ok ? dout : inf;
            d.value(i, j) = d.value(j, i) = ok ? di * dout : inf;
        }
    }
    return d;
}

/// Same quantities from square-root factors: DI_ij = ||(e_i - e_j)^T SP||.
/// Free of the cancellation in P_ii + P_jj - 2 P_ij, so near-zero
/// dissimilarities are resolved to working precision.
inline DissimilarityMatrix dissimilarity_matrix(const NetworkSystem& sys, const GramianFactors& factors,
                                                const ClusterableClasses& classes) {
    const int n = sys.n();
    const Matrix& sp = factors.SP;
    const Matrix sq = sys.m().cwiseInverse().asDiagonal() * factors.SQ;
    DissimilarityMatrix d;
    d.input = Matrix::Zero(n, n);
    d.output = Matrix::Zero(n, n);
    d.value = Matrix::Zero(n, n);
    d.clusterable.setConstant(n, n, false);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        d.clusterable(i, i) = true;
        for (int j = i + 1; j < n; ++j) {
            const bool ok = classes.together(i, j);
            d.clusterable(i, j) = d.clusterable(j, i) = ok;
            if (!ok) {
                d.input(i, j) = d.input(j, i) = d.output(i, j) = d.output(j, i) = d.value(i, j) = d.value(j, i) = inf;
                continue;
            }
            const double di = (sp.row(i) - sp.row(j)).norm();
            const double dout = (sq.row(i) - sq.row(j)).norm();
            d.input(i, j) = d.input(j, i) = di;
            d.output(i, j) = d.output(j, i) = dout;
            d.value(i, j) = d.value(j, i) = di * dout;
        }
    }
    return d;
}

struct ZeroDissimilarPair {
    enum class Kind { input, output };
    int i = 0;
    int j = 0;
    double beta = 0.0;
    Kind kind = Kind::input;
    double residual = 0.0;
};

inline std::string to_string(ZeroDissimilarPair::Kind k) { return k == ZeroDissimilarPair::Kind::input ? "input" : "output"; }

/// Clusterable pairs whose difference is invisible from the inputs
/// (e_ij^T [F, Lap - beta I] = 0) or from the outputs (H y = 0 and
/// (Lap - beta I) y = 0 with y = M^{-1} e_ij). Pairs satisfying both are
/// reported once, as input pairs.
inline std::vector<ZeroDissimilarPair> zero_dissimilar_pairs(const NetworkSystem& sys, const ClusterableClasses& classes,
                                                             const ReductionOptions& opts = {}) {
    const int n = sys.n();
    const Matrix& lap = sys.laplacian();
    const double scale = std::max(lap.cwiseAbs().maxCoeff(), 1e-300);
    const double tol = opts.zero_dissimilarity_tol * scale;
    const Vector minv = sys.m().cwiseInverse();
    std::vector<ZeroDissimilarPair> out;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (!classes.together(i, j)) continue;
            {
                const double beta = (lap(i, i) - lap(i, j) - lap(j, i) + lap(j, j)) / 2.0;
                Vector row = (lap.row(i) - lap.row(j)).transpose();
                row(i) -= beta;
                row(j) += beta;
                const double f = sys.F().cols() > 0 ? (sys.F().row(i) - sys.F().row(j)).cwiseAbs().maxCoeff() : 0.0;
                const double res = std::max(row.cwiseAbs().maxCoeff(), f);
                if (res <= tol) {
                    out.push_back({i, j, beta, ZeroDissimilarPair::Kind::input, res});
                    continue;
                }
            }
            {
                // y = M^{-1} e_ij is supported on {i, j}.
                const double yi = minv(i), yj = -minv(j);
                const Vector ly = lap.col(i) * yi + lap.col(j) * yj;
                const double beta = (yi * ly(i) + yj * ly(j)) / (yi * yi + yj * yj);
                Vector col = ly;
                col(i) -= beta * yi;
                col(j) -= beta * yj;
                const double h = sys.H().rows() > 0 ? (sys.H().col(i) * yi + sys.H().col(j) * yj).cwiseAbs().maxCoeff() : 0.0;
                const double res = std::max(col.cwiseAbs().maxCoeff(), h);
                if (res <= tol) out.push_back({i, j, beta, ZeroDissimilarPair::Kind::output, res});
            }
        }
    return out;
}

/// Symmetric weights X_ij = 1 / D_ij on clusterable pairs and the Laplacian
/// L_D = diag(X 1) - X of the undirected distance graph.
struct DistanceGraph {
    Matrix X;
    Matrix laplacian;
};

inline DistanceGraph distance_graph(const DissimilarityMatrix& d, const ReductionOptions& opts = {}) {
    const int n = d.n();
    double largest = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (d.clusterable(i, j)) largest = std::max(largest, d.value(i, j));
    DistanceGraph out;
    out.X = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (!d.clusterable(i, j)) continue;
            if (!(d.value(i, j) > opts.zero_distance_tol * largest))
                throw ZeroDissimilarityPresent("vertices " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                                               " are 0-dissimilar; merge them first (minimal realization)");
            out.X(i, j) = out.X(j, i) = 1.0 / d.value(i, j);
        }
    out.laplacian = Matrix(out.X.rowwise().sum().asDiagonal()) - out.X;
    return out;
}

namespace detail {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int v) {
        while (parent[static_cast<std::size_t>(v)] != v) {
            parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            v = parent[static_cast<std::size_t>(v)];
        }
        return v;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
        return true;
    }
};

}  // namespace detail

/// Maximum-weight spanning forest of the distance graph, grown until r trees
/// remain. Heavier edges first; ties go to the lexicographically smaller
/// pair. Cells are ordered by their smallest vertex.
inline Clustering select_clustering(const Matrix& x, int r) {
    const int n = static_cast<int>(x.rows());
    if (r < 1 || r > n) throw InvalidArgument("order must lie in [1, " + std::to_string(n) + "]");
    std::vector<std::tuple<double, int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (x(i, j) > 0.0) edges.emplace_back(x(i, j), i, j);
    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::make_pair(std::get<1>(a), std::get<2>(a)) < std::make_pair(std::get<1>(b), std::get<2>(b));
    });
    detail::UnionFind uf(n);
    int trees = n;
    for (const auto& [w, i, j] : edges) {
        if (trees == r) break;
        if (uf.unite(i, j)) --trees;
    }
    if (trees > r) {
        // Finish the forest to learn how many trees it can get down to.
        for (const auto& [w, i, j] : edges)
            if (uf.unite(i, j)) --trees;
        throw OrderTooSmall("order " + std::to_string(r) + " is below the number of clusterable classes (" +
                                std::to_string(trees) + ")",
                            trees);
    }
    std::vector<int> label(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) label[static_cast<std::size_t>(v)] = uf.find(v);
    return Clustering::from_labels(label);
}

struct ReducedNetwork {
    Clustering clustering;
    Matrix Pi;
    Matrix PiDagger;
    Matrix Lhat;
    Matrix Fhat;
    Matrix Hhat;
    bool proper = true;
};

/// True iff every cell lies within one clusterable class.
inline bool is_proper(const Clustering& c, const ClusterableClasses& classes) {
    for (const auto& cell : c.cells())
        for (int v : cell)
            if (!classes.together(cell.front(), v)) return false;
    return true;
}

/// Petrov-Galerkin projection with Pi^+ = (Pi^T M Pi)^{-1} Pi^T M.
inline ReducedNetwork project(const NetworkSystem& sys, const Clustering& clustering, const ClusterableClasses& classes,
                              bool force = false) {
    if (clustering.n() != sys.n()) throw InvalidArgument("clustering size does not match the network");
    ReducedNetwork red;
    red.clustering = clustering;
    red.proper = is_proper(clustering, classes);
    if (!red.proper && !force)
        throw ImproperClustering("clustering merges vertices that are not clusterable; the error would be unbounded");
    red.Pi = clustering.characteristic();
    const Vector& m = sys.m();
    Vector weight = Vector::Zero(clustering.order());
    for (int v = 0; v < sys.n(); ++v) weight(clustering.cell_of(v)) += m(v);
    red.PiDagger = weight.cwiseInverse().asDiagonal() * red.Pi.transpose() * m.asDiagonal();
    red.Lhat = red.PiDagger * sys.laplacian() * red.Pi;
    red.Fhat = red.PiDagger * sys.F();
    red.Hhat = sys.H() * red.Pi;
    // Row sums vanish in exact arithmetic; restore that exactly.
    for (Eigen::Index i = 0; i < red.Lhat.rows(); ++i) {
        double off = 0.0;
        for (Eigen::Index j = 0; j < red.Lhat.cols(); ++j)
            if (j != i) off += red.Lhat(i, j);
        red.Lhat(i, i) = -off + 0.0;
    }
    // No negative zeros in the outputs.
    red.Lhat = red.Lhat.array() + 0.0;
    return red;
}

struct RealizationStep {
    enum class Kind { removed_undetectable, removed_unreachable, anchored, merged_input, merged_output };
    Kind kind;
    /// Original vertex ids involved.
    std::vector<int> vertices;
    double beta = 0.0;
};

inline std::string to_string(RealizationStep::Kind k) {
    switch (k) {
        case RealizationStep::Kind::removed_undetectable: return "removed_undetectable";
        case RealizationStep::Kind::removed_unreachable: return "removed_unreachable";
        case RealizationStep::Kind::anchored: return "anchored";
        case RealizationStep::Kind::merged_input: return "merged_input";
        case RealizationStep::Kind::merged_output: return "merged_output";
    }
    return "unknown";
}

struct MinimalRealization {
    NetworkSystem system;
    /// Original vertices represented by each vertex of `system`. An anchor
    /// vertex lists the removed vertices whose (zero) state it stands for.
    std::vector<std::vector<int>> origin;
    /// Index of the anchor vertex, if one was needed.
    std::optional<int> anchor;
    std::vector<RealizationStep> log;

    bool unchanged() const { return log.empty(); }
};

namespace detail {

inline NetworkSystem restrict_system(const NetworkSystem& sys, const std::vector<int>& keep) {
    const auto idx = Eigen::Map<const Eigen::VectorXi>(keep.data(), static_cast<Eigen::Index>(keep.size()));
    const Eigen::VectorXi all_in = Eigen::VectorXi::LinSpaced(sys.F().cols(), 0, static_cast<int>(sys.F().cols()) - 1);
    const Eigen::VectorXi all_out = Eigen::VectorXi::LinSpaced(sys.H().rows(), 0, static_cast<int>(sys.H().rows()) - 1);
    return NetworkSystem(sys.laplacian()(idx, idx), sys.F()(idx, all_in), sys.H()(all_out, idx));
}

}  // namespace detail

/// Removes undetectable vertices, replaces unreachable ones by a single
/// zero-state anchor, and merges 0-dissimilar pairs until none remain.
/// The transfer function is unchanged throughout.
inline MinimalRealization minimal_network_realization(const NetworkSystem& sys, const ReductionOptions& opts = {}) {
    MinimalRealization out;
    NetworkSystem cur = sys;
    std::vector<std::vector<int>> origin;
    for (int v = 0; v < sys.n(); ++v) origin.push_back({v});

    // Undetectable vertices never influence detectable ones, so deleting them
    // leaves a Laplacian.
    {
        const auto keep = detectable_set(cur.graph(), cur.output_vertices(), opts.reach_mode);
        if (keep.empty()) throw DegenerateNetwork("no vertex is detectable from the outputs");
        if (static_cast<int>(keep.size()) < cur.n()) {
            std::vector<int> removed;
            std::vector<char> kept(static_cast<std::size_t>(cur.n()), 0);
            for (int v : keep) kept[static_cast<std::size_t>(v)] = 1;
            for (int v = 0; v < cur.n(); ++v)
                if (!kept[static_cast<std::size_t>(v)]) removed.push_back(origin[static_cast<std::size_t>(v)].front());
            out.log.push_back({RealizationStep::Kind::removed_undetectable, removed, 0.0});
            std::vector<std::vector<int>> next;
            for (int v : keep) next.push_back(origin[static_cast<std::size_t>(v)]);
            origin = std::move(next);
            cur = detail::restrict_system(cur, keep);
        }
    }

    // Unreachable vertices stay at zero. Their grounding effect on reachable
    // vertices is kept through one anchor vertex without inflow.
    {
        const auto keep = reachable_set(cur.graph(), cur.input_vertices(), opts.reach_mode);
        if (keep.empty()) throw DegenerateNetwork("no vertex is reachable from the inputs");
        if (static_cast<int>(keep.size()) < cur.n()) {
            const int n = cur.n();
            std::vector<char> kept(static_cast<std::size_t>(n), 0);
            for (int v : keep) kept[static_cast<std::size_t>(v)] = 1;
            std::vector<int> removed;
            for (int v = 0; v < n; ++v)
                if (!kept[static_cast<std::size_t>(v)]) removed.push_back(origin[static_cast<std::size_t>(v)].front());
            out.log.push_back({RealizationStep::Kind::removed_unreachable, removed, 0.0});

            const int k = static_cast<int>(keep.size());
            Vector grounding = Vector::Zero(k);
            for (int a = 0; a < k; ++a)
                for (const auto& nb : cur.graph().in_neighbors(keep[static_cast<std::size_t>(a)]))
                    if (!kept[static_cast<std::size_t>(nb.vertex)]) grounding(a) += nb.weight;
            const bool need_anchor = grounding.maxCoeff() > 0.0;

            const int size = k + (need_anchor ? 1 : 0);
            const auto idx = Eigen::Map<const Eigen::VectorXi>(keep.data(), k);
            Matrix lap = Matrix::Zero(size, size);
            lap.topLeftCorner(k, k) = cur.laplacian()(idx, idx);
            Matrix f = Matrix::Zero(size, cur.F().cols());
            Matrix h = Matrix::Zero(cur.H().rows(), size);
            for (int a = 0; a < k; ++a) {
                f.row(a) = cur.F().row(keep[static_cast<std::size_t>(a)]);
                h.col(a) = cur.H().col(keep[static_cast<std::size_t>(a)]);
            }
            std::vector<std::vector<int>> next;
            for (int v : keep) next.push_back(origin[static_cast<std::size_t>(v)]);
            if (need_anchor) {
                lap.block(0, k, k, 1) = -grounding;
                out.anchor = k;
                next.push_back(removed);
                out.log.push_back({RealizationStep::Kind::anchored, removed, 0.0});
            }
            origin = std::move(next);
            cur = NetworkSystem(lap, f, h);
        }
    }

    // Merge 0-dissimilar pairs, one kind per round so each projection is exact.
    for (;;) {
        const auto dec = decompose(cur, opts.semistable);
        const auto classes = clusterable_classes(cur, dec, opts);
        const auto pairs = zero_dissimilar_pairs(cur, classes, opts);
        if (pairs.empty()) break;
        const auto kind = std::any_of(pairs.begin(), pairs.end(),
                                      [](const auto& p) { return p.kind == ZeroDissimilarPair::Kind::input; })
                              ? ZeroDissimilarPair::Kind::input
                              : ZeroDissimilarPair::Kind::output;
        detail::UnionFind uf(cur.n());
        for (const auto& p : pairs) {
            if (p.kind != kind) continue;
            if (!uf.unite(p.i, p.j)) continue;
            std::vector<int> members = origin[static_cast<std::size_t>(p.i)];
            members.insert(members.end(), origin[static_cast<std::size_t>(p.j)].begin(),
                           origin[static_cast<std::size_t>(p.j)].end());
            std::sort(members.begin(), members.end());
            out.log.push_back({kind == ZeroDissimilarPair::Kind::input ? RealizationStep::Kind::merged_input
                                                                       : RealizationStep::Kind::merged_output,
                               members, p.beta});
        }
        std::vector<int> label(static_cast<std::size_t>(cur.n()));
        for (int v = 0; v < cur.n(); ++v) label[static_cast<std::size_t>(v)] = uf.find(v);
        const Clustering c = Clustering::from_labels(label);
        const ReducedNetwork red = project(cur, c, classes);

        std::vector<std::vector<int>> next;
        for (const auto& cell : c.cells()) {
            std::vector<int> members;
            for (int v : cell)
                members.insert(members.end(), origin[static_cast<std::size_t>(v)].begin(),
                               origin[static_cast<std::size_t>(v)].end());
            std::sort(members.begin(), members.end());
            next.push_back(members);
        }
        if (out.anchor) out.anchor = c.cell_of(*out.anchor);
        origin = std::move(next);
        cur = NetworkSystem(red.Lhat, red.Fhat, red.Hhat);
    }

    out.system = std::move(cur);
    out.origin = std::move(origin);
    return out;
}

}  // namespace netred

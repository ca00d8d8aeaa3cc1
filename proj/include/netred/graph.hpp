#pragma once

// Weighted directed graphs with information-flow semantics, their Laplacians,
// and the strongly connected component structure that governs consensus.
//
// Convention: a flow record (source s, target t, weight w) means information
// flows from s to t. It is stored as the adjacency entry w_{t,s}, so row t
// of the Laplacian carries -w in column s. All reachability follows flow.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netred/errors.hpp"

namespace netred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One directed edge, 0-based: information flows source -> target.
struct Flow {
    int source = 0;
    int target = 0;
    double weight = 0.0;

    friend bool operator==(const Flow&, const Flow&) = default;
};

class DiGraph {
public:
    struct Neighbor {
        int vertex;
        double weight;
    };

    DiGraph() = default;

    /// Validates: weights > 0 and finite, no self-loops, no parallel edges,
    /// vertices in [0, n).
    DiGraph(int n, std::vector<Flow> flows) : n_(n), flows_(std::move(flows)) {
        if (n_ < 0) throw InvalidGraph("negative vertex count");
        in_.assign(static_cast<std::size_t>(n_), {});
        out_.assign(static_cast<std::size_t>(n_), {});
        std::set<std::pair<int, int>> seen;
        for (const Flow& f : flows_) {
            if (f.source < 0 || f.source >= n_ || f.target < 0 || f.target >= n_)
                throw InvalidGraph("vertex index out of range in edge " +
                                   std::to_string(f.source + 1) + "->" +
                                   std::to_string(f.target + 1));
            if (f.source == f.target)
                throw InvalidGraph("self-loop at vertex " + std::to_string(f.source + 1));
            if (!(f.weight > 0.0) || !std::isfinite(f.weight))
                throw InvalidGraph("edge weight must be positive and finite");
            if (!seen.emplace(f.source, f.target).second)
                throw InvalidGraph("duplicate edge " + std::to_string(f.source + 1) + "->" +
                                   std::to_string(f.target + 1));
            out_[static_cast<std::size_t>(f.source)].push_back({f.target, f.weight});
            in_[static_cast<std::size_t>(f.target)].push_back({f.source, f.weight});
        }
        for (auto& adj : in_)
            std::sort(adj.begin(), adj.end(),
                      [](const Neighbor& a, const Neighbor& b) { return a.vertex < b.vertex; });
        for (auto& adj : out_)
            std::sort(adj.begin(), adj.end(),
                      [](const Neighbor& a, const Neighbor& b) { return a.vertex < b.vertex; });
    }

    /// Recovers the graph from a Laplacian. Off-diagonal entries must be
    /// nonpositive and every row must sum to zero within
    /// `row_sum_tol * max|L|`.
    static DiGraph from_laplacian(const Matrix& laplacian, double row_sum_tol = 1e-9) {
        if (laplacian.rows() != laplacian.cols())
            throw InvalidLaplacian("Laplacian must be square");
        const int n = static_cast<int>(laplacian.rows());
        const double scale = n > 0 ? laplacian.cwiseAbs().maxCoeff() : 0.0;
        std::vector<Flow> flows;
        for (int i = 0; i < n; ++i) {
            double row_sum = 0.0;
            for (int j = 0; j < n; ++j) {
                const double v = laplacian(i, j);
                if (!std::isfinite(v)) throw InvalidLaplacian("non-finite Laplacian entry");
                row_sum += v;
                if (i == j) continue;
                if (v > 0.0)
                    throw InvalidLaplacian("positive off-diagonal entry at (" + std::to_string(i + 1) +
                                           "," + std::to_string(j + 1) + ")");
                if (v < 0.0) flows.push_back({j, i, -v});
            }
            if (std::abs(row_sum) > row_sum_tol * scale)
                throw InvalidLaplacian("row " + std::to_string(i + 1) + " does not sum to zero");
        }
        return DiGraph(n, std::move(flows));
    }

    int n() const noexcept { return n_; }
    const std::vector<Flow>& flows() const noexcept { return flows_; }

    /// Vertices whose information flows into v (row v of the adjacency).
    const std::vector<Neighbor>& in_neighbors(int v) const { return in_.at(static_cast<std::size_t>(v)); }
    /// Vertices that receive information from v.
    const std::vector<Neighbor>& out_neighbors(int v) const { return out_.at(static_cast<std::size_t>(v)); }

    /// Weighted adjacency W with W(target, source) = weight.
    Matrix adjacency() const {
        Matrix w = Matrix::Zero(n_, n_);
        for (const Flow& f : flows_) w(f.target, f.source) = f.weight;
        return w;
    }

    DiGraph transposed() const {
        std::vector<Flow> rev;
        rev.reserve(flows_.size());
        for (const Flow& f : flows_) rev.push_back({f.target, f.source, f.weight});
        return DiGraph(n_, std::move(rev));
    }

private:
    int n_ = 0;
    std::vector<Flow> flows_;
    std::vector<std::vector<Neighbor>> in_;
    std::vector<std::vector<Neighbor>> out_;
};

/// L = diag(W 1) - W. The diagonal is formed as the row sum of the
/// off-diagonal entries, so L 1 = 0 holds exactly.
inline Matrix build_laplacian(const DiGraph& g) {
    const int n = g.n();
    Matrix lap = Matrix::Zero(n, n);
    for (const Flow& f : g.flows()) lap(f.target, f.source) = -f.weight;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (const auto& nb : g.in_neighbors(i)) s += nb.weight;
        lap(i, i) = s;
    }
    return lap;
}

struct SccDecomposition {
    /// Components sorted by their smallest vertex; vertices ascending.
    std::vector<std::vector<int>> components;
    std::vector<int> component_of;
    /// True for leading components: no information enters from outside.
    std::vector<bool> is_lscc;
    /// Union of all LSCC vertex sets, ascending.
    std::vector<int> lscc_vertices;
    /// Topological order of the condensation DAG (flow direction).
    std::vector<int> condensation_order;

    std::size_t lscc_count() const {
        return static_cast<std::size_t>(std::count(is_lscc.begin(), is_lscc.end(), true));
    }

    std::vector<std::vector<int>> lsccs() const {
        std::vector<std::vector<int>> out;
        for (std::size_t c = 0; c < components.size(); ++c)
            if (is_lscc[c]) out.push_back(components[c]);
        return out;
    }

    bool in_lscc(int v) const { return is_lscc[static_cast<std::size_t>(component_of[static_cast<std::size_t>(v)])]; }
};

/// Tarjan's algorithm with an explicit call stack, O(n + e).
inline SccDecomposition scc_decompose(const DiGraph& g) {
    const int n = g.n();
    constexpr int kUnvisited = -1;
    std::vector<int> index(static_cast<std::size_t>(n), kUnvisited);
    std::vector<int> low(static_cast<std::size_t>(n), 0);
    std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
    std::vector<int> stack;
    std::vector<std::vector<int>> raw;

    struct Frame {
        int v;
        std::size_t next;
    };
    std::vector<Frame> call;
    int counter = 0;

    for (int root = 0; root < n; ++root) {
        if (index[static_cast<std::size_t>(root)] != kUnvisited) continue;
        call.push_back({root, 0});
        index[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = counter++;
        stack.push_back(root);
        on_stack[static_cast<std::size_t>(root)] = 1;

        while (!call.empty()) {
            Frame& top = call.back();
            const auto v = static_cast<std::size_t>(top.v);
            const auto& succ = g.out_neighbors(top.v);
            if (top.next < succ.size()) {
                const int w = succ[top.next++].vertex;
                const auto wi = static_cast<std::size_t>(w);
                if (index[wi] == kUnvisited) {
                    index[wi] = low[wi] = counter++;
                    stack.push_back(w);
                    on_stack[wi] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[wi]) {
                    low[v] = std::min(low[v], index[wi]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::vector<int> comp;
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[static_cast<std::size_t>(w)] = 0;
                    comp.push_back(w);
                } while (w != top.v);
                std::sort(comp.begin(), comp.end());
                raw.push_back(std::move(comp));
            }
            const int finished = top.v;
            call.pop_back();
            if (!call.empty()) {
                const auto parent = static_cast<std::size_t>(call.back().v);
                low[parent] = std::min(low[parent], low[static_cast<std::size_t>(finished)]);
            }
        }
    }

    std::sort(raw.begin(), raw.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) { return a.front() < b.front(); });

    SccDecomposition out;
    out.components = std::move(raw);
    const std::size_t nc = out.components.size();
    out.component_of.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < nc; ++c)
        for (int v : out.components[c]) out.component_of[static_cast<std::size_t>(v)] = static_cast<int>(c);

    std::vector<std::set<int>> succ(nc);
    std::vector<int> indeg(nc, 0);
    for (const Flow& f : g.flows()) {
        const int a = out.component_of[static_cast<std::size_t>(f.source)];
        const int b = out.component_of[static_cast<std::size_t>(f.target)];
        if (a != b && succ[static_cast<std::size_t>(a)].insert(b).second) ++indeg[static_cast<std::size_t>(b)];
    }
    out.is_lscc.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) out.is_lscc[c] = indeg[c] == 0;

    // Kahn with a min-heap so the order is deterministic.
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (std::size_t c = 0; c < nc; ++c)
        if (indeg[c] == 0) ready.push(static_cast<int>(c));
    while (!ready.empty()) {
        const int c = ready.top();
        ready.pop();
        out.condensation_order.push_back(c);
        for (int d : succ[static_cast<std::size_t>(c)])
            if (--indeg[static_cast<std::size_t>(d)] == 0) ready.push(d);
    }

    for (std::size_t c = 0; c < nc; ++c)
        if (out.is_lscc[c])
            out.lscc_vertices.insert(out.lscc_vertices.end(), out.components[c].begin(), out.components[c].end());
    std::sort(out.lscc_vertices.begin(), out.lscc_vertices.end());
    return out;
}

enum class Connectedness { disconnected, weak, quasi_strong, strong };

inline std::string to_string(Connectedness c) {
    switch (c) {
        case Connectedness::strong: return "strong";
        case Connectedness::quasi_strong: return "quasi_strong";
        case Connectedness::weak: return "weak";
        case Connectedness::disconnected: return "disconnected";
    }
    return "disconnected";
}

inline bool is_weakly_connected(const DiGraph& g) {
    const int n = g.n();
    if (n <= 1) return true;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> todo{0};
    seen[0] = 1;
    int count = 1;
    while (!todo.empty()) {
        const int v = todo.back();
        todo.pop_back();
        auto visit = [&](int w) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                ++count;
                todo.push_back(w);
            }
        };
        for (const auto& nb : g.out_neighbors(v)) visit(nb.vertex);
        for (const auto& nb : g.in_neighbors(v)) visit(nb.vertex);
    }
    return count == n;
}

/// Strongest class that applies.
inline Connectedness connectedness_class(const DiGraph& g, const SccDecomposition& scc) {
    if (scc.components.size() <= 1) return Connectedness::strong;
    // A single leading component can reach everything, which implies weak
    // connectivity.
    if (scc.lscc_count() == 1) return Connectedness::quasi_strong;
    return is_weakly_connected(g) ? Connectedness::weak : Connectedness::disconnected;
}

inline Connectedness connectedness_class(const DiGraph& g) { return connectedness_class(g, scc_decompose(g)); }

/// Vertex order placing every LSCC as a contiguous block first, followed by
/// the remaining components in condensation order. `order[k]` is the
/// original vertex at position k, so `L(order, order)` is block lower
/// triangular with the LSCC blocks decoupled from everything else.
inline std::vector<int> block_triangular_permutation(const SccDecomposition& scc) {
    std::vector<int> order;
    for (std::size_t c = 0; c < scc.components.size(); ++c)
        if (scc.is_lscc[c]) order.insert(order.end(), scc.components[c].begin(), scc.components[c].end());
    for (int c : scc.condensation_order)
        if (!scc.is_lscc[static_cast<std::size_t>(c)])
            order.insert(order.end(), scc.components[static_cast<std::size_t>(c)].begin(),
                         scc.components[static_cast<std::size_t>(c)].end());
    return order;
}

/// Permutation matrix T with T(order[k], k) = 1, so T^T L T = L(order, order).
inline Matrix permutation_matrix(const std::vector<int>& order) {
    const auto n = static_cast<Eigen::Index>(order.size());
    Matrix t = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) t(order[static_cast<std::size_t>(k)], k) = 1.0;
    return t;
}

enum class ReachMode {
    any_source,   ///< reachable from at least one source
    every_source  ///< reachable from every source (strict reading)
};

namespace detail {

template <typename NeighborsFn>
std::vector<char> flood(int n, int start, NeighborsFn&& neighbors) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> todo{start};
    seen[static_cast<std::size_t>(start)] = 1;
    while (!todo.empty()) {
        const int v = todo.back();
        todo.pop_back();
        for (const auto& nb : neighbors(v))
            if (!seen[static_cast<std::size_t>(nb.vertex)]) {
                seen[static_cast<std::size_t>(nb.vertex)] = 1;
                todo.push_back(nb.vertex);
            }
    }
    return seen;
}

template <typename NeighborsFn>
std::vector<int> reach(int n, const std::vector<int>& starts, ReachMode mode, NeighborsFn&& neighbors) {
    const std::set<int> unique(starts.begin(), starts.end());
    if (unique.empty()) return {};
    std::vector<int> hits(static_cast<std::size_t>(n), 0);
    for (int s : unique) {
        if (s < 0 || s >= n) throw InvalidArgument("vertex index out of range: " + std::to_string(s + 1));
        const auto seen = flood(n, s, neighbors);
        for (int v = 0; v < n; ++v) hits[static_cast<std::size_t>(v)] += seen[static_cast<std::size_t>(v)];
    }
    const int need = mode == ReachMode::every_source ? static_cast<int>(unique.size()) : 1;
    std::vector<int> out;
    for (int v = 0; v < n; ++v)
        if (hits[static_cast<std::size_t>(v)] >= need) out.push_back(v);
    return out;
}

}  // namespace detail

/// Vertices that receive information from the sources along flow paths
/// (sources included).
inline std::vector<int> reachable_set(const DiGraph& g, const std::vector<int>& sources,
                                      ReachMode mode = ReachMode::any_source) {
    return detail::reach(g.n(), sources, mode, [&](int v) -> const auto& { return g.out_neighbors(v); });
}

/// Vertices whose information reaches the sinks (sinks included).
inline std::vector<int> detectable_set(const DiGraph& g, const std::vector<int>& sinks,
                                       ReachMode mode = ReachMode::any_source) {
    return detail::reach(g.n(), sinks, mode, [&](int v) -> const auto& { return g.in_neighbors(v); });
}

}  // namespace netred

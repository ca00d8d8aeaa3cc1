#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "netred/graph.hpp"

namespace fixture {

using netred::DiGraph;
using netred::Flow;
using netred::Matrix;
using netred::Vector;

/// Six-vertex weakly connected example with leading components {1,2,3} and
/// {5,6} (0-based ids below).
inline DiGraph six_vertex_graph() {
    return DiGraph(6, {{2, 0, 1.0}, {0, 1, 2.0}, {1, 2, 2.0}, {1, 3, 1.0}, {5, 3, 1.0}, {5, 4, 3.0}, {4, 5, 1.0}});
}

inline Matrix six_vertex_laplacian() {
    Matrix l(6, 6);
    l << 1, 0, -1, 0, 0, 0,  //
        -2, 2, 0, 0, 0, 0,   //
        0, -2, 2, 0, 0, 0,   //
        0, -1, 0, 2, 0, -1,  //
        0, 0, 0, 0, 3, -3,   //
        0, 0, 0, 0, -1, 1;
    return l;
}

struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine); }
    bool coin(double p) { return std::bernoulli_distribution(p)(engine); }
    Matrix gaussian(Eigen::Index r, Eigen::Index c) {
        std::normal_distribution<double> d;
        Matrix m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(engine);
        return m;
    }
};

/// Erdos-Renyi digraph with weights in [0.5, 2].
inline DiGraph random_digraph(Rng& rng, int n, double p) {
    std::vector<Flow> flows;
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t)
            if (s != t && rng.coin(p)) flows.push_back({s, t, rng.uniform(0.5, 2.0)});
    return DiGraph(n, flows);
}

struct Layout {
    std::vector<std::vector<int>> leading;  // vertex sets of the intended LSCCs
    std::vector<int> rest;
};

/// Weakly connected digraph whose leading components are exactly the given
/// sizes; the remaining `n - sum(sizes)` vertices are fed from upstream and may
/// form cycles among themselves. Vertex labels are shuffled.
inline DiGraph random_network(Rng& rng, int n, const std::vector<int>& sizes, double chord_p = 0.3,
                              Layout* layout = nullptr) {
    std::vector<int> label(n);
    std::iota(label.begin(), label.end(), 0);
    std::shuffle(label.begin(), label.end(), rng.engine);

    std::set<std::pair<int, int>> seen;
    std::vector<Flow> flows;
    auto add = [&](int s, int t) {
        if (s == t || !seen.emplace(s, t).second) return;
        flows.push_back({label[s], label[t], rng.uniform(0.5, 2.0)});
    };

    Layout lay;
    int next = 0;
    for (int size : sizes) {
        std::vector<int> block;
        for (int k = 0; k < size; ++k) block.push_back(next + k);
        for (int k = 0; k < size && size > 1; ++k) add(block[k], block[(k + 1) % size]);
        for (int a : block)
            for (int b : block)
                if (a != b && rng.coin(chord_p)) add(a, b);
        next += size;
        std::vector<int> labelled;
        for (int v : block) labelled.push_back(label[v]);
        lay.leading.push_back(labelled);
    }
    const int lead_end = next;
    std::vector<int> block_start;
    for (int b = 0, at = 0; b < static_cast<int>(sizes.size()); at += sizes[static_cast<std::size_t>(b)], ++b)
        block_start.push_back(at);
    for (int v = lead_end; v < n; ++v) {
        add(rng.integer(0, v - 1), v);
        // The first few followers also hear from one leading block each, so
        // every block is attached to the rest of the graph.
        const auto idx = static_cast<std::size_t>(v - lead_end);
        if (idx < block_start.size()) add(block_start[idx], v);
        lay.rest.push_back(label[v]);
    }
    for (int a = lead_end; a < n; ++a)
        for (int b = lead_end; b < n; ++b)
            if (a != b && rng.coin(chord_p / 2.0)) add(a, b);
    for (auto& block : lay.leading) std::sort(block.begin(), block.end());
    std::sort(lay.rest.begin(), lay.rest.end());
    if (layout) *layout = lay;
    return DiGraph(n, flows);
}

/// Random partition of sizes summing to k into `parts` positive sizes.
inline std::vector<int> random_sizes(Rng& rng, int k, int parts) {
    std::vector<int> sizes(static_cast<std::size_t>(parts), 1);
    for (int extra = k - parts; extra > 0; --extra) sizes[static_cast<std::size_t>(rng.integer(0, parts - 1))]++;
    return sizes;
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix.
inline Matrix random_orthogonal(Rng& rng, int n) {
    Eigen::HouseholderQR<Matrix> qr(rng.gaussian(n, n));
    return qr.householderQ() * Matrix::Identity(n, n);
}

/// A = T diag(0_m, S) T^{-1}: a generic semistable matrix that is not a
/// Laplacian. S has a negative definite symmetric part and T has condition
/// number at most 4, so the Gramians stay well conditioned.
inline Matrix random_semistable_matrix(Rng& rng, int n, int m) {
    const int k = n - m;
    const Matrix g = rng.gaussian(k, k) / std::sqrt(static_cast<double>(k));
    const Matrix skew = rng.gaussian(k, k);
    const Matrix s = -(g * g.transpose() + rng.uniform(0.2, 1.0) * Matrix::Identity(k, k)) +
                     (skew - skew.transpose()) / 2.0;
    Matrix d = Matrix::Zero(n, n);
    d.bottomRightCorner(k, k) = s;
    Vector sigma(n);
    for (int i = 0; i < n; ++i) sigma(i) = rng.uniform(0.5, 2.0);
    const Matrix t = random_orthogonal(rng, n) * sigma.asDiagonal() * random_orthogonal(rng, n);
    return t * d * t.inverse();
}

/// Adds vertex n as an input twin of `v`: the same inflows (so the same row
/// of the Laplacian) and one outflow to a random vertex from `targets`.
/// Targets must lie outside every leading component to keep them leading.
inline DiGraph with_input_twin(Rng& rng, const DiGraph& g, int v, const std::vector<int>& targets) {
    const int n = g.n();
    auto flows = g.flows();
    for (const auto& nb : g.in_neighbors(v)) flows.push_back({nb.vertex, n, nb.weight});
    if (!targets.empty())
        flows.push_back({n, targets[static_cast<std::size_t>(rng.integer(0, static_cast<int>(targets.size()) - 1))],
                         rng.uniform(0.5, 2.0)});
    return DiGraph(n + 1, flows);
}

/// Adds vertex n as an output twin of `v`: the same outflows (so the same
/// Laplacian column off the diagonal) and the same total inflow, drawn from
/// `sources` (which must not contain v).
inline DiGraph with_output_twin(Rng& rng, const DiGraph& g, int v, const std::vector<int>& sources) {
    const int n = g.n();
    auto flows = g.flows();
    for (const auto& nb : g.out_neighbors(v)) flows.push_back({n, nb.vertex, nb.weight});
    double total = 0.0;
    for (const auto& nb : g.in_neighbors(v)) total += nb.weight;
    std::vector<double> share(sources.size());
    for (auto& x : share) x = rng.uniform(0.5, 1.5);
    const double sum = std::accumulate(share.begin(), share.end(), 0.0);
    for (std::size_t k = 0; k < sources.size(); ++k) flows.push_back({sources[k], n, total * share[k] / sum});
    return DiGraph(n + 1, flows);
}

/// Sparse random F (n x p) whose nonzero rows lie in `rows`.
inline Matrix random_input(Rng& rng, int n, int p, const std::vector<int>& rows) {
    Matrix f = Matrix::Zero(n, p);
    for (int r : rows)
        for (int c = 0; c < p; ++c) f(r, c) = rng.uniform(-1.0, 1.0);
    return f;
}

/// Large weakly connected network: one region per leading block, each fed
/// only by its own block, plus `bridges` sinks that hear two regions. Vertex
/// ids are not shuffled: blocks first, then regions, then bridges.
struct ScaleNetwork {
    DiGraph graph;
    std::vector<std::vector<int>> leading;
    std::vector<std::vector<int>> regions;
    std::vector<int> bridges;
};

inline ScaleNetwork scale_network(Rng& rng, int n, const std::vector<int>& block_sizes, int bridges) {
    ScaleNetwork out;
    std::vector<Flow> flows;
    std::set<std::pair<int, int>> seen;
    auto add = [&](int s, int t) {
        if (s != t && seen.emplace(s, t).second) flows.push_back({s, t, rng.uniform(0.5, 2.0)});
    };
    int next = 0;
    for (int size : block_sizes) {
        std::vector<int> block;
        for (int k = 0; k < size; ++k) block.push_back(next++);
        for (int k = 0; k < size && size > 1; ++k) add(block[k], block[(k + 1) % size]);
        for (int k = 0; k < size; ++k)
            if (size > 2 && rng.coin(0.5)) add(block[k], block[static_cast<std::size_t>(rng.integer(0, size - 1))]);
        out.leading.push_back(block);
    }
    const int blocks = static_cast<int>(block_sizes.size());
    const int rest = n - next - bridges;
    out.regions.resize(block_sizes.size());
    for (int k = 0; k < rest; ++k) {
        const int b = k % blocks;
        const int v = next++;
        auto& region = out.regions[static_cast<std::size_t>(b)];
        // Feed from the block or an earlier region vertex, plus a few chords.
        const auto& block = out.leading[static_cast<std::size_t>(b)];
        if (region.empty() || rng.coin(0.2))
            add(block[static_cast<std::size_t>(rng.integer(0, static_cast<int>(block.size()) - 1))], v);
        else add(region[static_cast<std::size_t>(rng.integer(0, static_cast<int>(region.size()) - 1))], v);
        for (int extra = 0; extra < 2 && !region.empty(); ++extra)
            if (rng.coin(0.5)) add(region[static_cast<std::size_t>(rng.integer(0, static_cast<int>(region.size()) - 1))], v);
        if (!region.empty() && rng.coin(0.3))
            add(v, region[static_cast<std::size_t>(rng.integer(0, static_cast<int>(region.size()) - 1))]);
        region.push_back(v);
    }
    for (int k = 0; k < bridges; ++k) {
        const int v = next++;
        const int a = k % blocks, b = (k + 1) % blocks;
        for (int r : {a, b}) {
            const auto& region = out.regions[static_cast<std::size_t>(r)];
            add(region[static_cast<std::size_t>(rng.integer(0, static_cast<int>(region.size()) - 1))], v);
        }
        out.bridges.push_back(v);
    }
    out.graph = DiGraph(n, flows);
    return out;
}

}  // namespace fixture

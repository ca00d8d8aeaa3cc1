#pragma once

// End-to-end reduction: structural analysis, minimal realization,
// dissimilarity-driven clustering, projection and error evaluation.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "netred/balance.hpp"
#include "netred/error.hpp"
#include "netred/graph.hpp"
#include "netred/reduction.hpp"
#include "netred/semistable.hpp"

namespace netred {

struct PipelineOptions {
    ReductionOptions reduction;
    ErrorOptions error;
    bool skip_minimal_realization = false;
    /// Accept user clusterings that are not proper.
    bool force = false;
};

struct Analysis {
    int n = 0;
    Connectedness connectedness = Connectedness::disconnected;
    std::vector<std::vector<int>> sccs;
    std::vector<std::vector<int>> lsccs;
    Vector m;
    bool generalized_balanced = false;
    bool semistable = false;
    std::string semistable_message;
    /// Dimension of the consensus subspace (zero-eigenvalue multiplicity).
    Eigen::Index null_dimension = 0;
    /// Smallest order reachable by a proper clustering.
    int min_order = 0;
    std::optional<bool> controllable;
    std::optional<bool> observable;
    std::vector<int> input_vertices;
    std::vector<int> output_vertices;
};

inline Analysis analyze(const NetworkSystem& sys, const PipelineOptions& opts = {}) {
    Analysis a;
    a.n = sys.n();
    a.connectedness = connectedness_class(sys.graph(), sys.scc());
    a.sccs = sys.scc().components;
    a.lsccs = sys.scc().lsccs();
    a.m = sys.m();
    a.generalized_balanced = is_generalized_balanced(sys.balanced().laplacian, sys.scc());
    a.input_vertices = sys.input_vertices();
    a.output_vertices = sys.output_vertices();
    try {
        const auto dec = decompose(sys, opts.reduction.semistable);
        a.semistable = true;
        a.null_dimension = dec.m;
        a.min_order = clusterable_classes(sys, dec, opts.reduction).count;
        const auto gram = pseudo_gramians(dec, sys.F(), sys.H());
        a.controllable = controllability_test(dec, gram.P, sys.F());
        a.observable = observability_test(dec, gram.Q, sys.H());
    } catch (const NotSemistable& e) {
        a.semistable = false;
        a.semistable_message = e.what();
    }
    return a;
}

struct ReductionResult {
    /// Present unless the minimal realization step was skipped.
    std::optional<MinimalRealization> minimal;
    /// The system the clustering acts on (the minimal realization, or the
    /// input system).
    NetworkSystem base;
    ClusterableClasses classes;
    DissimilarityMatrix dissimilarity;
    Clustering clustering;
    ReducedNetwork reduced;
    ErrorReport report;
    /// Same error from the stacked error system, when bounded.
    std::optional<double> direct_error;
};

/// Reduces `sys` to order r by the distance-graph clustering, or applies
/// `user_clustering` (over the vertices of the base system) if given.
inline ReductionResult reduce(const NetworkSystem& sys, int r, const PipelineOptions& opts = {},
                              const std::optional<Clustering>& user_clustering = std::nullopt) {
    ReductionResult out;
    if (opts.skip_minimal_realization) {
        out.base = sys;
    } else {
        out.minimal = minimal_network_realization(sys, opts.reduction);
        out.base = out.minimal->system;
    }
    const NetworkSystem& base = out.base;
    const auto dec = decompose(base, opts.reduction.semistable);
    out.classes = clusterable_classes(base, dec, opts.reduction);
    const auto factors = pseudo_gramian_factors(dec, base.F(), base.H());
    out.dissimilarity = dissimilarity_matrix(base, factors, out.classes);

    if (user_clustering) {
        out.clustering = *user_clustering;
    } else {
        if (r < 1) throw InvalidArgument("order must be at least 1");
        if (r < out.classes.count)
            throw OrderTooSmall("order " + std::to_string(r) + " is below the number of clusterable classes (" +
                                std::to_string(out.classes.count) + ")",
                                out.classes.count);
        const auto x = distance_graph(out.dissimilarity, opts.reduction);
        out.clustering = select_clustering(x.X, std::min(r, base.n()));
    }
    out.reduced = project(base, out.clustering, out.classes, opts.force);

    const ErrorEvaluator ev(base, opts.error);
    if (!ev.bounded(out.reduced)) {
        out.report.method = "thm8_formula";
        out.report.bounded = false;
        out.report.residuals["boundedness"] = ev.boundedness_gap(out.reduced);
        out.report.tolerances["boundedness"] = opts.error.bounded_tol;
        return out;
    }
    out.report = ev.thm8(out.reduced);
    const auto direct = ev.direct(out.reduced);
    out.direct_error = direct.h2_error;
    out.report.residuals["direct_h2_error"] = *direct.h2_error;
    return out;
}

}  // namespace netred

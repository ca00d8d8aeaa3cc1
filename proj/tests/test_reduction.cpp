#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cases.hpp"
#include "fixtures.hpp"
#include "netred/error.hpp"
#include "netred/reduction.hpp"
#include "oracles.hpp"

using namespace netred;

namespace {

Matrix eye(int n) { return Matrix::Identity(n, n); }

NetworkSystem example_system() { return NetworkSystem(fixture::six_vertex_graph(), eye(6), eye(6)); }

struct Prepared {
    NetworkSystem sys;
    SemistableDecomposition dec;
    ClusterableClasses classes;

    explicit Prepared(NetworkSystem s) : sys(std::move(s)), dec(decompose(sys)), classes(clusterable_classes(sys, dec)) {}

    DissimilarityMatrix dissimilarity() const {
        return dissimilarity_matrix(sys, pseudo_gramian_factors(dec, sys.F(), sys.H()), classes);
    }
};

/// Random weakly connected network with an input on one vertex of every
/// leading component and a dense two-row output.
NetworkSystem random_system(fixture::Rng& rng, int n, int leading, fixture::Layout* layout = nullptr) {
    fixture::Layout lay;
    const int k = rng.integer(leading, std::max(leading, n / 2));
    const DiGraph g = fixture::random_network(rng, n, fixture::random_sizes(rng, k, leading), 0.3, &lay);
    std::vector<int> rows;
    for (const auto& block : lay.leading) rows.push_back(block.front());
    if (layout) *layout = lay;
    return NetworkSystem(g, fixture::random_input(rng, n, 2, rows), rng.gaussian(2, n));
}

std::vector<std::set<int>> as_sets(const Clustering& c) {
    std::vector<std::set<int>> out;
    for (const auto& cell : c.cells()) out.emplace_back(cell.begin(), cell.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Clusterability, SixVertexPairs) {
    const Prepared p(example_system());
    EXPECT_TRUE(clusterable(p.sys, p.dec, 0, 1));
    EXPECT_TRUE(clusterable(p.sys, p.dec, 0, 2));
    EXPECT_FALSE(clusterable(p.sys, p.dec, 0, 3));
    EXPECT_TRUE(clusterable(p.sys, p.dec, 4, 5));
    EXPECT_FALSE(clusterable(p.sys, p.dec, 3, 4));
    EXPECT_FALSE(clusterable(p.sys, p.dec, 2, 4));
    EXPECT_EQ(p.classes.count, 3);
}

TEST(Clusterability, StronglyConnectedMakesEveryPairClusterable) {
    auto flows = fixture::six_vertex_graph().flows();
    flows.push_back({3, 4, 1.0});
    flows.push_back({3, 1, 1.0});
    const Prepared p(NetworkSystem(DiGraph(6, flows), eye(6), eye(6)));
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) EXPECT_TRUE(clusterable(p.sys, p.dec, i, j));
    EXPECT_EQ(p.classes.count, 1);
}

TEST(Clusterability, StructuralAndNullSpaceTestsAgree) {
    fixture::Rng rng(101);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = rng.integer(4, 14);
        const Prepared p(random_system(rng, n, rng.integer(1, std::min(3, n / 2))));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                EXPECT_EQ(clusterable(p.sys, p.dec, i, j), clusterable_numeric(p.sys, p.dec, i, j))
                    << "trial " << trial << " pair " << i << "," << j;
                EXPECT_EQ(clusterable(p.sys, p.dec, i, j), p.classes.together(i, j));
            }
    }
}

TEST(Clusterability, FollowersOfDifferentLeadersAreNotClusterable) {
    // Two leading rings {0,1} and {2,3}; 4 hears only the first, 5 only the
    // second, 6 both. None of 4, 5, 6 is leading, yet they settle to
    // different consensus values.
    const DiGraph g(7, {{0, 1, 1.0}, {1, 0, 1.0}, {2, 3, 1.0}, {3, 2, 1.0}, {0, 4, 1.0}, {2, 5, 1.0}, {1, 6, 1.0},
                        {3, 6, 1.0}});
    const Prepared p(NetworkSystem(g, eye(7), eye(7)));
    EXPECT_FALSE(clusterable(p.sys, p.dec, 4, 5));
    EXPECT_FALSE(clusterable(p.sys, p.dec, 4, 6));
    EXPECT_EQ(p.classes.count, 5);

    // Merging them anyway loses the limit matrix.
    const Clustering c(7, {{0, 1}, {2, 3}, {4, 5}, {6}});
    const auto red = project(p.sys, c, p.classes, /*force=*/true);
    EXPECT_FALSE(red.proper);
    EXPECT_FALSE(boundedness_test(p.sys, red));
}

TEST(Clusterability, FollowersOfOneLeaderAreClusterable) {
    const DiGraph g(5, {{0, 1, 1.0}, {1, 0, 2.0}, {0, 2, 1.0}, {2, 3, 0.5}, {1, 4, 3.0}, {3, 4, 1.0}});
    const Prepared p(NetworkSystem(g, eye(5), eye(5)));
    EXPECT_TRUE(clusterable(p.sys, p.dec, 2, 3));
    EXPECT_TRUE(clusterable(p.sys, p.dec, 2, 4));
    EXPECT_EQ(p.classes.count, 2);
}

TEST(Dissimilarity, TwoVertexDifferenceSystem) {
    Matrix lap(2, 2);
    lap << 1, -1, -1, 1;
    Matrix f(2, 1);
    f << 1, -1;
    const Prepared p(NetworkSystem(lap, f, f.transpose()));
    const auto d = p.dissimilarity();
    EXPECT_NEAR(d.value(0, 1), 1.0, 1e-12);
    const auto dg = dissimilarity_matrix(p.sys, pseudo_gramians(p.dec, p.sys.F(), p.sys.H()), p.classes);
    EXPECT_NEAR(dg.value(0, 1), 1.0, 1e-12);
}

TEST(Dissimilarity, StructureAndMarkers) {
    const Prepared p(example_system());
    const auto d = p.dissimilarity();
    for (int i = 0; i < 6; ++i) {
        EXPECT_EQ(d.value(i, i), 0.0);
        for (int j = 0; j < 6; ++j) {
            EXPECT_EQ(d.value(i, j), d.value(j, i));
            EXPECT_EQ(d.clusterable(i, j), p.classes.together(i, j));
            EXPECT_EQ(std::isfinite(d.value(i, j)), d.clusterable(i, j));
            if (d.clusterable(i, j)) EXPECT_DOUBLE_EQ(d.value(i, j), d.input(i, j) * d.output(i, j));
        }
    }
}

TEST(Dissimilarity, TwinVerticesAreZero) {
    // Leading ring {0,3}; 1 and 2 hear 0 with the same weight and feed 4
    // with the same weight; only 0 is driven and only 4 is measured.
    const DiGraph g(5, {{0, 3, 1.0}, {3, 0, 1.0}, {0, 1, 1.5}, {0, 2, 1.5}, {1, 4, 0.7}, {2, 4, 0.7}});
    Matrix f = Matrix::Zero(5, 1);
    f(0, 0) = 1.0;
    Matrix h = Matrix::Zero(1, 5);
    h(0, 4) = 1.0;
    const Prepared p(NetworkSystem(g, f, h));
    const auto d = p.dissimilarity();
    double largest = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            if (d.clusterable(i, j)) largest = std::max(largest, d.value(i, j));
    EXPECT_LE(d.value(1, 2), 1e-14 * largest);
    EXPECT_GT(d.value(1, 4), 1e-3 * largest);
    // The Gramian route can only resolve this to about sqrt(eps).
    const auto dg = dissimilarity_matrix(p.sys, pseudo_gramians(p.dec, p.sys.F(), p.sys.H()), p.classes);
    EXPECT_LE(dg.value(1, 2), 1e-6 * largest);
}

TEST(Dissimilarity, MatchesImpulseResponseQuadrature) {
    fixture::Rng rng(103);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = rng.integer(3, 7);
        const Prepared p(random_system(rng, n, rng.integer(1, 2)));
        const auto d = p.dissimilarity();
        const Matrix a = -p.sys.laplacian();
        const double horizon = oracle::settling_time(a, 1e-14);
        const Matrix pq = oracle::quadrature_gramian(a, p.sys.F(), horizon, 300);
        const Matrix qq = oracle::quadrature_gramian(a.transpose(), p.sys.H().transpose(), horizon, 300);
        const Vector minv = p.sys.m().cwiseInverse();
        double scale_in = 0.0, scale_out = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (d.clusterable(i, j)) {
                    scale_in = std::max(scale_in, d.input(i, j) * d.input(i, j));
                    scale_out = std::max(scale_out, d.output(i, j) * d.output(i, j));
                }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                if (!d.clusterable(i, j)) continue;
                Vector e = Vector::Zero(n);
                e(i) = 1.0;
                e(j) = -1.0;
                const double di2 = e.dot(pq * e);
                const Vector em = minv.asDiagonal() * e;
                const double do2 = em.dot(qq * em);
                EXPECT_NEAR(d.input(i, j) * d.input(i, j), di2, 1e-6 * std::max(scale_in, 1e-12)) << trial;
                EXPECT_NEAR(d.output(i, j) * d.output(i, j), do2, 1e-6 * std::max(scale_out, 1e-12)) << trial;
            }
    }
}

TEST(Dissimilarity, FactorAndGramianRoutesAgree) {
    fixture::Rng rng(105);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = rng.integer(4, 16);
        const Prepared p(random_system(rng, n, rng.integer(1, 3)));
        const auto a = p.dissimilarity();
        const auto b = dissimilarity_matrix(p.sys, pseudo_gramians(p.dec, p.sys.F(), p.sys.H()), p.classes);
        double largest = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (a.clusterable(i, j)) largest = std::max(largest, a.value(i, j));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                ASSERT_EQ(a.clusterable(i, j), b.clusterable(i, j));
                if (a.clusterable(i, j)) EXPECT_NEAR(a.value(i, j), b.value(i, j), 1e-6 * largest);
            }
    }
}

TEST(ZeroDissimilarity, TwinLeavesCarryTheirRowSum) {
    const DiGraph g(4, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 2.0}, {1, 3, 2.0}});
    Matrix f = Matrix::Zero(4, 1);
    f(0, 0) = 1.0;
    const Prepared p(NetworkSystem(g, f, Matrix::Ones(1, 4)));
    const auto pairs = zero_dissimilar_pairs(p.sys, p.classes);
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].i, 2);
    EXPECT_EQ(pairs[0].j, 3);
    EXPECT_EQ(pairs[0].kind, ZeroDissimilarPair::Kind::input);
    EXPECT_EQ(pairs[0].beta, 2.0);
    EXPECT_EQ(pairs[0].residual, 0.0);
}

TEST(ZeroDissimilarity, DistinctInputRowBlocksDetection) {
    const DiGraph g(4, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 2.0}, {1, 3, 2.0}});
    Matrix f = Matrix::Zero(4, 1);
    f(2, 0) = 1.0;
    const Prepared p(NetworkSystem(g, f, eye(4)));
    const auto pairs = zero_dissimilar_pairs(p.sys, p.classes);
    EXPECT_TRUE(std::none_of(pairs.begin(), pairs.end(), [](const auto& q) { return q.i == 2 && q.j == 3; }));
    // The ring's difference mode is never excited, so 0 and 1 still pair up.
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].i, 0);
    EXPECT_EQ(pairs[0].j, 1);
}

TEST(ZeroDissimilarity, OutputTwinsDetected) {
    fixture::Rng rng(107);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = rng.integer(5, 10);
        fixture::Layout lay;
        const DiGraph g = fixture::random_network(rng, n, {rng.integer(2, 3)}, 0.3, &lay);
        const int v = lay.rest[static_cast<std::size_t>(rng.integer(0, static_cast<int>(lay.rest.size()) - 1))];
        std::vector<int> sources;
        for (int s = 0; s < n; ++s)
            if (s != v && rng.coin(0.4)) sources.push_back(s);
        if (sources.empty()) sources.push_back(v == 0 ? 1 : 0);
        const DiGraph g2 = fixture::with_output_twin(rng, g, v, sources);
        Matrix h = rng.gaussian(2, n + 1);
        h.col(n) = h.col(v);
        Matrix f = fixture::random_input(rng, n + 1, 2, {lay.leading[0].front()});
        const Prepared p(NetworkSystem(g2, f, h));
        const auto pairs = zero_dissimilar_pairs(p.sys, p.classes);
        const auto it = std::find_if(pairs.begin(), pairs.end(), [&](const auto& q) { return q.i == v && q.j == n; });
        ASSERT_NE(it, pairs.end()) << trial;
        EXPECT_EQ(it->kind, ZeroDissimilarPair::Kind::output);
        EXPECT_NEAR(it->beta, p.sys.laplacian()(v, v), 1e-12);
        EXPECT_LE(p.dissimilarity().output(v, n), 1e-12);
    }
}

TEST(ZeroDissimilarity, RandomWeightedGraphsHaveNone) {
    fixture::Rng rng(109);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = rng.integer(3, 12);
        const Prepared p(random_system(rng, n, rng.integer(1, std::min(3, n / 2))));
        EXPECT_TRUE(zero_dissimilar_pairs(p.sys, p.classes).empty()) << trial;
    }
}

TEST(ZeroDissimilarity, MinimalSystemsHaveNone) {
    // Sparse inputs and outputs so the question is not settled by F or H
    // alone; keep only systems that are controllable and observable.
    fixture::Rng rng(111);
    int kept = 0;
    for (int trial = 0; kept < 60 && trial < 1000; ++trial) {
        const auto sys = fixture::random_minimal_candidate(rng);
        if (!sys) continue;
        ++kept;
        EXPECT_TRUE(zero_dissimilar_pairs(*sys, clusterable_classes(*sys, decompose(*sys))).empty()) << trial;
    }
    EXPECT_GE(kept, 50);
}

TEST(MinimalRealization, RemovesUndetectableSink) {
    auto flows = fixture::six_vertex_graph().flows();
    flows.push_back({3, 6, 1.0});
    Matrix h = Matrix::Zero(6, 7);
    h.leftCols(6) = eye(6);
    Matrix f = Matrix::Zero(7, 6);
    f.topRows(6) = eye(6);
    const NetworkSystem sys(DiGraph(7, flows), f, h);
    const auto mr = minimal_network_realization(sys);
    ASSERT_EQ(mr.log.size(), 1u);
    EXPECT_EQ(mr.log[0].kind, RealizationStep::Kind::removed_undetectable);
    EXPECT_EQ(mr.log[0].vertices, std::vector<int>{6});
    EXPECT_EQ(mr.system.laplacian(), fixture::six_vertex_laplacian());
    EXPECT_LE(*h2_error_between(sys, mr.system).h2_error, 1e-8);
}

TEST(MinimalRealization, MergesTwinLeavesExactly) {
    const DiGraph g(4, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 2.0}, {1, 3, 2.0}});
    Matrix f = Matrix::Zero(4, 1);
    f(0, 0) = 1.0;
    const NetworkSystem sys(g, f, Matrix::Ones(1, 4));
    const auto mr = minimal_network_realization(sys);
    EXPECT_EQ(mr.system.n(), 3);
    ASSERT_EQ(mr.log.size(), 1u);
    EXPECT_EQ(mr.log[0].kind, RealizationStep::Kind::merged_input);
    EXPECT_EQ(mr.log[0].vertices, (std::vector<int>{2, 3}));
    EXPECT_EQ(mr.log[0].beta, 2.0);
    EXPECT_EQ(mr.origin.back(), (std::vector<int>{2, 3}));
    const auto err = h2_error_between(sys, mr.system);
    ASSERT_TRUE(err.bounded);
    EXPECT_LE(*err.h2_error, 1e-8);
}

TEST(MinimalRealization, MinimalSystemIsUnchanged) {
    const auto sys = example_system();
    const auto mr = minimal_network_realization(sys);
    EXPECT_TRUE(mr.unchanged());
    EXPECT_EQ(mr.system.laplacian(), sys.laplacian());
    EXPECT_EQ(mr.system.F(), sys.F());
    EXPECT_EQ(mr.system.H(), sys.H());
}

TEST(MinimalRealization, NoInputIsDegenerate) {
    const NetworkSystem sys(fixture::six_vertex_graph(), Matrix::Zero(6, 1), eye(6));
    EXPECT_THROW(minimal_network_realization(sys), DegenerateNetwork);
    const NetworkSystem blind(fixture::six_vertex_graph(), eye(6), Matrix::Zero(1, 6));
    EXPECT_THROW(minimal_network_realization(blind), DegenerateNetwork);
}

TEST(MinimalRealization, UnreachableFeederBecomesAnchor) {
    // 2 has no input but pulls 3 towards its (zero) state.
    const DiGraph g(4, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 3, 1.0}, {2, 3, 2.0}});
    Matrix f = Matrix::Zero(4, 1);
    f(0, 0) = 1.0;
    Matrix h = Matrix::Zero(1, 4);
    h(0, 3) = 1.0;
    const NetworkSystem sys(g, f, h);
    const auto mr = minimal_network_realization(sys);
    ASSERT_TRUE(mr.anchor.has_value());
    EXPECT_EQ(mr.system.n(), 4);
    EXPECT_EQ(mr.origin[static_cast<std::size_t>(*mr.anchor)], std::vector<int>{2});
    EXPECT_EQ(mr.system.F().row(*mr.anchor).norm(), 0.0);
    // The anchor has no inflow and keeps the grounding weight.
    EXPECT_EQ(mr.system.laplacian().row(*mr.anchor).norm(), 0.0);
    EXPECT_LE(*h2_error_between(sys, mr.system).h2_error, 1e-8);
}

TEST(MinimalRealization, StrictReachabilityRemovesMore) {
    // Two driven rings, each feeding its own follower and both feeding 6.
    const DiGraph g(7, {{0, 1, 1.0}, {1, 0, 1.0}, {2, 3, 1.0}, {3, 2, 1.0}, {1, 4, 1.0}, {3, 5, 1.0}, {4, 6, 1.0},
                        {5, 6, 1.0}});
    Matrix f = Matrix::Zero(7, 2);
    f(0, 0) = 1.0;
    f(2, 1) = 1.0;
    Matrix h = Matrix::Zero(1, 7);
    h(0, 6) = 1.0;
    const NetworkSystem sys(g, f, h);
    ReductionOptions any;
    ReductionOptions strict;
    strict.reach_mode = ReachMode::every_source;
    EXPECT_TRUE(minimal_network_realization(sys, any).unchanged());
    const auto mr = minimal_network_realization(sys, strict);
    EXPECT_FALSE(mr.unchanged());
    EXPECT_LT(mr.system.n(), 7);
}

TEST(MinimalRealization, ConstructedRedundancyReducesWithZeroError) {
    fixture::Rng rng(113);
    for (int trial = 0; trial < 30; ++trial) {
        const NetworkSystem sys = fixture::redundant_network(rng);
        const int n = sys.n();
        const auto mr = minimal_network_realization(sys);
        EXPECT_LE(mr.system.n(), n - 2) << trial;

        std::set<RealizationStep::Kind> kinds;
        for (const auto& s : mr.log) kinds.insert(s.kind);
        EXPECT_TRUE(kinds.count(RealizationStep::Kind::removed_undetectable)) << trial;
        EXPECT_TRUE(kinds.count(RealizationStep::Kind::anchored)) << trial;
        EXPECT_TRUE(kinds.count(RealizationStep::Kind::merged_input)) << trial;

        const auto err = h2_error_between(sys, mr.system);
        ASSERT_TRUE(err.bounded) << trial;
        EXPECT_LE(*err.h2_error, 1e-8) << trial;

        // Fixed point: nothing left to remove or merge.
        const Prepared p(mr.system);
        EXPECT_TRUE(zero_dissimilar_pairs(p.sys, p.classes).empty()) << trial;
        EXPECT_EQ(detectable_set(p.sys.graph(), p.sys.output_vertices()).size(), static_cast<std::size_t>(p.sys.n()));
    }
}

TEST(DistanceGraph, NothingClusterableGivesZero) {
    DissimilarityMatrix d;
    const double inf = std::numeric_limits<double>::infinity();
    d.value = Matrix::Constant(3, 3, inf);
    d.value.diagonal().setZero();
    d.input = d.output = d.value;
    d.clusterable.setConstant(3, 3, false);
    for (int i = 0; i < 3; ++i) d.clusterable(i, i) = true;
    const auto x = distance_graph(d);
    EXPECT_EQ(x.X, Matrix::Zero(3, 3));
    EXPECT_EQ(x.laplacian, Matrix::Zero(3, 3));
}

TEST(DistanceGraph, SinglePair) {
    DissimilarityMatrix d;
    const double inf = std::numeric_limits<double>::infinity();
    d.value = Matrix::Constant(3, 3, inf);
    d.value.diagonal().setZero();
    d.value(0, 1) = d.value(1, 0) = 2.0;
    d.input = d.output = d.value;
    d.clusterable.setConstant(3, 3, false);
    for (int i = 0; i < 3; ++i) d.clusterable(i, i) = true;
    d.clusterable(0, 1) = d.clusterable(1, 0) = true;
    const auto x = distance_graph(d);
    EXPECT_EQ(x.X(0, 1), 0.5);
    Matrix block(2, 2);
    block << 0.5, -0.5, -0.5, 0.5;
    EXPECT_EQ(x.laplacian.topLeftCorner(2, 2), block);
    EXPECT_EQ(x.laplacian.row(2).norm(), 0.0);
}

TEST(DistanceGraph, SixVertexZeroAcrossClasses) {
    const Prepared p(example_system());
    const auto x = distance_graph(p.dissimilarity());
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            if (i == j || !p.classes.together(i, j)) EXPECT_EQ(x.X(i, j), 0.0);
            else EXPECT_GT(x.X(i, j), 0.0);
        }
    EXPECT_EQ(x.laplacian, x.laplacian.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(x.laplacian);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * x.laplacian.norm());
}

TEST(DistanceGraph, ZeroDissimilarityMustBeMergedFirst) {
    const DiGraph g(4, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 2.0}, {1, 3, 2.0}});
    Matrix f = Matrix::Zero(4, 1);
    f(0, 0) = 1.0;
    const Prepared p(NetworkSystem(g, f, Matrix::Ones(1, 4)));
    EXPECT_THROW(distance_graph(p.dissimilarity()), ZeroDissimilarityPresent);
}

TEST(SelectClustering, SixVertexOrderThree) {
    const Prepared p(example_system());
    const auto c = select_clustering(distance_graph(p.dissimilarity()).X, 3);
    EXPECT_EQ(c.cells(), (std::vector<std::vector<int>>{{0, 1, 2}, {3}, {4, 5}}));
    EXPECT_TRUE(is_proper(c, p.classes));
}

TEST(SelectClustering, FullOrderGivesSingletons) {
    const Prepared p(example_system());
    const auto c = select_clustering(distance_graph(p.dissimilarity()).X, 6);
    EXPECT_EQ(c.characteristic(), eye(6));
}

TEST(SelectClustering, BelowClassCountThrows) {
    const Prepared p(example_system());
    const auto x = distance_graph(p.dissimilarity()).X;
    try {
        select_clustering(x, 2);
        FAIL() << "expected OrderTooSmall";
    } catch (const OrderTooSmall& e) {
        EXPECT_EQ(e.min_order(), 3);
    }
}

TEST(SelectClustering, ClassCountGivesClasses) {
    fixture::Rng rng(115);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = rng.integer(4, 14);
        const Prepared p(random_system(rng, n, rng.integer(1, std::min(3, n / 2))));
        const auto c = select_clustering(distance_graph(p.dissimilarity()).X, p.classes.count);
        std::vector<std::set<int>> expected(static_cast<std::size_t>(p.classes.count));
        for (int v = 0; v < n; ++v) expected[static_cast<std::size_t>(p.classes.class_of[static_cast<std::size_t>(v)])].insert(v);
        std::sort(expected.begin(), expected.end());
        EXPECT_EQ(as_sets(c), expected);
        // Every intermediate order is proper and has the requested size.
        for (int r = p.classes.count; r <= n; ++r) {
            const auto cr = select_clustering(distance_graph(p.dissimilarity()).X, r);
            EXPECT_EQ(cr.order(), r);
            EXPECT_TRUE(is_proper(cr, p.classes));
        }
    }
}

TEST(SelectClustering, EquivariantUnderRelabeling) {
    fixture::Rng rng(117);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = rng.integer(3, 12);
        Matrix x = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.coin(0.6)) x(i, j) = x(j, i) = rng.uniform(0.1, 10.0);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine);
        Matrix y(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) y(perm[i], perm[j]) = x(i, j);
        for (int r = n; r >= 1; --r) {
            Clustering a, b;
            try {
                a = select_clustering(x, r);
            } catch (const OrderTooSmall&) {
                EXPECT_THROW(select_clustering(y, r), OrderTooSmall);
                break;
            }
            b = select_clustering(y, r);
            std::vector<std::set<int>> mapped;
            for (const auto& cell : a.cells()) {
                std::set<int> s;
                for (int v : cell) s.insert(perm[static_cast<std::size_t>(v)]);
                mapped.push_back(s);
            }
            std::sort(mapped.begin(), mapped.end());
            EXPECT_EQ(mapped, as_sets(b));
        }
    }
}

TEST(SelectClustering, TiesGoToTheSmallerPair) {
    Matrix x = Matrix::Ones(4, 4);
    x.diagonal().setZero();
    EXPECT_EQ(select_clustering(x, 3).cells(), (std::vector<std::vector<int>>{{0, 1}, {2}, {3}}));
    EXPECT_EQ(select_clustering(x, 2).cells(), (std::vector<std::vector<int>>{{0, 1, 2}, {3}}));
}

TEST(Project, SixVertexProperClustering) {
    const Prepared p(example_system());
    const auto red = project(p.sys, Clustering(6, {{0, 1, 2}, {3}, {4, 5}}), p.classes);
    Matrix expected(3, 3);
    expected << 0, 0, 0, -1, 2, -1, 0, 0, 0;
    EXPECT_LE((red.Lhat - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(red.proper);
    EXPECT_TRUE(boundedness_test(p.sys, red));
}

TEST(Project, SixVertexImproperClustering) {
    const Prepared p(example_system());
    const Clustering c(6, {{0, 1}, {2, 3}, {4, 5}});
    EXPECT_THROW(project(p.sys, c, p.classes), ImproperClustering);
    const auto red = project(p.sys, c, p.classes, /*force=*/true);
    Matrix expected(3, 3);
    expected << 2.0 / 3.0, -2.0 / 3.0, 0, -1.5, 2, -0.5, 0, 0, 0;
    EXPECT_LE((red.Lhat - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_FALSE(red.proper);
    EXPECT_FALSE(boundedness_test(p.sys, red));
}

TEST(Project, IdentityClusteringIsTheIdentity) {
    fixture::Rng rng(119);
    const Prepared p(random_system(rng, 9, 2));
    const auto red = project(p.sys, Clustering::identity(9), p.classes);
    EXPECT_LE((red.Lhat - p.sys.laplacian()).cwiseAbs().maxCoeff(), 1e-14 * p.sys.laplacian().norm());
    EXPECT_EQ(red.Fhat, p.sys.F());
    EXPECT_EQ(red.Hhat, p.sys.H());
    EXPECT_EQ(red.Pi, eye(9));
}

TEST(Project, ReducedLaplacianKeepsSignPattern) {
    fixture::Rng rng(121);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = rng.integer(3, 14);
        const Prepared p(random_system(rng, n, rng.integer(1, std::min(3, n / 2))));
        // Arbitrary (possibly improper) clustering.
        const int r = rng.integer(1, n);
        std::vector<int> label(static_cast<std::size_t>(n));
        for (int v = 0; v < n; ++v) label[static_cast<std::size_t>(v)] = v < r ? v : rng.integer(0, r - 1);
        const auto red = project(p.sys, Clustering::from_labels(label), p.classes, true);
        EXPECT_LE(red.Lhat.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, red.Lhat.norm()));
        for (Eigen::Index i = 0; i < red.Lhat.rows(); ++i) {
            EXPECT_GE(red.Lhat(i, i), 0.0);
            for (Eigen::Index j = 0; j < red.Lhat.cols(); ++j)
                if (i != j) EXPECT_LE(red.Lhat(i, j), 1e-12);
        }
        EXPECT_LE((red.PiDagger * red.Pi - eye(red.clustering.order())).norm(), 1e-14 * n);
        EXPECT_EQ(red.Pi.rowwise().sum(), Vector::Ones(n));
    }
}

TEST(Project, ProperClusteringsPreserveTheLimitMatrix) {
    fixture::Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = rng.integer(3, 14);
        const Prepared p(random_system(rng, n, rng.integer(1, std::min(3, n / 2))));
        // Random proper clustering: split every class into random cells.
        std::vector<int> label(static_cast<std::size_t>(n));
        for (int v = 0; v < n; ++v)
            label[static_cast<std::size_t>(v)] = p.classes.class_of[static_cast<std::size_t>(v)] * n + rng.integer(0, 2);
        const auto red = project(p.sys, Clustering::from_labels(label), p.classes);
        const auto dec_r = decompose((-red.Lhat).eval());
        const double scale = p.dec.J.norm();
        EXPECT_LE((p.dec.J - red.Pi * dec_r.J * red.PiDagger).norm(), 1e-8 * scale) << trial;
        EXPECT_LE((dec_r.J - red.PiDagger * p.dec.J * red.Pi).norm(), 1e-8 * dec_r.J.norm()) << trial;
        EXPECT_TRUE(boundedness_test(p.sys, red));
    }
}

TEST(Project, ReducedGraphOfWeaklyConnectedNetworkIsWeaklyConnected) {
    fixture::Rng rng(125);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = rng.integer(3, 14);
        const Prepared p(random_system(rng, n, rng.integer(1, std::min(3, n / 2))));
        ASSERT_TRUE(is_weakly_connected(p.sys.graph()));
        const int r = rng.integer(p.classes.count, n);
        const auto c = select_clustering(distance_graph(p.dissimilarity()).X, r);
        const auto red = project(p.sys, c, p.classes);
        EXPECT_TRUE(is_weakly_connected(DiGraph::from_laplacian(red.Lhat))) << trial;
    }
}

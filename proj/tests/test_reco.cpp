#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "nref/reco.hpp"
#include "nref/synth.hpp"
#include "support.hpp"

using namespace nref;

namespace {

EmbeddingTable table(std::size_t users, std::size_t items, DenseMatrix m) {
    EmbeddingTable e;
    e.num_users = users;
    e.num_items = items;
    e.values = std::move(m);
    return e;
}

// Exhaustive metric oracle: rank every candidate by sorting (score desc, id asc).
RankingReport brute_force(const ScoreFn& score, const BipartiteGraph& g, std::span<const Interaction> test,
                          std::size_t k) {
    std::map<NodeId, std::set<NodeId>> truth;
    for (const auto& t : test) truth[t.user].insert(t.item);
    RankingReport r;
    r.k = k;
    for (const auto& [u, items] : truth) {
        std::vector<std::pair<double, NodeId>> all;
        for (NodeId i = 0; i < g.num_items(); ++i) {
            if (!g.interacted(u, i)) all.emplace_back(-score(u, i), i);
        }
        std::sort(all.begin(), all.end());
        double hits = 0, dcg = 0, idcg = 0;
        for (std::size_t rank = 0; rank < std::min(k, all.size()); ++rank) {
            if (items.count(all[rank].second)) {
                hits += 1;
                dcg += 1.0 / std::log2(double(rank) + 2.0);
            }
        }
        for (std::size_t rank = 0; rank < std::min(k, items.size()); ++rank) idcg += 1.0 / std::log2(double(rank) + 2.0);
        r.precision_at_k += hits / double(k);
        r.recall_at_k += hits / double(items.size());
        r.ndcg_at_k += dcg / idcg;
        ++r.users_evaluated;
    }
    if (r.users_evaluated) {
        r.precision_at_k /= double(r.users_evaluated);
        r.recall_at_k /= double(r.users_evaluated);
        r.ndcg_at_k /= double(r.users_evaluated);
    }
    return r;
}

} // namespace

TEST_CASE("bipartite construction") {
    const std::vector<Interaction> xs{{0, 1, 2.0}, {0, 1, 1.0}, {1, 0, 1.0}, {2, 2, 4.0}};
    const auto g = build_bipartite(xs, 3, 3);
    CHECK(g.num_interactions() == 3);
    CHECK(g.interacted(0, 1));
    CHECK_FALSE(g.interacted(0, 0));
    const auto w = g.weights(0);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 3.0);
    // Transpose consistency.
    for (NodeId j = 0; j < g.num_nodes(); ++j) {
        const auto nb = g.neighbors(j);
        const auto wt = g.weights(j);
        for (std::size_t t = 0; t < nb.size(); ++t) {
            const auto back = g.neighbors(nb[t]);
            const auto it = std::lower_bound(back.begin(), back.end(), j);
            REQUIRE(it != back.end());
            CHECK(*it == j);
            CHECK(g.weights(nb[t])[std::size_t(it - back.begin())] == wt[t]);
        }
    }
    const std::vector<Interaction> bad{{0, 5, 1.0}};
    CHECK_THROWS_AS(build_bipartite(bad, 3, 3), DataError);
    const std::vector<Interaction> zero{{0, 1, 0.0}};
    CHECK_THROWS_AS(build_bipartite(zero, 3, 3), DataError);
}

TEST_CASE("mean embedding") {
    CHECK(mean_embedding(DenseMatrix(3, 2, 1.5)) == std::vector<double>{1.5, 1.5});
    CHECK(mean_embedding(DenseMatrix(2, 2, std::vector<double>{1, 0, 0, 1})) == std::vector<double>{0.5, 0.5});
    const auto m = test::random_matrix(10, 4, 3);
    const auto got = mean_embedding(m);
    for (std::size_t c = 0; c < 4; ++c) {
        double s = 0;
        for (std::size_t r = 0; r < 10; ++r) s += m(r, c);
        CHECK(got[c] == doctest::Approx(s / 10).epsilon(1e-14));
    }
}

TEST_CASE("neighbor information score") {
    const std::vector<double> z{0, 0};
    CHECK(neighbor_info_score(z, z, z) == doctest::Approx(-1.386294).epsilon(1e-6));
    const std::vector<double> big{800, 0}, one{1, 0};
    CHECK(neighbor_info_score(big, one, z) == doctest::Approx(-0.693147).epsilon(1e-6));
    const std::vector<double> a{1, 0}, b{2, 0}, xbar{0.5, 0};
    CHECK(neighbor_info_score(a, b, xbar) == doctest::Approx(-1.101005).epsilon(1e-6));
    // Finite for large dot products in both directions.
    const std::vector<double> huge{700, 0}, neg{-1, 0};
    CHECK(std::isfinite(neighbor_info_score(huge, neg, one)));
    CHECK(std::isfinite(neighbor_info_score(huge, one, neg)));
    const std::vector<double> wide{1, 2, 3};
    CHECK_THROWS_AS(neighbor_info_score(a, wide, xbar), DataError);

    // Increasing in the affinity, decreasing in the typicality.
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double s = rng.normal(0, 5), t = rng.normal(0, 5), d = 0.01 + rng.uniform();
        const std::vector<double> u{1, 0}, v1{s, 0}, v2{s + d, 0}, m1{0, 0};
        CHECK(neighbor_info_score(u, v2, m1) > neighbor_info_score(u, v1, m1));
        const std::vector<double> u2{1, 1}, v{s, 0}, mb1{0, t}, mb2{0, t + d};
        CHECK(neighbor_info_score(u2, v, mb2) < neighbor_info_score(u2, v, mb1));
    }
}

TEST_CASE("neighbor selection") {
    const std::vector<Interaction> xs{{0, 0, 3.0}, {0, 1, 2.0}, {0, 2, 1.0}, {1, 1, 1.0}};
    const auto g = build_bipartite(xs, 2, 3);
    const auto e = table(2, 3, test::random_matrix(5, 3, 1));

    const auto intuitive = select_neighbors(g, e, SamplingPolicy::Intuitive, 2, 0);
    CHECK(intuitive.selected[0] == std::vector<NodeId>{g.item_node(0), g.item_node(1)});
    for (auto policy : {SamplingPolicy::RandomWalk, SamplingPolicy::Intuitive, SamplingPolicy::Negcn}) {
        const auto sel = select_neighbors(g, e, policy, 2, 4);
        CHECK(sel.selected[1] == std::vector<NodeId>{g.item_node(1)});
        const auto all = select_neighbors(g, e, policy, 5, 4);
        for (NodeId j = 0; j < g.num_nodes(); ++j) {
            std::vector<NodeId> got = all.selected[j];
            std::sort(got.begin(), got.end());
            const auto nb = g.neighbors(j);
            CHECK(got == std::vector<NodeId>(nb.begin(), nb.end()));
        }
    }
    CHECK_THROWS_AS(select_neighbors(g, e, SamplingPolicy::Negcn, 0, 0), UsageError);
    CHECK(parse_policy("random-walk") == SamplingPolicy::RandomWalk);
    CHECK_THROWS_AS(parse_policy("bogus"), UsageError);
}

TEST_CASE("negcn selections track the planted groups better than random walks") {
    BipartiteSpec s;
    s.seed = 2;
    const auto d = generate_bipartite(s);
    auto in_group_share = [&](const NeighborSelection& sel) {
        double same = 0, total = 0;
        for (NodeId u = 0; u < s.num_users; ++u) {
            for (NodeId j : sel.selected[u]) {
                same += d.item_group[j - s.num_users] == d.user_group[u];
                total += 1;
            }
        }
        return same / total;
    };
    const double negcn = in_group_share(select_neighbors(d.train_graph, d.embeddings, SamplingPolicy::Negcn, 3, 1));
    const double walk = in_group_share(select_neighbors(d.train_graph, d.embeddings, SamplingPolicy::RandomWalk, 3, 1));
    CHECK(negcn > walk);
}

TEST_CASE("aggregation") {
    const auto e = table(2, 2, DenseMatrix(4, 2, std::vector<double>{1, 0, 0, 1, 2, 1, 1, 3}));
    NeighborSelection none;
    none.selected.resize(4);
    const auto raw = aggregate_and_score(e, none, 0.3);
    CHECK(raw(0, 0) == 2.0);
    CHECK(raw(1, 1) == 3.0);

    NeighborSelection sel;
    sel.selected = {{2}, {2, 3}, {0}, {}};
    const auto alpha_one = aggregate_and_score(e, sel, 1.0);
    CHECK(alpha_one(0, 1) == 1.0);

    // z0 = .5[1,0] + .5[2,1] = [1.5,.5]; z1 = .5[0,1] + .5[1.5,2] = [.75,1.5]
    // z2 (item 0) = .5[2,1] + .5[1,0] = [1.5,.5]; z3 (item 1) = [1,3]
    const auto half = aggregate_and_score(e, sel, 0.5);
    CHECK(half(0, 0) == doctest::Approx(2.5));
    CHECK(half(0, 1) == doctest::Approx(3.0));
    CHECK(half(1, 0) == doctest::Approx(1.875));
    CHECK(half(1, 1) == doctest::Approx(5.25));
    CHECK_THROWS_AS(aggregate_and_score(e, sel, 1.5), UsageError);
}

TEST_CASE("ranking metrics") {
    const std::vector<Interaction> train{{0, 0, 1}};
    const auto g = build_bipartite(train, 1, 30);
    const ScoreFn by_id = [](NodeId, NodeId i) { return -double(i); };

    const std::vector<Interaction> first{{0, 1, 1}};
    const auto r = rank_and_evaluate(by_id, g, first, 20);
    CHECK(r.ndcg_at_k == 1.0);
    CHECK(r.recall_at_k == 1.0);
    CHECK(r.precision_at_k == doctest::Approx(1.0 / 20));

    const std::vector<Interaction> last{{0, 29, 1}};
    const auto miss = rank_and_evaluate(by_id, g, last, 20);
    CHECK(miss.ndcg_at_k == 0.0);
    CHECK(miss.recall_at_k == 0.0);
    CHECK(miss.precision_at_k == 0.0);

    const std::vector<Interaction> leak{{0, 0, 1}};
    CHECK_THROWS_AS(rank_and_evaluate(by_id, g, leak, 20), DataError);
    CHECK_THROWS_AS(rank_and_evaluate(by_id, g, first, 0), UsageError);
}

TEST_CASE("ranking equals the exhaustive oracle and ignores monotone rescaling") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        const std::size_t users = 5, items = 30;
        std::vector<Interaction> train, test;
        for (NodeId u = 0; u < users; ++u) {
            for (NodeId i = 0; i < items; ++i) {
                const double x = rng.uniform();
                if (x < 0.2) train.push_back({u, i, 1.0});
                else if (x < 0.3) test.push_back({u, i, 1.0});
            }
        }
        const auto g = build_bipartite(train, users, items);
        const auto scores = test::random_matrix(users, items, seed + 7);
        // Quantized scores force ties.
        const ScoreFn f = [&](NodeId u, NodeId i) { return std::round(scores(u, i) * 2.0); };
        const ScoreFn g2 = [&](NodeId u, NodeId i) { return std::exp(std::round(scores(u, i) * 2.0)); };
        const std::size_t k = 1 + rng.below(12);
        const auto got = rank_and_evaluate(f, g, test, k);
        const auto want = brute_force(f, g, test, k);
        CHECK(got.users_evaluated == want.users_evaluated);
        CHECK(std::abs(got.ndcg_at_k - want.ndcg_at_k) <= 1e-12);
        CHECK(std::abs(got.recall_at_k - want.recall_at_k) <= 1e-12);
        CHECK(std::abs(got.precision_at_k - want.precision_at_k) <= 1e-12);
        const auto mono = rank_and_evaluate(g2, g, test, k);
        CHECK(mono.ndcg_at_k == got.ndcg_at_k);
        CHECK(mono.recall_at_k == got.recall_at_k);
    }
}

TEST_CASE("alpha tuning picks the best grid value") {
    BipartiteSpec s;
    s.num_users = 100;
    s.num_items = 80;
    s.seed = 5;
    const auto d = generate_bipartite(s);
    const auto sel = select_neighbors(d.train_graph, d.embeddings, SamplingPolicy::Negcn, 3, 0);
    const std::vector<double> grid{0.0, 0.5, 1.0};
    const double a = tune_alpha(d.embeddings, sel, d.train_graph, d.test, grid, 10);
    double best = -1;
    for (double x : grid) {
        best = std::max(best, rank_and_evaluate(aggregate_and_score(d.embeddings, sel, x), d.train_graph, d.test, 10).ndcg_at_k);
    }
    CHECK(rank_and_evaluate(aggregate_and_score(d.embeddings, sel, a), d.train_graph, d.test, 10).ndcg_at_k == best);
}

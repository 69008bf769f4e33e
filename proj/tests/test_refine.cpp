#include <cmath>

#include "doctest.h"
#include "nref/refine.hpp"
#include "nref/synth.hpp"
#include "support.hpp"

using namespace nref;

namespace {

PairScorer constant(double s) {
    return [s](NodeId, NodeId) { return s; };
}

struct Fixture {
    Graph g;
    LabelVector y;
};

Fixture mixed_graph(std::uint64_t seed, std::size_t n = 60, double p = 0.1, int classes = 3) {
    return {test::random_graph(n, p, seed),
            LabelVector::fully_known(test::random_labels(n, classes, seed + 1), classes)};
}

} // namespace

TEST_CASE("filter_graph examples") {
    const auto f = mixed_graph(1);
    RefineConfig cfg;
    const auto perfect = make_noisy_oracle(f.y, 1.0, 0.0, 0);
    CHECK(ratio_stats(filter_graph(f.g, perfect, cfg), f.y).global_ratio == 1.0);
    CHECK(filter_graph(f.g, constant(1.0), cfg) == f.g);

    RefineTrace trace;
    const auto looped = with_self_loops(f.g);
    const auto emptied = filter_graph(looped, constant(0.0), cfg, &trace);
    CHECK(emptied.num_arcs() == f.g.num_nodes());
    CHECK(emptied.has_self_loops());
    CHECK(trace.filter_scored == f.g.undirected_edges().size());
    CHECK(trace.filter_removed == trace.filter_scored);
}

TEST_CASE("noisy filtering keeps the expected positive share") {
    SynthSpec s;
    s.num_nodes = 3000;
    s.mean_degree = 8;
    s.target_ratio = 0.6;
    s.seed = 4;
    const auto data = generate_labeled_graph(s);
    const auto y = LabelVector::fully_known(data.labels.labels, 2);
    const auto before = ratio_stats(data.graph, y);
    const double p = 0.8, q = 0.2;
    const auto after = ratio_stats(filter_graph(data.graph, make_noisy_oracle(y, p, q, 17), {}), y);
    // Undirected edges are the independent trials.
    const double npos = double(before.global_positive) / 2, nneg = double(before.global_negative) / 2;
    const double kept_pos = double(after.global_positive) / 2, kept_neg = double(after.global_negative) / 2;
    CHECK(std::abs(kept_pos - p * npos) <= 3 * std::sqrt(npos * p * (1 - p)));
    CHECK(std::abs(kept_neg - q * nneg) <= 3 * std::sqrt(nneg * q * (1 - q)));
    const double expect = p * npos / (p * npos + q * nneg);
    // Delta-method sigma of the ratio.
    const double total = p * npos + q * nneg;
    const double var = (std::pow(q * nneg, 2) * npos * p * (1 - p) + std::pow(p * npos, 2) * nneg * q * (1 - q)) /
                       std::pow(total, 4);
    CHECK(std::abs(after.global_ratio - expect) <= 3 * std::sqrt(var));
}

TEST_CASE("add_neighbors examples") {
    RefineConfig cfg;
    cfg.do_filter = false;
    SUBCASE("path with matching ends") {
        const std::vector<Edge> e{{0, 1}, {1, 2}};
        const auto g = build_graph(e, 3, true, false);
        const auto y = LabelVector::fully_known({0, 1, 0}, 2);
        cfg.n_max = 2;
        const auto out = add_neighbors(g, make_noisy_oracle(y, 1, 0, 0), cfg);
        CHECK(out.has_edge(0, 2));
        CHECK(out.has_edge(2, 0));
        CHECK(out.undirected_edges().size() == 3);
    }
    SUBCASE("node at n_max is untouched") {
        const std::vector<Edge> e{{0, 1}, {0, 2}, {1, 3}, {2, 4}};
        const auto g = build_graph(e, 5, true, false);
        cfg.n_max = 2;
        const auto out = add_neighbors(g, constant(1.0), cfg);
        // Nodes 0, 1, 2 are full; 3 and 4 only reach node 0.
        CHECK(out == g);
        cfg.n_max = 3;
        const auto wider = add_neighbors(g, constant(1.0), cfg);
        CHECK(wider.has_edge(1, 2));
        CHECK(wider.has_edge(0, 3));
        CHECK(wider.neighbors(0).size() == 3);
    }
    SUBCASE("star with mixed leaves connects only same-label leaves") {
        const std::vector<Edge> e{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}};
        const auto g = build_graph(e, 6, true, false);
        const auto y = LabelVector::fully_known({2, 0, 1, 0, 1, 0}, 3);
        cfg.n_max = 10;
        const auto out = add_neighbors(g, make_noisy_oracle(y, 1, 0, 0), cfg);
        std::vector<Edge> added;
        for (const auto& edge : out.undirected_edges()) {
            if (!g.has_edge(edge.first, edge.second)) added.push_back(edge);
        }
        CHECK(added == std::vector<Edge>{{1, 3}, {1, 5}, {2, 4}, {3, 5}});
    }
}

TEST_CASE("enhance") {
    const auto f = mixed_graph(6);
    RefineConfig off;
    off.do_filter = off.do_add = false;
    CHECK(enhance(f.g, constant(0.0), off) == f.g);

    RefineConfig cfg;
    cfg.n_max = 50;
    const double r0 = ratio_stats(f.g, f.y).global_ratio;
    REQUIRE(r0 < 1.0);
    CHECK(ratio_stats(enhance(f.g, make_noisy_oracle(f.y, 1, 0, 3), cfg), f.y).global_ratio > r0);

    RefineConfig bad;
    bad.threshold = 1.0;
    CHECK_THROWS_AS(enhance(f.g, constant(1), bad), UsageError);
    bad.threshold = 0.5;
    bad.n_max = 0;
    CHECK_THROWS_AS(enhance(f.g, constant(1), bad), UsageError);
}

TEST_CASE("rewiring invariants over random graphs and oracles") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        auto f = mixed_graph(seed, 20 + rng.below(40), 0.05 + 0.2 * rng.uniform(), 2 + int(rng.below(3)));
        if (rng.bernoulli(0.5)) f.g = with_self_loops(f.g);
        const double p = rng.uniform(), q = rng.uniform();
        const auto oracle = make_noisy_oracle(f.y, p, q, seed);
        RefineConfig cfg;
        cfg.n_max = 1 + rng.below(8);
        const auto before = ratio_stats(f.g, f.y);

        const auto filtered = filter_graph(f.g, oracle, cfg);
        const auto fs = ratio_stats(filtered, f.y);
        const auto perfect = ratio_stats(filter_graph(f.g, make_noisy_oracle(f.y, 1, 0, seed), cfg), f.y);
        const auto added = add_neighbors(f.g, oracle, cfg);
        const auto as = ratio_stats(added, f.y);
        for (NodeId v = 0; v < f.g.num_nodes(); ++v) {
            CHECK(fs.per_node_negative[v] <= before.per_node_negative[v]);
            CHECK(perfect.per_node_negative[v] == 0);
            CHECK(as.per_node_positive[v] >= before.per_node_positive[v]);
            CHECK(added.non_self_degree(v) <= std::max(f.g.non_self_degree(v), cfg.n_max));
        }
        for (const auto* g : {&filtered, &added}) {
            CHECK(g->symmetric());
            CHECK(g->has_self_loops() == f.g.has_self_loops());
            CHECK(build_graph(g->arcs(), g->num_nodes(), false, false) == *g);
        }
    }
}

TEST_CASE("noisy oracle") {
    const auto y = LabelVector::fully_known(test::random_labels(300, 2, 1), 2);
    const auto perfect = make_noisy_oracle(y, 1, 0, 5);
    const auto always = make_noisy_oracle(y, 1, 1, 5);
    for (NodeId u = 0; u < 30; ++u) {
        for (NodeId v = 0; v < 30; ++v) {
            CHECK(perfect(u, v) == double(y.labels[u] == y.labels[v]));
            CHECK(always(u, v) == 1.0);
        }
    }

    const double p = 0.7, q = 0.25;
    const auto noisy = make_noisy_oracle(y, p, q, 9);
    std::size_t same = 0, same_yes = 0, diff = 0, diff_yes = 0;
    for (NodeId u = 0; u < 300 && same < 10000; ++u) {
        for (NodeId v = u + 1; v < 300; ++v) {
            const double s = noisy(u, v);
            CHECK(s == noisy(v, u));
            if (y.labels[u] == y.labels[v]) {
                if (same < 10000) {
                    ++same;
                    same_yes += s == 1.0;
                }
            } else if (diff < 10000) {
                ++diff;
                diff_yes += s == 1.0;
            }
        }
    }
    REQUIRE(same == 10000);
    REQUIRE(diff == 10000);
    CHECK(std::abs(double(same_yes) / 1e4 - p) <= 3 * std::sqrt(p * (1 - p) / 1e4));
    CHECK(std::abs(double(diff_yes) / 1e4 - q) <= 3 * std::sqrt(q * (1 - q) / 1e4));

    CHECK_THROWS_AS(make_noisy_oracle(y, 1.5, 0, 0), UsageError);
    auto partial = y;
    partial.labels[3] = kUnlabeled;
    CHECK_THROWS_AS(make_noisy_oracle(partial, 1, 0, 0), DataError);
}

TEST_CASE("closed-form expectations") {
    const MixtureModel m{1.0, -1.0, 1.0, 0.0};
    CHECK(expected_origin(1.0, m) == 1.0);
    CHECK(expected_origin(0.0, m) == -1.0);
    CHECK(expected_origin(0.5, m) == 0.0);

    const MixtureModel m01{1.0, 0.0, 1.0, 0.5};
    CHECK(*expected_filter(3, 1, 0.9, 0.3, m01) == doctest::Approx(0.9));
    CHECK(*expected_filter(3, 5, 0.4, 0.4, m) == doctest::Approx(expected_origin(3.0 / 8.0, m)));
    CHECK(*expected_filter(3, 5, 0.4, 0.0, m) == doctest::Approx(1.0));
    CHECK_FALSE(expected_filter(3, 5, 0.0, 0.0, m).has_value());

    CHECK(expected_adder(1, 1, 2, 1.0, m01) == doctest::Approx(0.75));
    CHECK(expected_adder(3, 5, 0, 0.9, m) == doctest::Approx(expected_origin(3.0 / 8.0, m)));
    CHECK(expected_adder(3, 5, 4, 3.0 / 8.0, m) == doctest::Approx(expected_origin(3.0 / 8.0, m)));

    CHECK_THROWS_AS((MixtureModel{0.0, 1.0, 1.0, 0.5}.validate()), UsageError);
    CHECK_THROWS_AS((MixtureModel{1.0, 0.0, 0.0, 0.5}.validate()), UsageError);
}

TEST_CASE("filtering and adding raise the expected readout under their sufficient conditions") {
    Rng rng(77);
    for (int i = 0; i < 2000; ++i) {
        const double mu_minus = rng.normal();
        const double mu_plus = mu_minus + 0.01 + 3 * rng.uniform();
        const MixtureModel m{mu_plus, mu_minus, 0.1 + rng.uniform(), (mu_plus + mu_minus) / 2};
        m.validate();
        const double np = double(rng.below(20)), nn = double(1 + rng.below(20));
        const double r = np / (np + nn);
        const double q = rng.uniform();
        const double p = q + (1 - q) * (0.01 + 0.99 * rng.uniform());
        const auto ef = expected_filter(np, nn, p, q, m);
        if (np > 0) {
            REQUIRE(ef.has_value());
            CHECK(*ef > expected_origin(r, m));
        }
        const double n_add = double(1 + rng.below(10));
        const double p_pre = r + (1 - r) * (0.01 + 0.99 * rng.uniform());
        CHECK(expected_adder(np, nn, n_add, p_pre, m) > expected_origin(r, m));
    }
}

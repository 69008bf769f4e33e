#include <cmath>
#include <set>

#include "doctest.h"
#include "nref/node_clf.hpp"
#include "nref/synth.hpp"
#include "support.hpp"

using namespace nref;

namespace {

void check_graph_invariants(const Graph& g) {
    CHECK(g.symmetric());
    CHECK_FALSE(g.has_self_loops());
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        const auto nb = g.neighbors(v);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            CHECK(nb[i] != v);
            if (i) CHECK(nb[i - 1] < nb[i]);
            CHECK(g.has_edge(nb[i], v));
        }
    }
}

} // namespace

TEST_CASE("spec validation") {
    SynthSpec s;
    s.num_classes = 1;
    s.target_ratio = 0.9;
    CHECK_THROWS_AS(generate_labeled_graph(s), UsageError);
    s.target_ratio = 1.0;
    CHECK_NOTHROW(generate_labeled_graph(s));
    SynthSpec t;
    t.target_ratio = 0.0;
    CHECK_THROWS_AS(generate_labeled_graph(t), UsageError);
    t.target_ratio = 0.5;
    t.mean_degree = 0.5;
    CHECK_THROWS_AS(generate_labeled_graph(t), UsageError);
}

TEST_CASE("generated graphs") {
    SynthSpec s;
    s.num_nodes = 500;
    s.num_classes = 3;
    s.seed = 5;
    const auto d = generate_labeled_graph(s);
    check_graph_invariants(d.graph);
    CHECK(d.features.rows() == 500);
    CHECK(d.features.cols() == s.feature_dim);
    std::vector<std::size_t> counts(3, 0);
    for (auto l : d.labels.labels) ++counts[std::size_t(l)];
    for (auto c : counts) CHECK((c == 166 || c == 167));
    CHECK(d.split.train.size() == 300);
    CHECK(d.split.val.size() == 100);
    CHECK(d.split.test.size() == 100);
    CHECK_NOTHROW(d.split.validate(500));
    for (NodeId v = 0; v < 500; ++v) {
        CHECK(d.labels.known_mask[v] == std::binary_search(d.split.train.begin(), d.split.train.end(), v));
    }

    const auto again = generate_labeled_graph(s);
    CHECK(again.graph == d.graph);
    CHECK(again.features == d.features);
    CHECK(again.labels.labels == d.labels.labels);

    SynthSpec pure = s;
    pure.target_ratio = 1.0;
    const auto p = generate_labeled_graph(pure);
    CHECK(ratio_stats(p.graph, LabelVector::fully_known(p.labels.labels, 3)).global_ratio == 1.0);
}

TEST_CASE("measured ratio concentrates around the target") {
    SynthSpec s;
    s.num_nodes = 10000;
    s.target_ratio = 0.8;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        s.seed = seed;
        const auto d = generate_labeled_graph(s);
        const auto st = ratio_stats(d.graph, LabelVector::fully_known(d.labels.labels, 2));
        const double edges = double(st.global_positive + st.global_negative) / 2;
        CHECK(std::abs(st.global_ratio - 0.8) <= 0.01);
        CHECK(std::abs(st.global_ratio - 0.8) <= 3 * std::sqrt(0.8 * 0.2 / edges));
    }
}

TEST_CASE("class means carry the separation") {
    SynthSpec s;
    s.num_nodes = 20000;
    s.num_classes = 3;
    s.class_separation = 2.0;
    s.feature_dim = 5;
    const auto d = generate_labeled_graph(s);
    std::vector<std::vector<double>> mean(3, std::vector<double>(5, 0.0));
    std::vector<double> count(3, 0.0);
    for (NodeId v = 0; v < s.num_nodes; ++v) {
        const auto l = std::size_t(d.labels.labels[v]);
        count[l] += 1;
        for (std::size_t f = 0; f < 5; ++f) mean[l][f] += d.features(v, f);
    }
    for (std::size_t a = 0; a < 3; ++a) {
        for (auto& m : mean[a]) m /= count[a];
    }
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = a + 1; b < 3; ++b) {
            double sq = 0;
            for (std::size_t f = 0; f < 5; ++f) sq += std::pow(mean[a][f] - mean[b][f], 2);
            CHECK(std::sqrt(sq) == doctest::Approx(2.0).epsilon(0.05));
        }
    }
}

TEST_CASE("uninformative features give chance accuracy") {
    SynthSpec s;
    s.num_nodes = 2000;
    s.class_separation = 0.0;
    s.seed = 9;
    const auto d = generate_labeled_graph(s);
    SgcConfig cfg;
    cfg.seed = 1;
    const auto m = train_sgc(d.graph, d.features, d.labels, d.split, cfg);
    CHECK(std::abs(evaluate(m, d.graph, d.features, d.labels, d.split.test).accuracy - 0.5) < 0.08);
}

TEST_CASE("degrade_graph") {
    SynthSpec s;
    s.num_nodes = 400;
    s.num_classes = 4;
    s.target_ratio = 0.85;
    s.mean_degree = 3;
    s.seed = 2;
    const auto d = generate_labeled_graph(s);
    const auto y = LabelVector::fully_known(d.labels.labels, 4);
    CHECK(degrade_graph(d.graph, y, 0, 1) == d.graph);

    for (std::size_t per_node : {1u, 3u, 5u}) {
        const auto g = degrade_graph(d.graph, y, per_node, 7);
        check_graph_invariants(g);
        const auto before = ratio_stats(d.graph, y), after = ratio_stats(g, y);
        for (NodeId v = 0; v < s.num_nodes; ++v) {
            CHECK(after.per_node_negative[v] == before.per_node_negative[v] + per_node);
            CHECK(after.per_node_positive[v] == before.per_node_positive[v]);
            for (NodeId w : d.graph.neighbors(v)) CHECK(g.has_edge(v, w));
        }
        // Recount oracle for the global ratio.
        const double npos = double(before.global_positive), nneg = double(before.global_negative);
        CHECK(after.global_ratio == doctest::Approx(npos / (npos + nneg + double(per_node * s.num_nodes))));
        CHECK(degrade_graph(d.graph, y, per_node, 7) == g);
    }

    CHECK_THROWS_AS(degrade_graph(d.graph, LabelVector::fully_known(std::vector<std::int32_t>(400, 0), 4), 1, 0),
                    DataError);
    const auto odd = generate_labeled_graph([&] {
        auto t = s;
        t.num_nodes = 401;
        return t;
    }());
    CHECK_THROWS_AS(degrade_graph(odd.graph, LabelVector::fully_known(odd.labels.labels, 4), 1, 0), DataError);
}

TEST_CASE("bipartite generator") {
    BipartiteSpec s;
    s.num_users = 120;
    s.num_items = 90;
    s.seed = 3;
    const auto d = generate_bipartite(s);
    CHECK(d.embeddings.num_users == 120);
    CHECK(d.embeddings.values.rows() == 210);
    CHECK(d.embeddings.values.cols() == s.dim);
    std::set<std::pair<NodeId, NodeId>> seen;
    std::vector<std::size_t> train_count(120, 0), test_count(120, 0);
    for (const auto& t : d.train) {
        CHECK(seen.insert({t.user, t.item}).second);
        ++train_count[t.user];
    }
    for (const auto& t : d.test) {
        CHECK(seen.insert({t.user, t.item}).second);
        CHECK_FALSE(d.train_graph.interacted(t.user, t.item));
        ++test_count[t.user];
    }
    for (std::size_t u = 0; u < 120; ++u) {
        CHECK(train_count[u] > 0);
        CHECK(test_count[u] >= 1);
        CHECK(test_count[u] == std::max<std::size_t>(1, (train_count[u] + test_count[u]) / 5));
    }

    // Noise-free structure: negcn picks only in-group neighbors.
    BipartiteSpec clean = s;
    clean.noise = 0.0;
    clean.embedding_noise = 0.0;
    const auto c = generate_bipartite(clean);
    const auto sel = select_neighbors(c.train_graph, c.embeddings, SamplingPolicy::Negcn, 3, 0);
    for (NodeId u = 0; u < clean.num_users; ++u) {
        for (NodeId j : sel.selected[u]) CHECK(c.item_group[j - clean.num_users] == c.user_group[u]);
    }
}

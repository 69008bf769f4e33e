#include "nref/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "nref/rng.hpp"

namespace nref {

namespace {

// Shuffled round-robin: class sizes differ by at most one.
std::vector<std::uint32_t> balanced_assignment(std::size_t n, std::size_t groups, Rng& rng) {
    std::vector<std::uint32_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::uint32_t(i % groups);
    rng.shuffle(out.begin(), out.end());
    return out;
}

} // namespace

void SynthSpec::validate() const {
    if (num_nodes < 2) throw UsageError("synth: need at least two nodes");
    if (num_classes < 1) throw UsageError("synth: need at least one class");
    if (!(target_ratio > 0.0 && target_ratio <= 1.0)) throw UsageError("synth: target_ratio must lie in (0, 1]");
    if (num_classes == 1 && target_ratio < 1.0) {
        throw UsageError("synth: a single class cannot produce different-label edges");
    }
    if (!(mean_degree >= 1.0)) throw UsageError("synth: mean_degree must be at least 1");
    if (feature_dim < std::size_t(num_classes)) {
        throw UsageError("synth: feature_dim must be at least num_classes");
    }
    if (class_separation < 0.0) throw UsageError("synth: class_separation must be non-negative");
}

LabeledGraph generate_labeled_graph(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t n = spec.num_nodes;
    const auto c = std::size_t(spec.num_classes);

    const auto assign = balanced_assignment(n, c, rng);
    std::vector<std::int32_t> labels(assign.begin(), assign.end());
    std::vector<std::vector<NodeId>> members(c);
    for (NodeId v = 0; v < n; ++v) members[std::size_t(labels[v])].push_back(v);
    for (std::size_t k = 0; k < c; ++k) {
        if (members[k].size() < 2 && spec.target_ratio > 0.0) {
            throw UsageError("synth: too few nodes per class");
        }
    }

    std::set<Edge> edges;
    const double draws_mean = spec.mean_degree / 2.0;
    for (NodeId v = 0; v < n; ++v) {
        const auto draws = rng.poisson(draws_mean);
        const auto own = std::size_t(labels[v]);
        for (std::uint64_t t = 0; t < draws; ++t) {
            const bool same = c == 1 || rng.bernoulli(spec.target_ratio);
            bool placed = false;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                NodeId w;
                if (same) {
                    w = members[own][rng.below(members[own].size())];
                } else {
                    w = NodeId(rng.below(n));
                    if (std::size_t(labels[w]) == own) continue;
                }
                if (w == v) continue;
                placed = edges.emplace(std::min(v, w), std::max(v, w)).second;
            }
            if (!placed) throw DataError("synth: could not place an edge after 100 attempts");
        }
    }

    LabeledGraph out;
    const std::vector<Edge> edge_list(edges.begin(), edges.end());
    out.graph = build_graph(edge_list, n, true, false);

    out.features = FeatureMatrix(n, spec.feature_dim);
    const double offset = spec.class_separation / std::sqrt(2.0);
    for (NodeId v = 0; v < n; ++v) {
        auto row = out.features.row(v);
        for (double& x : row) x = rng.normal();
        row[std::size_t(labels[v])] += offset;
    }

    std::vector<NodeId> order(n);
    for (NodeId v = 0; v < n; ++v) order[v] = v;
    rng.shuffle(order.begin(), order.end());
    const std::size_t n_train = n * 6 / 10;
    const std::size_t n_val = n * 2 / 10;
    out.split.train.assign(order.begin(), order.begin() + std::ptrdiff_t(n_train));
    out.split.val.assign(order.begin() + std::ptrdiff_t(n_train), order.begin() + std::ptrdiff_t(n_train + n_val));
    out.split.test.assign(order.begin() + std::ptrdiff_t(n_train + n_val), order.end());
    std::sort(out.split.train.begin(), out.split.train.end());
    std::sort(out.split.val.begin(), out.split.val.end());
    std::sort(out.split.test.begin(), out.split.test.end());

    out.labels = LabelVector::fully_known(std::move(labels), spec.num_classes);
    out.labels.known_mask.assign(n, false);
    for (NodeId v : out.split.train) out.labels.known_mask[v] = true;
    return out;
}

Graph degrade_graph(const Graph& g, const LabelVector& y, std::size_t per_node, std::uint64_t seed) {
    if (per_node == 0) return g;
    if (!g.symmetric()) throw DataError("degrade_graph: graph must be symmetric");
    const std::size_t n = g.num_nodes();
    if (y.size() != n) throw DataError("degrade_graph: label count differs from graph");
    for (NodeId v = 0; v < n; ++v) {
        if (!y.labeled(v)) throw DataError("degrade_graph: node " + std::to_string(v) + " unlabeled");
    }
    {
        std::set<std::int32_t> classes(y.labels.begin(), y.labels.end());
        if (classes.size() < 2) throw DataError("degrade_graph: needs at least two classes");
    }
    if ((n * per_node) % 2 != 0) {
        throw DataError("degrade_graph: num_nodes * per_node must be even");
    }

    constexpr int kRestarts = 50;
    for (int restart = 0; restart < kRestarts; ++restart) {
        Rng rng(mix64(seed) + std::uint64_t(restart));
        std::vector<std::size_t> remaining(n, per_node);
        std::vector<NodeId> active(n);
        std::vector<std::size_t> slot(n);
        for (NodeId v = 0; v < n; ++v) active[v] = slot[v] = v;
        auto deactivate = [&](NodeId v) {
            const auto s = slot[v];
            const NodeId last = active.back();
            active[s] = last;
            slot[last] = s;
            active.pop_back();
        };
        std::set<Edge> added;
        auto eligible = [&](NodeId u, NodeId w) {
            return w != u && y.labels[u] != y.labels[w] && !g.has_edge(u, w) &&
                   !added.contains({std::min(u, w), std::max(u, w)});
        };

        // Most-constrained first: always extend a node with the most stubs left.
        std::vector<NodeId> order(n);
        for (NodeId v = 0; v < n; ++v) order[v] = v;
        rng.shuffle(order.begin(), order.end());
        bool stuck = false;
        for (std::size_t round = per_node; round > 0 && !stuck; --round) {
            for (NodeId u : order) {
                while (remaining[u] >= round && !stuck) {
                    NodeId pick = 0;
                    bool found = false;
                    for (int attempt = 0; attempt < 100 && !found; ++attempt) {
                        const NodeId w = active[rng.below(active.size())];
                        if (eligible(u, w)) {
                            pick = w;
                            found = true;
                        }
                    }
                    if (!found) {
                        std::vector<NodeId> pool;
                        for (NodeId w : active) {
                            if (eligible(u, w)) pool.push_back(w);
                        }
                        if (pool.empty()) {
                            stuck = true;
                            break;
                        }
                        std::sort(pool.begin(), pool.end());
                        pick = pool[rng.below(pool.size())];
                    }
                    added.emplace(std::min(u, pick), std::max(u, pick));
                    if (--remaining[u] == 0) deactivate(u);
                    if (--remaining[pick] == 0) deactivate(pick);
                }
            }
        }
        if (stuck) continue;

        std::vector<Edge> edges = g.arcs();
        edges.insert(edges.end(), added.begin(), added.end());
        return build_graph(edges, n, true, g.has_self_loops());
    }
    throw DataError("degrade_graph: could not place every edge; too few eligible partners");
}

BipartiteData generate_bipartite(const BipartiteSpec& spec) {
    if (spec.groups == 0 || spec.num_users == 0 || spec.num_items < spec.groups) {
        throw UsageError("generate_bipartite: invalid sizes");
    }
    if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw UsageError("generate_bipartite: noise must lie in [0, 1]");
    if (spec.dim < spec.groups) throw UsageError("generate_bipartite: dim must be at least groups");
    Rng rng(spec.seed);

    BipartiteData out;
    out.user_group = balanced_assignment(spec.num_users, spec.groups, rng);
    out.item_group = balanced_assignment(spec.num_items, spec.groups, rng);
    std::vector<std::vector<NodeId>> group_items(spec.groups);
    for (NodeId i = 0; i < spec.num_items; ++i) group_items[out.item_group[i]].push_back(i);

    for (NodeId u = 0; u < spec.num_users; ++u) {
        const auto g = out.user_group[u];
        const auto count = std::max<std::uint64_t>(5, rng.poisson(spec.interactions_per_user));
        std::vector<Interaction> mine;
        std::set<NodeId> seen;
        for (std::uint64_t t = 0; t < count; ++t) {
            for (int attempt = 0; attempt < 100; ++attempt) {
                std::uint32_t target = g;
                if (spec.groups > 1 && rng.bernoulli(spec.noise)) {
                    target = std::uint32_t(rng.below(spec.groups - 1));
                    if (target >= g) ++target;
                }
                const auto& pool = group_items[target];
                const NodeId item = pool[rng.below(pool.size())];
                if (!seen.insert(item).second) continue;
                const double extra = target == g ? spec.in_group_weight : spec.cross_group_weight;
                mine.push_back({u, item, 1.0 + double(rng.poisson(extra))});
                break;
            }
        }
        if (mine.size() < 2) throw DataError("generate_bipartite: user with too few interactions");
        rng.shuffle(mine.begin(), mine.end());
        const std::size_t n_test = std::max<std::size_t>(1, mine.size() / 5);
        out.test.insert(out.test.end(), mine.begin(), mine.begin() + std::ptrdiff_t(n_test));
        out.train.insert(out.train.end(), mine.begin() + std::ptrdiff_t(n_test), mine.end());
    }
    auto by_pair = [](const Interaction& a, const Interaction& b) {
        return std::tie(a.user, a.item) < std::tie(b.user, b.item);
    };
    std::sort(out.train.begin(), out.train.end(), by_pair);
    std::sort(out.test.begin(), out.test.end(), by_pair);
    out.train_graph = build_bipartite(out.train, spec.num_users, spec.num_items);

    out.embeddings.num_users = spec.num_users;
    out.embeddings.num_items = spec.num_items;
    out.embeddings.values = DenseMatrix(spec.num_users + spec.num_items, spec.dim);
    for (std::size_t r = 0; r < spec.num_users + spec.num_items; ++r) {
        auto row = out.embeddings.values.row(r);
        for (double& x : row) x = rng.normal(0.0, spec.embedding_noise);
        const auto g = r < spec.num_users ? out.user_group[r] : out.item_group[r - spec.num_users];
        row[g] += 1.0;
    }
    return out;
}

} // namespace nref

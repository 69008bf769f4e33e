#include "nref/refine.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "nref/rng.hpp"

namespace nref {

void RefineConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw UsageError("refine: threshold must lie in (0, 1)");
    }
    if (do_add && n_max < 1) throw UsageError("refine: n_max must be at least 1 when adding");
}

Graph filter_graph(const Graph& g, const PairScorer& scorer, const RefineConfig& cfg,
                   RefineTrace* trace) {
    cfg.validate();
    if (!g.symmetric()) throw DataError("filter_graph: graph must be symmetric");
    std::vector<Edge> kept;
    std::size_t scored = 0;
    std::size_t removed = 0;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
        for (NodeId v : g.neighbors(u)) {
            if (v < u) continue;
            if (v == u) {
                kept.emplace_back(u, u);
                continue;
            }
            ++scored;
            if (scorer(u, v) > cfg.threshold) {
                kept.emplace_back(u, v);
            } else {
                ++removed;
            }
        }
    }
    if (trace) {
        trace->filter_scored += scored;
        trace->filter_removed += removed;
    }
    return build_graph(kept, g.num_nodes(), true, false);
}

Graph add_neighbors(const Graph& g, const PairScorer& scorer, const RefineConfig& cfg,
                    RefineTrace* trace) {
    cfg.validate();
    if (!g.symmetric()) throw DataError("add_neighbors: graph must be symmetric");
    const std::size_t n = g.num_nodes();
    std::vector<std::size_t> degree(n);
    for (NodeId v = 0; v < n; ++v) degree[v] = g.non_self_degree(v);

    // Proposal phase: depends only on the input graph, one list per node.
    std::vector<std::vector<NodeId>> proposals(n);
    std::size_t scored = 0;
    for (NodeId v = 0; v < n; ++v) {
        if (degree[v] >= cfg.n_max) continue;
        std::vector<std::pair<double, NodeId>> ranked;
        for (NodeId w : two_hop_candidates(g, v)) {
            ++scored;
            const double s = scorer(v, w);
            if (s > cfg.threshold) ranked.emplace_back(s, w);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        proposals[v].reserve(ranked.size());
        for (const auto& [s, w] : ranked) proposals[v].push_back(w);
    }

    // Merge phase: deterministic, respects the degree budget on both ends.
    std::vector<Edge> edges = g.arcs();
    std::set<Edge> added;
    for (NodeId v = 0; v < n; ++v) {
        for (NodeId w : proposals[v]) {
            if (degree[v] >= cfg.n_max) break;
            if (degree[w] >= cfg.n_max) continue;
            const Edge e{std::min(v, w), std::max(v, w)};
            if (!added.insert(e).second) continue;
            ++degree[v];
            ++degree[w];
        }
    }
    if (trace) {
        trace->add_scored += scored;
        trace->add_added += added.size();
    }
    edges.insert(edges.end(), added.begin(), added.end());
    return build_graph(edges, n, true, g.has_self_loops());
}

Graph enhance(const Graph& g, const PairScorer& scorer, const RefineConfig& cfg,
              RefineTrace* trace) {
    cfg.validate();
    Graph out = cfg.do_filter ? filter_graph(g, scorer, cfg, trace) : g;
    if (cfg.do_add) out = add_neighbors(out, scorer, cfg, trace);
    return out;
}

NoisyOracle::NoisyOracle(LabelVector labels, double p, double q, std::uint64_t seed)
    : labels_(std::make_shared<const LabelVector>(std::move(labels))), p_(p), q_(q), seed_(seed) {
    if (!(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0)) {
        throw UsageError("noisy oracle: p and q must lie in [0, 1]");
    }
    for (std::size_t v = 0; v < labels_->size(); ++v) {
        if (!labels_->labeled(NodeId(v))) {
            throw DataError("noisy oracle: node " + std::to_string(v) + " unlabeled");
        }
    }
}

double NoisyOracle::operator()(NodeId u, NodeId v) const {
    const NodeId lo = std::min(u, v);
    const NodeId hi = std::max(u, v);
    const std::uint64_t key = (std::uint64_t{lo} << 32) | hi;
    const double draw = to_unit(mix64(key ^ mix64(seed_)));
    const bool same = labels_->labels[u] == labels_->labels[v];
    return draw < (same ? p_ : q_) ? 1.0 : 0.0;
}

PairScorer make_noisy_oracle(const LabelVector& labels, double p, double q, std::uint64_t seed) {
    return NoisyOracle(labels, p, q, seed);
}

void MixtureModel::validate() const {
    if (!(sigma > 0.0)) throw UsageError("mixture model: sigma must be positive");
    if (!(mu_minus < tau && tau < mu_plus)) {
        throw UsageError("mixture model: requires mu_minus < tau < mu_plus");
    }
}

double expected_origin(double r, const MixtureModel& m) {
    return r * m.mu_plus + (1.0 - r) * m.mu_minus;
}

std::optional<double> expected_filter(double n_pos, double n_neg, double p, double q,
                                      const MixtureModel& m) {
    const double kept_pos = p * n_pos;
    const double kept_neg = q * n_neg;
    const double denom = kept_pos + kept_neg;
    if (denom <= 0.0) return std::nullopt;
    return (kept_pos * m.mu_plus + kept_neg * m.mu_minus) / denom;
}

double expected_adder(double n_pos, double n_neg, double n_add, double p_pre,
                      const MixtureModel& m) {
    const double total = n_pos + n_neg + n_add;
    if (total <= 0.0) throw DataError("expected_adder: no neighbors");
    return ((n_pos + p_pre * n_add) * m.mu_plus + (n_neg + (1.0 - p_pre) * n_add) * m.mu_minus) /
           total;
}

} // namespace nref

#include "nref/graph.hpp"

#include <algorithm>
#include <string>

namespace nref {

std::size_t Graph::non_self_degree(NodeId v) const {
    return degree(v) - (has_edge(v, v) ? 1 : 0);
}

bool Graph::has_edge(NodeId u, NodeId v) const {
    const auto row = neighbors(u);
    return std::binary_search(row.begin(), row.end(), v);
}

std::vector<Edge> Graph::arcs() const {
    std::vector<Edge> out;
    out.reserve(num_arcs());
    for (NodeId u = 0; u < num_nodes_; ++u) {
        for (NodeId v : neighbors(u)) out.emplace_back(u, v);
    }
    return out;
}

std::vector<Edge> Graph::undirected_edges() const {
    std::vector<Edge> out;
    for (NodeId u = 0; u < num_nodes_; ++u) {
        for (NodeId v : neighbors(u)) {
            if (u < v) out.emplace_back(u, v);
        }
    }
    return out;
}

Graph build_graph(std::span<const Edge> edges, std::size_t num_nodes, bool symmetrize,
                  bool add_self_loops) {
    if (num_nodes == 0) throw DataError("build_graph: empty node set");

    std::vector<Edge> arcs;
    arcs.reserve(edges.size() * (symmetrize ? 2 : 1) + (add_self_loops ? num_nodes : 0));
    for (const auto& [u, v] : edges) {
        if (u >= num_nodes || v >= num_nodes) {
            throw DataError("build_graph: endpoint out of range (" + std::to_string(u) + ", " +
                            std::to_string(v) + ") with " + std::to_string(num_nodes) +
                            " nodes");
        }
        arcs.emplace_back(u, v);
        if (symmetrize && u != v) arcs.emplace_back(v, u);
    }
    if (add_self_loops) {
        for (NodeId v = 0; v < num_nodes; ++v) arcs.emplace_back(v, v);
    }
    std::sort(arcs.begin(), arcs.end());
    arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

    Graph g;
    g.num_nodes_ = num_nodes;
    g.row_offsets_.assign(num_nodes + 1, 0);
    g.col_indices_.reserve(arcs.size());
    for (const auto& [u, v] : arcs) {
        ++g.row_offsets_[u + 1];
        g.col_indices_.push_back(v);
    }
    for (std::size_t i = 0; i < num_nodes; ++i) g.row_offsets_[i + 1] += g.row_offsets_[i];

    g.symmetric_ = symmetrize || std::all_of(arcs.begin(), arcs.end(), [&](const Edge& e) {
                       return std::binary_search(arcs.begin(), arcs.end(),
                                                 Edge{e.second, e.first});
                   });
    g.has_self_loops_ = add_self_loops || [&] {
        for (NodeId v = 0; v < num_nodes; ++v) {
            if (!g.has_edge(v, v)) return false;
        }
        return true;
    }();
    return g;
}

Graph with_self_loops(const Graph& g) {
    const auto arcs = g.arcs();
    return build_graph(arcs, g.num_nodes(), false, true);
}

Graph without_self_loops(const Graph& g) {
    auto arcs = g.arcs();
    std::erase_if(arcs, [](const Edge& e) { return e.first == e.second; });
    return build_graph(arcs, g.num_nodes(), false, false);
}

std::vector<NodeId> two_hop_candidates(const Graph& g, NodeId v) {
    if (v >= g.num_nodes()) throw DataError("two_hop_candidates: node out of range");
    std::vector<NodeId> out;
    const auto direct = g.neighbors(v);
    for (NodeId u : direct) {
        if (u == v) continue;
        for (NodeId w : g.neighbors(u)) {
            if (w == v || w == u) continue;
            out.push_back(w);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    std::erase_if(out, [&](NodeId w) {
        return std::binary_search(direct.begin(), direct.end(), w);
    });
    return out;
}

LabelVector LabelVector::fully_known(std::vector<std::int32_t> labels, std::int32_t num_classes) {
    LabelVector y;
    y.known_mask.assign(labels.size(), true);
    y.labels = std::move(labels);
    y.num_classes = num_classes;
    return y;
}

void LabelVector::validate() const {
    if (known_mask.size() != labels.size()) {
        throw DataError("LabelVector: known_mask length differs from label count");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = labels[i];
        if (c == kUnlabeled) continue;
        if (c < 0 || c >= num_classes) {
            throw DataError("LabelVector: label " + std::to_string(c) + " of node " +
                            std::to_string(i) + " outside [0, " + std::to_string(num_classes) +
                            ")");
        }
    }
}

RatioStats ratio_stats(const Graph& g, const LabelVector& y) {
    if (y.size() != g.num_nodes()) throw DataError("ratio_stats: label count differs from graph");
    const std::size_t n = g.num_nodes();
    RatioStats s;
    s.per_node_positive.assign(n, 0);
    s.per_node_negative.assign(n, 0);
    s.per_node_ratio.assign(n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
        if (!y.labeled(v)) throw DataError("ratio_stats: node " + std::to_string(v) + " unlabeled");
        for (NodeId u : g.neighbors(v)) {
            if (u == v) continue;
            if (!y.labeled(u)) {
                throw DataError("ratio_stats: node " + std::to_string(u) + " unlabeled");
            }
            if (y.labels[u] == y.labels[v]) {
                ++s.per_node_positive[v];
            } else {
                ++s.per_node_negative[v];
            }
        }
        const auto total = s.per_node_positive[v] + s.per_node_negative[v];
        if (total > 0) s.per_node_ratio[v] = static_cast<double>(s.per_node_positive[v]) / total;
        s.global_positive += s.per_node_positive[v];
        s.global_negative += s.per_node_negative[v];
    }
    const auto total = s.global_positive + s.global_negative;
    s.global_ratio = total > 0 ? static_cast<double>(s.global_positive) / total : 1.0;
    return s;
}

} // namespace nref

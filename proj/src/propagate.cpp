#include "nref/propagate.hpp"

#include <algorithm>
#include <cmath>

namespace nref {

double NormalizedAdjacency::at(NodeId u, NodeId v) const {
    const auto row = structure.neighbors(u);
    const auto it = std::lower_bound(row.begin(), row.end(), v);
    if (it == row.end() || *it != v) return 0.0;
    return values[structure.row_offsets()[u] + static_cast<std::size_t>(it - row.begin())];
}

NormalizedAdjacency normalize_adjacency(const Graph& g) {
    NormalizedAdjacency adj;
    adj.structure = g.has_self_loops() ? g : with_self_loops(g);
    const auto& s = adj.structure;
    const std::size_t n = s.num_nodes();

    std::vector<double> inv_sqrt_deg(n);
    for (NodeId v = 0; v < n; ++v) {
        inv_sqrt_deg[v] = 1.0 / std::sqrt(static_cast<double>(s.degree(v)));
    }
    adj.values.resize(s.num_arcs());
    const auto offsets = s.row_offsets();
    const auto cols = s.col_indices();
    for (NodeId u = 0; u < n; ++u) {
        for (Index e = offsets[u]; e < offsets[u + 1]; ++e) {
            adj.values[e] = inv_sqrt_deg[u] * inv_sqrt_deg[cols[e]];
        }
    }
    return adj;
}

void spmm(const NormalizedAdjacency& adj, const DenseMatrix& x, DenseMatrix& y) {
    const std::size_t n = adj.num_nodes();
    const std::size_t f = x.cols();
    const auto offsets = adj.structure.row_offsets();
    const auto cols = adj.structure.col_indices();
    for (std::size_t u = 0; u < n; ++u) {
        auto out = y.row(u);
        std::fill(out.begin(), out.end(), 0.0);
        for (Index e = offsets[u]; e < offsets[u + 1]; ++e) {
            const double w = adj.values[e];
            const auto in = x.row(cols[e]);
            for (std::size_t c = 0; c < f; ++c) out[c] += w * in[c];
        }
    }
}

DenseMatrix propagate_k(const NormalizedAdjacency& adj, const DenseMatrix& x, unsigned k) {
    if (x.rows() != adj.num_nodes()) {
        throw DataError("propagate_k: feature rows (" + std::to_string(x.rows()) +
                        ") differ from node count (" + std::to_string(adj.num_nodes()) + ")");
    }
    DenseMatrix cur = x;
    DenseMatrix next(x.rows(), x.cols());
    for (unsigned step = 0; step < k; ++step) {
        spmm(adj, cur, next);
        std::swap(cur, next);
    }
    return cur;
}

DenseMatrix parameter_free_embedding(const Graph& g, const DenseMatrix& x) {
    return propagate_k(normalize_adjacency(g), x, 2);
}

} // namespace nref

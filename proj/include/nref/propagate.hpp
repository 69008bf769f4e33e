#pragma once

#include <span>
#include <vector>

#include "nref/dense.hpp"
#include "nref/graph.hpp"

namespace nref {

/// Symmetrically degree-normalized adjacency with self-loops,
/// D^{-1/2} (A + I) D^{-1/2}, sharing the CSR pattern of the looped graph.
struct NormalizedAdjacency {
    Graph structure;            // always has self-loops
    std::vector<double> values; // aligned with structure.col_indices()

    std::size_t num_nodes() const noexcept { return structure.num_nodes(); }
    /// Weight of (u, v), zero when absent.
    double at(NodeId u, NodeId v) const;
};

/// Self-loops are inserted if absent; degrees count the loop.
NormalizedAdjacency normalize_adjacency(const Graph& g);

/// y = adj * x, accumulating each row in ascending column order.
void spmm(const NormalizedAdjacency& adj, const DenseMatrix& x, DenseMatrix& y);

/// adj^K x by K successive sparse-dense products. Throws DataError on a row
/// count mismatch.
DenseMatrix propagate_k(const NormalizedAdjacency& adj, const DenseMatrix& x, unsigned k);

/// propagate_k(normalize_adjacency(g), x, 2).
DenseMatrix parameter_free_embedding(const Graph& g, const DenseMatrix& x);

} // namespace nref

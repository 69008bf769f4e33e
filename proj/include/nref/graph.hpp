#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "nref/common.hpp"

namespace nref {

using Edge = std::pair<NodeId, NodeId>;

/// Unweighted graph in canonical CSR form: column indices within a row are
/// strictly increasing, so there are no duplicate arcs.
///
/// Instances are immutable once built; every rewiring step produces a new
/// Graph through build_graph().
class Graph {
  public:
    Graph() = default;

    std::size_t num_nodes() const noexcept { return num_nodes_; }
    /// Number of stored arcs, self-loops included.
    std::size_t num_arcs() const noexcept { return col_indices_.size(); }
    bool symmetric() const noexcept { return symmetric_; }
    bool has_self_loops() const noexcept { return has_self_loops_; }

    std::span<const NodeId> neighbors(NodeId v) const {
        return {col_indices_.data() + row_offsets_[v], row_offsets_[v + 1] - row_offsets_[v]};
    }
    std::size_t degree(NodeId v) const { return row_offsets_[v + 1] - row_offsets_[v]; }
    /// Degree with the self-loop (if any) discounted.
    std::size_t non_self_degree(NodeId v) const;
    bool has_edge(NodeId u, NodeId v) const;

    std::span<const Index> row_offsets() const noexcept { return row_offsets_; }
    std::span<const NodeId> col_indices() const noexcept { return col_indices_; }

    /// Every stored arc (u, v) in row-major order.
    std::vector<Edge> arcs() const;
    /// Each undirected non-self edge once, as (u, v) with u < v. Requires a
    /// symmetric graph.
    std::vector<Edge> undirected_edges() const;

    friend bool operator==(const Graph&, const Graph&) = default;

  private:
    friend Graph build_graph(std::span<const Edge>, std::size_t, bool, bool);

    std::size_t num_nodes_ = 0;
    std::vector<Index> row_offsets_{0};
    std::vector<NodeId> col_indices_;
    bool symmetric_ = false;
    bool has_self_loops_ = false;
};

/// Builds a canonical CSR graph. Duplicates are merged. With `symmetrize`
/// every reverse arc is inserted; with `add_self_loops` the diagonal is
/// filled. Throws DataError for an empty node set or out-of-range endpoint.
Graph build_graph(std::span<const Edge> edges, std::size_t num_nodes, bool symmetrize,
                  bool add_self_loops);

/// Same graph with the flags toggled; reuses the existing arcs.
Graph with_self_loops(const Graph& g);
Graph without_self_loops(const Graph& g);

/// Nodes reachable by a path of length two from v that are neither v nor an
/// existing neighbor of v. Ascending order. g must be symmetric.
std::vector<NodeId> two_hop_candidates(const Graph& g, NodeId v);

inline constexpr std::int32_t kUnlabeled = -1;

struct LabelVector {
    std::vector<std::int32_t> labels;  // kUnlabeled where unknown
    std::int32_t num_classes = 0;
    std::vector<bool> known_mask;      // visibility to training

    std::size_t size() const noexcept { return labels.size(); }
    bool labeled(NodeId v) const { return labels[v] != kUnlabeled; }

    /// All labels visible; the usual state for statistics and oracles.
    static LabelVector fully_known(std::vector<std::int32_t> labels, std::int32_t num_classes);
    /// Throws DataError if any label is out of range or masks disagree in size.
    void validate() const;
};

/// Positive / negative neighbor counts. Self-loops are never counted.
struct RatioStats {
    std::vector<std::uint64_t> per_node_positive;
    std::vector<std::uint64_t> per_node_negative;
    std::vector<double> per_node_ratio;  // 0 for isolated nodes
    std::uint64_t global_positive = 0;
    std::uint64_t global_negative = 0;
    double global_ratio = 0.0;
};

/// Global ratio is sum(n+) / sum(n+ + n-), i.e. an arc-weighted aggregate.
/// Throws DataError if an endpoint is unlabeled.
RatioStats ratio_stats(const Graph& g, const LabelVector& y);

} // namespace nref

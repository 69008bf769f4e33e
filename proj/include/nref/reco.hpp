#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nref/dense.hpp"
#include "nref/graph.hpp"

namespace nref {

struct Interaction {
    NodeId user = 0;
    NodeId item = 0;
    double weight = 1.0;
};

/// User-item interaction graph realized as the block adjacency [0 R; R^T 0]
/// over N + M unified ids (users first, then items). Rows are canonical and
/// carry positive weights; item rows are the transpose of user rows.
class BipartiteGraph {
  public:
    std::size_t num_users() const noexcept { return num_users_; }
    std::size_t num_items() const noexcept { return num_items_; }
    std::size_t num_nodes() const noexcept { return num_users_ + num_items_; }
    std::size_t num_interactions() const noexcept { return cols_.size() / 2; }

    NodeId item_node(NodeId item) const noexcept { return NodeId(num_users_) + item; }

    /// Unified ids of the neighbors of unified node j, ascending.
    std::span<const NodeId> neighbors(NodeId j) const {
        return {cols_.data() + offsets_[j], offsets_[j + 1] - offsets_[j]};
    }
    std::span<const double> weights(NodeId j) const {
        return {weights_.data() + offsets_[j], offsets_[j + 1] - offsets_[j]};
    }
    bool interacted(NodeId user, NodeId item) const;

    friend BipartiteGraph build_bipartite(std::span<const Interaction>, std::size_t, std::size_t);

  private:
    std::size_t num_users_ = 0;
    std::size_t num_items_ = 0;
    std::vector<Index> offsets_{0};
    std::vector<NodeId> cols_;
    std::vector<double> weights_;
};

/// Repeated (user, item) pairs have their weights summed. Throws DataError on
/// out-of-range ids or non-positive weights.
BipartiteGraph build_bipartite(std::span<const Interaction> interactions, std::size_t num_users,
                               std::size_t num_items);

/// Rows are users then items.
struct EmbeddingTable {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    DenseMatrix values;

    std::size_t dim() const noexcept { return values.cols(); }
    /// Throws DataError if the row count is not N + M or a value is non-finite.
    void validate() const;
};

std::vector<double> mean_embedding(const DenseMatrix& e);

/// log sigma(xu . xv) + log(1 - sigma(xu . xbar)), evaluated through
/// softplus so neither term under- or overflows.
double neighbor_info_score(std::span<const double> xu, std::span<const double> xv,
                           std::span<const double> xbar);

enum class SamplingPolicy { RandomWalk, Intuitive, Negcn };

std::string to_string(SamplingPolicy p);
/// Accepts "random", "random-walk", "intuitive", "negcn".
SamplingPolicy parse_policy(const std::string& name);

struct RandomWalkConfig {
    std::size_t walks = 100;
    std::size_t length = 3;
};

struct NeighborSelection {
    SamplingPolicy policy = SamplingPolicy::Negcn;
    std::size_t k = 0;
    std::vector<std::vector<NodeId>> selected;  // per unified node, unified ids
};

/// Top-k existing neighbors of every node under the policy score:
///  - RandomWalk: visit frequency over `walks` walks of `length` steps;
///  - Intuitive: interaction weight;
///  - Negcn: neighbor_info_score(x_neighbor, x_node, mean embedding), which
///    rewards neighbors aligned with the node and penalizes neighbors close
///    to the population average.
/// Ties go to the lower id.
NeighborSelection select_neighbors(const BipartiteGraph& g, const EmbeddingTable& e,
                                   SamplingPolicy policy, std::size_t k, std::uint64_t seed,
                                   const RandomWalkConfig& rw = {});

using ScoreFn = std::function<double(NodeId user, NodeId item)>;

/// z_j = alpha x_j + (1 - alpha) mean(x over selected[j]); nodes without a
/// selection keep x_j. Returns score(u, i) = z_u . z_i.
ScoreFn aggregate_and_score(const EmbeddingTable& e, const NeighborSelection& sel, double alpha);

struct RankingReport {
    double precision_at_k = 0.0;
    double recall_at_k = 0.0;
    double ndcg_at_k = 0.0;
    std::size_t k = 0;
    std::size_t users_evaluated = 0;
};

/// All-ranking protocol: every item the user did not interact with in
/// g_train is a candidate; ties rank the lower item id first. NDCG uses
/// binary gains with a log2(rank + 1) discount. Users without test items are
/// skipped. Throws DataError if a test pair also appears in g_train.
RankingReport rank_and_evaluate(const ScoreFn& score, const BipartiteGraph& g_train,
                                std::span<const Interaction> test, std::size_t k);

/// Picks the alpha in `grid` with the highest NDCG@k on a tuning slice.
double tune_alpha(const EmbeddingTable& e, const NeighborSelection& sel,
                  const BipartiteGraph& g_train, std::span<const Interaction> tuning,
                  std::span<const double> grid, std::size_t k);

} // namespace nref

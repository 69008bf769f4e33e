#pragma once

#include <cstdint>
#include <vector>

#include "nref/dense.hpp"
#include "nref/graph.hpp"
#include "nref/node_clf.hpp"
#include "nref/reco.hpp"

namespace nref {

struct SynthSpec {
    std::size_t num_nodes = 2000;
    std::int32_t num_classes = 2;
    /// Probability that a drawn edge joins two nodes of the same class.
    double target_ratio = 0.7;
    /// Expected non-self degree.
    double mean_degree = 6.0;
    std::size_t feature_dim = 16;
    /// Distance between any two class means, in units of the feature sigma.
    double class_separation = 1.0;
    std::uint64_t seed = 0;

    /// Throws UsageError on an infeasible spec.
    void validate() const;
};

struct LabeledGraph {
    Graph graph;  // symmetric, no self-loops
    FeatureMatrix features;
    LabelVector labels;  // every node labeled, known_mask = train
    Split split;
};

/// Balanced labels; each node initiates Poisson(mean_degree / 2) edges, each
/// to its own class with probability target_ratio and to a uniformly chosen
/// node of another class otherwise. Features are unit-variance Gaussians
/// around class means placed on a scaled simplex. 60/20/20 split.
LabeledGraph generate_labeled_graph(const SynthSpec& spec);

/// Adds exactly `per_node` new edges at every node, each to a node of a
/// different label that is not already a neighbor. Total stub count
/// (num_nodes * per_node) must be even. Throws DataError when the
/// constraints cannot be met.
Graph degrade_graph(const Graph& g, const LabelVector& y, std::size_t per_node, std::uint64_t seed);

struct BipartiteSpec {
    std::size_t num_users = 600;
    std::size_t num_items = 400;
    std::size_t groups = 8;
    /// Probability that an interaction leaves the user's group.
    double noise = 0.3;
    double interactions_per_user = 20.0;
    std::size_t dim = 64;
    /// Gaussian perturbation added to the group indicator embeddings.
    double embedding_noise = 0.3;
    /// Mean extra weight (clicks) on in-group vs cross-group interactions.
    double in_group_weight = 1.35;
    double cross_group_weight = 1.0;
    std::uint64_t seed = 0;
};

struct BipartiteData {
    BipartiteGraph train_graph;
    std::vector<Interaction> train;
    std::vector<Interaction> test;
    EmbeddingTable embeddings;
    std::vector<std::uint32_t> user_group;
    std::vector<std::uint32_t> item_group;
};

/// Planted-group user-item data with an 80/20 per-user train/test split.
BipartiteData generate_bipartite(const BipartiteSpec& spec);

} // namespace nref

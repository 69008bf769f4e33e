#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "nref/graph.hpp"

namespace nref {

/// Symmetric score in [0, 1] for a node pair; > threshold means "same label".
/// Classifier-backed scorers carry their embeddings (see EdgeScorer).
using PairScorer = std::function<double(NodeId, NodeId)>;

struct RefineConfig {
    bool do_filter = true;
    bool do_add = true;
    /// Target non-self degree for the adding step (self-loop not counted).
    std::size_t n_max = 6;
    double threshold = 0.5;

    /// Throws UsageError when threshold is outside (0, 1) or n_max is 0 with do_add.
    void validate() const;
};

/// Counters filled in by the rewiring steps.
struct RefineTrace {
    std::size_t filter_scored = 0;
    std::size_t filter_removed = 0;
    std::size_t add_scored = 0;
    std::size_t add_added = 0;
};

/// Removes every non-self edge whose score is <= threshold (both arcs).
/// Each undirected edge is scored once. Self-loops are kept.
Graph filter_graph(const Graph& g, const PairScorer& scorer, const RefineConfig& cfg,
                   RefineTrace* trace = nullptr);

/// Connects nodes below n_max to 2-hop candidates scoring above threshold.
///
/// Candidates are scored against the input graph, independently per node, and
/// ranked by descending score (ascending id on ties). A merge pass in
/// ascending node order then accepts (v, w) only while both endpoints are
/// still below n_max, so no node ends above max(its input degree, n_max).
Graph add_neighbors(const Graph& g, const PairScorer& scorer, const RefineConfig& cfg,
                    RefineTrace* trace = nullptr);

/// filter_graph then add_neighbors; either may be switched off.
Graph enhance(const Graph& g, const PairScorer& scorer, const RefineConfig& cfg,
              RefineTrace* trace = nullptr);

/// Synthetic classifier with exact error rates: for a same-label pair it
/// answers 1 with probability p, for a different-label pair with probability
/// q, and 0 otherwise. Answers are a pure function of (unordered pair, seed).
class NoisyOracle {
  public:
    NoisyOracle(LabelVector labels, double p, double q, std::uint64_t seed);
    double operator()(NodeId u, NodeId v) const;

    double p() const noexcept { return p_; }
    double q() const noexcept { return q_; }

  private:
    std::shared_ptr<const LabelVector> labels_;
    double p_;
    double q_;
    std::uint64_t seed_;
};

/// Throws DataError if any label is unknown, UsageError for p or q outside [0, 1].
PairScorer make_noisy_oracle(const LabelVector& labels, double p, double q, std::uint64_t seed);

/// Gaussian mixture for the readout of neighbor embeddings: positive
/// neighbors ~ N(mu_plus, sigma^2), negative ~ N(mu_minus, sigma^2).
struct MixtureModel {
    double mu_plus = 1.0;
    double mu_minus = -1.0;
    double sigma = 1.0;
    double tau = 0.0;

    /// Requires mu_minus < tau < mu_plus and sigma > 0.
    void validate() const;
};

/// r mu+ + (1 - r) mu-.
double expected_origin(double r, const MixtureModel& m);

/// Mean readout after filtering with rates (p, q). Empty when every neighbor
/// is expected to be removed (p n+ + q n- == 0).
std::optional<double> expected_filter(double n_pos, double n_neg, double p, double q,
                                      const MixtureModel& m);

/// Mean readout after adding n_add neighbors of precision p_pre.
double expected_adder(double n_pos, double n_neg, double n_add, double p_pre,
                      const MixtureModel& m);

} // namespace nref

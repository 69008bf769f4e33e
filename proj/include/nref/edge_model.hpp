#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nref/dense.hpp"
#include "nref/graph.hpp"

namespace nref {

struct DenseLayer {
    DenseMatrix weight;        // in x out
    std::vector<double> bias;  // out
};

/// Symmetric pairwise classifier: inputs are projected (e W_e), combined as
/// |a - b| ++ (a + b) ++ (a * b) and fed through an MLP with ReLU hidden
/// layers and a sigmoid scalar output.
///
/// `input_shift` / `input_scale` standardize raw embedding columns before
/// projection. Empty vectors mean identity.
struct EdgeClassifierParams {
    DenseMatrix projection;
    std::vector<double> input_shift;
    std::vector<double> input_scale;
    std::vector<DenseLayer> layers;
    std::uint64_t seed = 0;
    /// Node embedding the classifier expects: "propagated" (A_hat^2 X) or "raw" (X).
    std::string embedding = "propagated";

    std::size_t input_dim() const noexcept { return projection.rows(); }
    std::size_t proj_dim() const noexcept { return projection.cols(); }
    /// Throws DataError on inconsistent shapes, NumericError on non-finite values.
    void validate() const;
};

struct EdgeModelShape {
    std::size_t proj_dim = 64;
    std::vector<std::size_t> hidden{64};
};

/// Glorot-uniform weights, zero biases.
EdgeClassifierParams init_edge_classifier(std::size_t input_dim, const EdgeModelShape& shape,
                                          std::uint64_t seed);

struct EdgeSample {
    NodeId u = 0;
    NodeId v = 0;
    int label = 0;  // 1 same label, 0 different
};

/// concat(|a - b|, a + b, a * b) with a, b the projected (and standardized)
/// inputs. Throws DataError on width mismatch.
std::vector<double> featurize_pair(std::span<const double> eu, std::span<const double> ev,
                                   const EdgeClassifierParams& params);

/// Probability that u and v share a label; exactly symmetric in (eu, ev).
double predict_edge(const EdgeClassifierParams& params, std::span<const double> eu,
                    std::span<const double> ev);

/// Scores pairs of rows of one embedding matrix. Projection is done once for
/// all rows up front, so each query costs one MLP pass.
class EdgeScorer {
  public:
    EdgeScorer(const EdgeClassifierParams& params, const DenseMatrix& embeddings);
    double operator()(NodeId u, NodeId v) const;
    /// Scores many pairs at once; same values as calling operator() per pair.
    std::vector<double> score(std::span<const EdgeSample> pairs) const;

  private:
    std::shared_ptr<const EdgeClassifierParams> params_;
    DenseMatrix projected_;
};

/// Mean binary cross-entropy over `samples`. When `grad` is non-null it is
/// overwritten with the gradient (same shapes as `params`; shift/scale are
/// not trained and left empty).
double edge_loss(const EdgeClassifierParams& params, const DenseMatrix& embeddings,
                 std::span<const EdgeSample> samples, EdgeClassifierParams* grad = nullptr);

struct EdgeTrainConfig {
    EdgeModelShape shape;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    /// Relative tolerance on |neg - pos| / pos when building a balanced set.
    double balance_tol = 0.0;
    /// Keep observed different-label edges as negatives (true) or draw every
    /// negative from random different-label pairs (false).
    bool mix_observed_negatives = true;
    bool standardize = true;
};

struct EdgeTrainingSet {
    std::vector<EdgeSample> samples;
    std::size_t positives = 0;
    std::size_t observed_negatives = 0;
    std::size_t sampled_negatives = 0;
};

/// Samples for training on the nodes in `nodes` (all must be labeled):
/// same-label edges among them are positives; different-label edges are
/// negatives (subsampled if they outnumber positives); random different-label
/// pairs top the negatives up to a 1:1 balance.
EdgeTrainingSet build_edge_samples(const Graph& g, const LabelVector& y,
                                   std::span<const NodeId> nodes, const EdgeTrainConfig& cfg);

/// Mini-batch gradient descent with momentum on the binary cross-entropy.
/// Starts from `params` and returns the trained copy. `loss_history`, if
/// given, receives the full-set loss before the first epoch and after each.
EdgeClassifierParams fit_edge_classifier(EdgeClassifierParams params,
                                         const DenseMatrix& embeddings,
                                         std::span<const EdgeSample> samples,
                                         const EdgeTrainConfig& cfg,
                                         std::vector<double>* loss_history = nullptr);

/// Builds samples from the known-mask nodes of `y`, initializes and trains.
/// Throws DataError if no labeled edge exists.
EdgeClassifierParams train_edge_classifier(const DenseMatrix& embeddings, const Graph& g,
                                           const LabelVector& y, const EdgeTrainConfig& cfg,
                                           std::vector<double>* loss_history = nullptr);

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Undefined ratios (empty denominators) are left empty.
struct EdgeEvalReport {
    std::optional<double> p;      // P(yhat=1 | y=1)
    std::optional<double> q;      // P(yhat=1 | y=0)
    std::optional<double> p_pre;  // P(y=1 | yhat=1)
    double accuracy = 0.0;
    ConfusionCounts counts;
};

EdgeEvalReport report_from_counts(const ConfusionCounts& c);

/// yhat = 1 iff score > threshold. Throws DataError on an empty sample list.
EdgeEvalReport evaluate_edge_classifier(const EdgeClassifierParams& params,
                                        std::span<const EdgeSample> samples,
                                        const DenseMatrix& embeddings, double threshold = 0.5);

/// Checkpoint as JSON text. Version field is mandatory on load.
std::string edge_params_to_json(const EdgeClassifierParams& params);
EdgeClassifierParams edge_params_from_json(const std::string& text);

} // namespace nref

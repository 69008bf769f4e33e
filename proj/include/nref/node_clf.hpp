#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nref/dense.hpp"
#include "nref/graph.hpp"

namespace nref {

struct Split {
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;
    /// Optional smaller training set for the semi-supervised protocol.
    std::vector<NodeId> semi_train;

    /// Throws DataError when ids are out of range or train/val/test overlap.
    void validate(std::size_t num_nodes) const;
};

struct SgcConfig {
    unsigned k = 2;
    std::size_t epochs = 300;
    double learning_rate = 0.5;
    double momentum = 0.9;
    double weight_decay = 5e-6;
    /// Stop once validation accuracy has not improved for this many epochs.
    std::size_t patience = 30;
    bool normalize_features = true;
    std::uint64_t seed = 0;
};

/// Linear softmax head on A_hat^K X.
struct SgcModel {
    unsigned k = 2;
    bool normalize_features = true;
    DenseMatrix weights;        // F x C
    std::vector<double> bias;   // C
    std::uint64_t seed = 0;
    std::size_t epochs_run = 0;
};

struct ClassReport {
    double accuracy = 0.0;
    std::vector<std::optional<double>> per_class_accuracy;  // empty when class absent
    std::size_t epochs_run = 0;
    std::size_t evaluated = 0;
};

/// Optionally L2-normalizes rows, then propagates K steps.
DenseMatrix sgc_features(const Graph& g, const DenseMatrix& x, unsigned k, bool normalize_rows);

/// Mean softmax cross-entropy over `nodes` plus (weight_decay / 2) ||W||^2.
/// Fills the gradients when both pointers are non-null.
double softmax_loss(const DenseMatrix& weights, std::span<const double> bias,
                    const DenseMatrix& features, const LabelVector& y,
                    std::span<const NodeId> nodes, double weight_decay,
                    DenseMatrix* grad_w = nullptr, std::vector<double>* grad_b = nullptr);

/// Full-batch gradient descent with momentum on precomputed features; keeps
/// the weights with the best validation accuracy seen.
SgcModel fit_sgc_head(const DenseMatrix& features, const LabelVector& y,
                      std::span<const NodeId> train, std::span<const NodeId> val,
                      const SgcConfig& cfg);

/// Throws DataError for an empty training set, NumericError on divergence.
SgcModel train_sgc(const Graph& g, const DenseMatrix& x, const LabelVector& y,
                   const Split& split, const SgcConfig& cfg, bool semi_supervised = false);

/// Argmax over logits, lowest class id on ties.
std::vector<std::int32_t> predict_classes(const SgcModel& model, const DenseMatrix& features);

ClassReport evaluate_features(const SgcModel& model, const DenseMatrix& features,
                              const LabelVector& y, std::span<const NodeId> nodes);

ClassReport evaluate(const SgcModel& model, const Graph& g, const DenseMatrix& x,
                     const LabelVector& y, std::span<const NodeId> nodes);

struct Comparison {
    ClassReport origin;
    ClassReport refined;
    double delta = 0.0;  // refined - origin test accuracy
};

/// Same config and seed on both graphs, evaluated on split.test.
Comparison compare_origin_vs_ne(const Graph& g, const Graph& g_ne, const DenseMatrix& x,
                                const LabelVector& y, const Split& split, const SgcConfig& cfg,
                                bool semi_supervised = false);

} // namespace nref

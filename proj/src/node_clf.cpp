#include "nref/node_clf.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nref/propagate.hpp"
#include "nref/rng.hpp"

namespace nref {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> view(const DenseMatrix& m) {
    return {m.values().data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())};
}

// Logits for the listed rows only.
RowMat logits_for(const DenseMatrix& w, std::span<const double> b, const DenseMatrix& h,
                  std::span<const NodeId> nodes) {
    RowMat x(Eigen::Index(nodes.size()), Eigen::Index(h.cols()));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto r = h.row(nodes[i]);
        std::copy(r.begin(), r.end(), x.row(Eigen::Index(i)).data());
    }
    RowMat z = x * view(w);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) z(i, c) += b[std::size_t(c)];
    }
    return z;
}

std::int32_t argmax_row(const RowMat& z, Eigen::Index i) {
    std::int32_t best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c) {
        if (z(i, c) > z(i, best)) best = std::int32_t(c);
    }
    return best;
}

double accuracy_on(const DenseMatrix& w, std::span<const double> b, const DenseMatrix& h,
                   const LabelVector& y, std::span<const NodeId> nodes) {
    if (nodes.empty()) return 0.0;
    const RowMat z = logits_for(w, b, h, nodes);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        hits += argmax_row(z, Eigen::Index(i)) == y.labels[nodes[i]];
    }
    return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

void require_labeled(const LabelVector& y, std::span<const NodeId> nodes, const char* who) {
    for (NodeId v : nodes) {
        if (v >= y.size() || !y.labeled(v)) {
            throw DataError(std::string(who) + ": node " + std::to_string(v) + " unlabeled");
        }
    }
}

} // namespace

void Split::validate(std::size_t num_nodes) const {
    std::vector<std::uint8_t> owner(num_nodes, 0);
    auto mark = [&](const std::vector<NodeId>& ids, std::uint8_t tag, const char* name) {
        for (NodeId v : ids) {
            if (v >= num_nodes) {
                throw DataError(std::string("split: ") + name + " node " + std::to_string(v) +
                                " out of range");
            }
            if (owner[v] != 0 && owner[v] != tag) {
                throw DataError("split: node " + std::to_string(v) + " appears in two sets");
            }
            owner[v] = tag;
        }
    };
    mark(train, 1, "train");
    mark(val, 2, "val");
    mark(test, 3, "test");
    for (NodeId v : semi_train) {
        if (v >= num_nodes || owner[v] == 2 || owner[v] == 3) {
            throw DataError("split: semi_train node " + std::to_string(v) +
                            " out of range or outside train");
        }
    }
}

DenseMatrix sgc_features(const Graph& g, const DenseMatrix& x, unsigned k, bool normalize_rows) {
    DenseMatrix in = x;
    if (normalize_rows) l2_normalize_rows(in);
    return propagate_k(normalize_adjacency(g), in, k);
}

double softmax_loss(const DenseMatrix& weights, std::span<const double> bias,
                    const DenseMatrix& features, const LabelVector& y,
                    std::span<const NodeId> nodes, double weight_decay, DenseMatrix* grad_w,
                    std::vector<double>* grad_b) {
    if (nodes.empty()) throw DataError("softmax_loss: no nodes");
    const RowMat z = logits_for(weights, bias, features, nodes);
    const auto c = z.cols();
    const double inv_n = 1.0 / static_cast<double>(nodes.size());
    RowMat dz(z.rows(), c);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double mx = z.row(i).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j < c; ++j) sum += std::exp(z(i, j) - mx);
        const double log_sum = mx + std::log(sum);
        const auto label = y.labels[nodes[std::size_t(i)]];
        loss += log_sum - z(i, label);
        for (Eigen::Index j = 0; j < c; ++j) {
            dz(i, j) = (std::exp(z(i, j) - log_sum) - (j == label ? 1.0 : 0.0)) * inv_n;
        }
    }
    loss *= inv_n;
    double sq = 0.0;
    for (double v : weights.values()) sq += v * v;
    loss += 0.5 * weight_decay * sq;

    if (grad_w && grad_b) {
        *grad_w = DenseMatrix(weights.rows(), weights.cols());
        grad_b->assign(std::size_t(c), 0.0);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto h = features.row(nodes[i]);
            for (std::size_t f = 0; f < h.size(); ++f) {
                if (h[f] == 0.0) continue;
                auto gw = grad_w->row(f);
                for (Eigen::Index j = 0; j < c; ++j) gw[std::size_t(j)] += h[f] * dz(Eigen::Index(i), j);
            }
            for (Eigen::Index j = 0; j < c; ++j) (*grad_b)[std::size_t(j)] += dz(Eigen::Index(i), j);
        }
        auto gv = grad_w->values();
        const auto wv = weights.values();
        for (std::size_t t = 0; t < gv.size(); ++t) gv[t] += weight_decay * wv[t];
    }
    return loss;
}

SgcModel fit_sgc_head(const DenseMatrix& features, const LabelVector& y,
                      std::span<const NodeId> train, std::span<const NodeId> val,
                      const SgcConfig& cfg) {
    if (train.empty()) throw DataError("train_sgc: empty training set");
    require_labeled(y, train, "train_sgc");
    require_labeled(y, val, "train_sgc");
    const std::size_t f = features.cols();
    const std::size_t c = static_cast<std::size_t>(y.num_classes);
    if (c == 0) throw DataError("train_sgc: no classes");

    SgcModel model;
    model.k = cfg.k;
    model.normalize_features = cfg.normalize_features;
    model.seed = cfg.seed;
    model.weights = DenseMatrix(f, c);
    model.bias.assign(c, 0.0);
    Rng rng(cfg.seed);
    const double a = std::sqrt(6.0 / static_cast<double>(f + c));
    for (double& v : model.weights.values()) v = (2.0 * rng.uniform() - 1.0) * a;

    DenseMatrix vel_w(f, c);
    std::vector<double> vel_b(c, 0.0);
    DenseMatrix grad_w;
    std::vector<double> grad_b;

    DenseMatrix best_w = model.weights;
    std::vector<double> best_b = model.bias;
    double best_val = val.empty() ? 0.0 : accuracy_on(model.weights, model.bias, features, y, val);
    std::size_t since_best = 0;

    std::size_t epoch = 0;
    for (; epoch < cfg.epochs; ++epoch) {
        const double loss = softmax_loss(model.weights, model.bias, features, y, train,
                                         cfg.weight_decay, &grad_w, &grad_b);
        if (!std::isfinite(loss)) {
            throw NumericError("train_sgc: non-finite loss at epoch " + std::to_string(epoch));
        }
        auto wv = model.weights.values();
        auto vw = vel_w.values();
        const auto gw = grad_w.values();
        for (std::size_t t = 0; t < wv.size(); ++t) {
            vw[t] = cfg.momentum * vw[t] + gw[t];
            wv[t] -= cfg.learning_rate * vw[t];
        }
        for (std::size_t j = 0; j < c; ++j) {
            vel_b[j] = cfg.momentum * vel_b[j] + grad_b[j];
            model.bias[j] -= cfg.learning_rate * vel_b[j];
        }
        if (val.empty()) continue;
        const double acc = accuracy_on(model.weights, model.bias, features, y, val);
        if (acc > best_val) {
            best_val = acc;
            best_w = model.weights;
            best_b = model.bias;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            ++epoch;
            break;
        }
    }
    if (!val.empty()) {
        model.weights = std::move(best_w);
        model.bias = std::move(best_b);
    }
    model.epochs_run = epoch;
    return model;
}

SgcModel train_sgc(const Graph& g, const DenseMatrix& x, const LabelVector& y,
                   const Split& split, const SgcConfig& cfg, bool semi_supervised) {
    if (x.rows() != g.num_nodes()) throw DataError("train_sgc: feature rows differ from node count");
    split.validate(g.num_nodes());
    const auto& train = semi_supervised ? split.semi_train : split.train;
    if (train.empty()) throw DataError("train_sgc: empty training split");
    const DenseMatrix h = sgc_features(g, x, cfg.k, cfg.normalize_features);
    return fit_sgc_head(h, y, train, split.val, cfg);
}

std::vector<std::int32_t> predict_classes(const SgcModel& model, const DenseMatrix& features) {
    std::vector<NodeId> all(features.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = NodeId(i);
    const RowMat z = logits_for(model.weights, model.bias, features, all);
    std::vector<std::int32_t> out(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) out[i] = argmax_row(z, Eigen::Index(i));
    return out;
}

ClassReport evaluate_features(const SgcModel& model, const DenseMatrix& features,
                              const LabelVector& y, std::span<const NodeId> nodes) {
    require_labeled(y, nodes, "evaluate");
    ClassReport r;
    r.epochs_run = model.epochs_run;
    r.evaluated = nodes.size();
    const std::size_t c = model.bias.size();
    std::vector<std::size_t> hits(c, 0), totals(c, 0);
    std::size_t correct = 0;
    if (!nodes.empty()) {
        const RowMat z = logits_for(model.weights, model.bias, features, nodes);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto label = std::size_t(y.labels[nodes[i]]);
            const bool ok = argmax_row(z, Eigen::Index(i)) == std::int32_t(label);
            correct += ok;
            ++totals[label];
            hits[label] += ok;
        }
        r.accuracy = static_cast<double>(correct) / static_cast<double>(nodes.size());
    }
    r.per_class_accuracy.resize(c);
    for (std::size_t j = 0; j < c; ++j) {
        if (totals[j]) r.per_class_accuracy[j] = static_cast<double>(hits[j]) / static_cast<double>(totals[j]);
    }
    return r;
}

ClassReport evaluate(const SgcModel& model, const Graph& g, const DenseMatrix& x,
                     const LabelVector& y, std::span<const NodeId> nodes) {
    return evaluate_features(model, sgc_features(g, x, model.k, model.normalize_features), y, nodes);
}

Comparison compare_origin_vs_ne(const Graph& g, const Graph& g_ne, const DenseMatrix& x,
                                const LabelVector& y, const Split& split, const SgcConfig& cfg,
                                bool semi_supervised) {
    Comparison out;
    const auto origin = train_sgc(g, x, y, split, cfg, semi_supervised);
    out.origin = evaluate(origin, g, x, y, split.test);
    const auto refined = train_sgc(g_ne, x, y, split, cfg, semi_supervised);
    out.refined = evaluate(refined, g_ne, x, y, split.test);
    out.delta = out.refined.accuracy - out.origin.accuracy;
    return out;
}

} // namespace nref

#include "nref/edge_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "json.hpp"
#include "nref/rng.hpp"

namespace nref {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const DenseMatrix& m) { return {m.values().data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }
MutMap view(DenseMatrix& m) { return {m.values().data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) - y z, stable for large |z|.
double bce_with_logit(double z, int y) {
    return std::max(z, 0.0) - (y ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double standardized(const EdgeClassifierParams& p, std::size_t c, double x) {
    if (p.input_shift.empty()) return x;
    return (x - p.input_shift[c]) / p.input_scale[c];
}

// Per-sample MLP pass over a combined feature vector; fixed loop order.
double mlp_logit(const EdgeClassifierParams& p, std::vector<double> act) {
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        const std::size_t out_w = layer.weight.cols();
        std::vector<double> next(layer.bias);
        for (std::size_t i = 0; i < act.size(); ++i) {
            const double a = act[i];
            if (a == 0.0) continue;
            const auto wrow = layer.weight.row(i);
            for (std::size_t o = 0; o < out_w; ++o) next[o] += a * wrow[o];
        }
        if (l + 1 < p.layers.size()) {
            for (double& v : next) v = std::max(v, 0.0);
        }
        act = std::move(next);
    }
    return act[0];
}

std::vector<double> combine(std::span<const double> a, std::span<const double> b) {
    const std::size_t d = a.size();
    std::vector<double> z(3 * d);
    for (std::size_t i = 0; i < d; ++i) {
        z[i] = std::abs(a[i] - b[i]);
        z[d + i] = a[i] + b[i];
        z[2 * d + i] = a[i] * b[i];
    }
    return z;
}

std::vector<double> project(const EdgeClassifierParams& p, std::span<const double> e) {
    const std::size_t d = p.proj_dim();
    std::vector<double> out(d, 0.0);
    for (std::size_t c = 0; c < e.size(); ++c) {
        const double x = standardized(p, c, e[c]);
        if (x == 0.0) continue;
        const auto wrow = p.projection.row(c);
        for (std::size_t j = 0; j < d; ++j) out[j] += x * wrow[j];
    }
    return out;
}

void check_width(const EdgeClassifierParams& p, std::size_t w, const char* who) {
    if (w != p.input_dim()) {
        throw DataError(std::string(who) + ": embedding width " + std::to_string(w) +
                        " differs from classifier input width " + std::to_string(p.input_dim()));
    }
}

RowMat gather_standardized(const EdgeClassifierParams& p, const DenseMatrix& emb,
                           std::span<const EdgeSample> samples, bool first) {
    RowMat out(Eigen::Index(samples.size()), Eigen::Index(emb.cols()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto row = emb.row(first ? samples[i].u : samples[i].v);
        for (std::size_t c = 0; c < emb.cols(); ++c) out(Eigen::Index(i), Eigen::Index(c)) = standardized(p, c, row[c]);
    }
    return out;
}

// Every trainable tensor, in a fixed order.
std::vector<std::span<double>> trainable(EdgeClassifierParams& p) {
    std::vector<std::span<double>> out;
    out.push_back(p.projection.values());
    for (auto& l : p.layers) {
        out.push_back(l.weight.values());
        out.push_back(l.bias);
    }
    return out;
}

EdgeClassifierParams zeros_like(const EdgeClassifierParams& p) {
    EdgeClassifierParams g;
    g.projection = DenseMatrix(p.projection.rows(), p.projection.cols());
    for (const auto& l : p.layers) {
        g.layers.push_back({DenseMatrix(l.weight.rows(), l.weight.cols()),
                            std::vector<double>(l.bias.size(), 0.0)});
    }
    g.seed = p.seed;
    return g;
}

} // namespace

void EdgeClassifierParams::validate() const {
    if (layers.empty()) throw DataError("edge classifier: no MLP layers");
    if (layers.front().weight.rows() != 3 * proj_dim()) {
        throw DataError("edge classifier: first layer input width must be 3 * projection width");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].bias.size() != layers[l].weight.cols()) {
            throw DataError("edge classifier: bias width mismatch in layer " + std::to_string(l));
        }
        if (l + 1 < layers.size() && layers[l].weight.cols() != layers[l + 1].weight.rows()) {
            throw DataError("edge classifier: layer widths do not chain at layer " + std::to_string(l));
        }
    }
    if (layers.back().weight.cols() != 1) throw DataError("edge classifier: output width must be 1");
    if (!input_shift.empty() &&
        (input_shift.size() != input_dim() || input_scale.size() != input_dim())) {
        throw DataError("edge classifier: standardization vectors have the wrong width");
    }
    auto finite = [](std::span<const double> s) {
        return std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); });
    };
    bool ok = projection.all_finite() && finite(input_shift) && finite(input_scale);
    for (const auto& l : layers) ok = ok && l.weight.all_finite() && finite(l.bias);
    if (!ok) throw NumericError("edge classifier: non-finite parameters");
}

EdgeClassifierParams init_edge_classifier(std::size_t input_dim, const EdgeModelShape& shape,
                                          std::uint64_t seed) {
    Rng rng(seed);
    auto glorot = [&](std::size_t in, std::size_t out) {
        DenseMatrix w(in, out);
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * a;
        return w;
    };
    EdgeClassifierParams p;
    p.seed = seed;
    p.projection = glorot(input_dim, shape.proj_dim);
    std::size_t in = 3 * shape.proj_dim;
    for (std::size_t h : shape.hidden) {
        p.layers.push_back({glorot(in, h), std::vector<double>(h, 0.0)});
        in = h;
    }
    p.layers.push_back({glorot(in, 1), {0.0}});
    return p;
}

std::vector<double> featurize_pair(std::span<const double> eu, std::span<const double> ev,
                                   const EdgeClassifierParams& params) {
    check_width(params, eu.size(), "featurize_pair");
    check_width(params, ev.size(), "featurize_pair");
    return combine(project(params, eu), project(params, ev));
}

double predict_edge(const EdgeClassifierParams& params, std::span<const double> eu,
                    std::span<const double> ev) {
    params.validate();
    return sigmoid(mlp_logit(params, featurize_pair(eu, ev, params)));
}

EdgeScorer::EdgeScorer(const EdgeClassifierParams& params, const DenseMatrix& embeddings)
    : params_(std::make_shared<const EdgeClassifierParams>(params)) {
    params.validate();
    check_width(params, embeddings.cols(), "EdgeScorer");
    RowMat x(Eigen::Index(embeddings.rows()), Eigen::Index(embeddings.cols()));
    for (std::size_t r = 0; r < embeddings.rows(); ++r) {
        const auto row = embeddings.row(r);
        for (std::size_t c = 0; c < embeddings.cols(); ++c) x(Eigen::Index(r), Eigen::Index(c)) = standardized(params, c, row[c]);
    }
    projected_ = DenseMatrix(embeddings.rows(), params.proj_dim());
    view(projected_).noalias() = x * view(params.projection);
}

double EdgeScorer::operator()(NodeId u, NodeId v) const {
    return sigmoid(mlp_logit(*params_, combine(projected_.row(u), projected_.row(v))));
}

std::vector<double> EdgeScorer::score(std::span<const EdgeSample> pairs) const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& s : pairs) out.push_back((*this)(s.u, s.v));
    return out;
}

double edge_loss(const EdgeClassifierParams& p, const DenseMatrix& emb,
                 std::span<const EdgeSample> samples, EdgeClassifierParams* grad) {
    check_width(p, emb.cols(), "edge_loss");
    const auto n = Eigen::Index(samples.size());
    if (n == 0) throw DataError("edge_loss: no samples");
    const auto d = Eigen::Index(p.proj_dim());

    const RowMat xu = gather_standardized(p, emb, samples, true);
    const RowMat xv = gather_standardized(p, emb, samples, false);
    const RowMat a = xu * view(p.projection);
    const RowMat b = xv * view(p.projection);

    RowMat z0(n, 3 * d);
    z0.leftCols(d) = (a - b).cwiseAbs();
    z0.middleCols(d, d) = a + b;
    z0.rightCols(d) = a.cwiseProduct(b);

    std::vector<RowMat> acts{z0};
    std::vector<RowMat> pre;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        const Eigen::Map<const Eigen::RowVectorXd> bias(layer.bias.data(), Eigen::Index(layer.bias.size()));
        RowMat h = acts.back() * view(layer.weight);
        h.rowwise() += bias;
        pre.push_back(h);
        if (l + 1 < p.layers.size()) acts.push_back(h.cwiseMax(0.0));
    }
    const RowMat& logits = pre.back();

    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += bce_with_logit(logits(i, 0), samples[std::size_t(i)].label);
    loss /= static_cast<double>(n);
    if (grad == nullptr) return loss;

    *grad = zeros_like(p);
    RowMat delta(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        delta(i, 0) = (sigmoid(logits(i, 0)) - samples[std::size_t(i)].label) / static_cast<double>(n);
    }
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        view(grad->layers[l].weight).noalias() = acts[l].transpose() * delta;
        const Eigen::RowVectorXd gb = delta.colwise().sum();
        std::copy(gb.data(), gb.data() + gb.size(), grad->layers[l].bias.begin());
        RowMat back = delta * view(p.layers[l].weight).transpose();
        if (l > 0) back = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        delta = std::move(back);
    }
    // delta now holds dL/dz0.
    const RowMat sgn = (a - b).unaryExpr([](double x) { return double((x > 0.0) - (x < 0.0)); });
    const RowMat dabs = delta.leftCols(d).cwiseProduct(sgn);
    const RowMat dsum = delta.middleCols(d, d);
    const RowMat dprod = delta.rightCols(d);
    const RowMat da = dabs + dsum + dprod.cwiseProduct(b);
    const RowMat db = -dabs + dsum + dprod.cwiseProduct(a);
    view(grad->projection).noalias() = xu.transpose() * da + xv.transpose() * db;
    return loss;
}

EdgeTrainingSet build_edge_samples(const Graph& g, const LabelVector& y,
                                   std::span<const NodeId> nodes, const EdgeTrainConfig& cfg) {
    if (!g.symmetric()) throw DataError("build_edge_samples: graph must be symmetric");
    std::vector<bool> in_set(g.num_nodes(), false);
    for (NodeId v : nodes) {
        if (v >= g.num_nodes() || !y.labeled(v)) {
            throw DataError("build_edge_samples: training node " + std::to_string(v) + " unlabeled");
        }
        in_set[v] = true;
    }

    EdgeTrainingSet set;
    std::vector<EdgeSample> negatives;
    for (const auto& [u, v] : g.undirected_edges()) {
        if (!in_set[u] || !in_set[v]) continue;
        if (y.labels[u] == y.labels[v]) {
            set.samples.push_back({u, v, 1});
        } else if (cfg.mix_observed_negatives) {
            negatives.push_back({u, v, 0});
        }
    }
    set.positives = set.samples.size();
    if (set.positives == 0) throw DataError("build_edge_samples: no labeled same-label edges available");

    Rng rng(mix64(cfg.seed ^ 0x6e656761746976ULL));
    if (negatives.size() > set.positives) {
        rng.shuffle(negatives.begin(), negatives.end());
        negatives.resize(set.positives);
        std::sort(negatives.begin(), negatives.end(),
                  [](const EdgeSample& a, const EdgeSample& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
    }
    set.observed_negatives = negatives.size();

    std::set<std::pair<NodeId, NodeId>> used;
    for (const auto& s : negatives) used.emplace(s.u, s.v);
    const auto target = static_cast<std::size_t>(
        std::ceil(static_cast<double>(set.positives) * (1.0 - cfg.balance_tol)));
    const std::size_t max_attempts = 100 * (target + 1) + 1000;
    std::size_t attempts = 0;
    while (negatives.size() < target && attempts++ < max_attempts) {
        NodeId u = nodes[rng.below(nodes.size())];
        NodeId v = nodes[rng.below(nodes.size())];
        if (y.labels[u] == y.labels[v]) continue;
        if (u > v) std::swap(u, v);
        if (!used.emplace(u, v).second) continue;
        negatives.push_back({u, v, 0});
        ++set.sampled_negatives;
    }
    set.samples.insert(set.samples.end(), negatives.begin(), negatives.end());
    return set;
}

EdgeClassifierParams fit_edge_classifier(EdgeClassifierParams params, const DenseMatrix& emb,
                                         std::span<const EdgeSample> samples,
                                         const EdgeTrainConfig& cfg,
                                         std::vector<double>* loss_history) {
    params.validate();
    check_width(params, emb.cols(), "fit_edge_classifier");
    if (samples.empty()) throw DataError("fit_edge_classifier: no samples");
    if (loss_history) loss_history->push_back(edge_loss(params, emb, samples));
    if (cfg.epochs == 0) return params;

    Rng rng(mix64(cfg.seed ^ 0x747261696eULL));
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    EdgeClassifierParams velocity = zeros_like(params);
    EdgeClassifierParams grad;
    std::vector<EdgeSample> batch;
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += bs) {
            batch.clear();
            for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
                batch.push_back(samples[order[i]]);
            }
            const double loss = edge_loss(params, emb, batch, &grad);
            if (!std::isfinite(loss)) {
                throw NumericError("fit_edge_classifier: non-finite loss at epoch " +
                                   std::to_string(epoch) + "; lower the learning rate");
            }
            auto ps = trainable(params);
            auto gs = trainable(grad);
            auto vs = trainable(velocity);
            for (std::size_t t = 0; t < ps.size(); ++t) {
                // Even tensors after the projection are biases; no decay on them.
                const bool is_bias = t > 0 && (t % 2) == 0;
                for (std::size_t i = 0; i < ps[t].size(); ++i) {
                    double gi = gs[t][i];
                    if (!is_bias) gi += cfg.weight_decay * ps[t][i];
                    vs[t][i] = cfg.momentum * vs[t][i] + gi;
                    ps[t][i] -= cfg.learning_rate * vs[t][i];
                }
            }
        }
        if (loss_history) {
            const double full = edge_loss(params, emb, samples);
            if (!std::isfinite(full)) throw NumericError("fit_edge_classifier: non-finite loss");
            loss_history->push_back(full);
        }
    }
    return params;
}

EdgeClassifierParams train_edge_classifier(const DenseMatrix& embeddings, const Graph& g,
                                           const LabelVector& y, const EdgeTrainConfig& cfg,
                                           std::vector<double>* loss_history) {
    if (embeddings.rows() != g.num_nodes()) {
        throw DataError("train_edge_classifier: embedding rows differ from node count");
    }
    y.validate();
    std::vector<NodeId> nodes;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        if (y.known_mask[v] && y.labeled(v)) nodes.push_back(v);
    }
    const auto set = build_edge_samples(g, y, nodes, cfg);

    auto params = init_edge_classifier(embeddings.cols(), cfg.shape, cfg.seed);
    if (cfg.standardize) {
        const std::size_t f = embeddings.cols();
        params.input_shift.assign(f, 0.0);
        params.input_scale.assign(f, 1.0);
        const double n = static_cast<double>(embeddings.rows());
        for (std::size_t c = 0; c < f; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < embeddings.rows(); ++r) mean += embeddings(r, c);
            mean /= n;
            double var = 0.0;
            for (std::size_t r = 0; r < embeddings.rows(); ++r) {
                const double dv = embeddings(r, c) - mean;
                var += dv * dv;
            }
            var /= n;
            params.input_shift[c] = mean;
            params.input_scale[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
    }
    return fit_edge_classifier(std::move(params), embeddings, set.samples, cfg, loss_history);
}

EdgeEvalReport report_from_counts(const ConfusionCounts& c) {
    EdgeEvalReport r;
    r.counts = c;
    auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    r.p = ratio(c.tp, c.tp + c.fn);
    r.q = ratio(c.fp, c.fp + c.tn);
    r.p_pre = ratio(c.tp, c.tp + c.fp);
    const auto total = c.tp + c.fp + c.tn + c.fn;
    r.accuracy = total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
    return r;
}

EdgeEvalReport evaluate_edge_classifier(const EdgeClassifierParams& params,
                                        std::span<const EdgeSample> samples,
                                        const DenseMatrix& embeddings, double threshold) {
    if (samples.empty()) throw DataError("evaluate_edge_classifier: empty sample list");
    const EdgeScorer scorer(params, embeddings);
    ConfusionCounts c;
    for (const auto& s : samples) {
        const bool predicted = scorer(s.u, s.v) > threshold;
        if (s.label) {
            predicted ? ++c.tp : ++c.fn;
        } else {
            predicted ? ++c.fp : ++c.tn;
        }
    }
    return report_from_counts(c);
}

namespace {
constexpr int kCheckpointVersion = 1;

nlohmann::json matrix_json(const DenseMatrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()},
            {"values", std::vector<double>(m.values().begin(), m.values().end())}};
}

DenseMatrix matrix_from(const nlohmann::json& j) {
    return DenseMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                       j.at("values").get<std::vector<double>>());
}
} // namespace

std::string edge_params_to_json(const EdgeClassifierParams& p) {
    nlohmann::json j;
    j["format"] = "nref-edge-classifier";
    j["version"] = kCheckpointVersion;
    j["seed"] = p.seed;
    j["embedding"] = p.embedding;
    j["input_dim"] = p.input_dim();
    j["proj_dim"] = p.proj_dim();
    j["input_shift"] = p.input_shift;
    j["input_scale"] = p.input_scale;
    j["projection"] = matrix_json(p.projection);
    j["layers"] = nlohmann::json::array();
    for (const auto& l : p.layers) {
        j["layers"].push_back({{"weight", matrix_json(l.weight)}, {"bias", l.bias}});
    }
    return j.dump(1);
}

EdgeClassifierParams edge_params_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.contains("version")) throw DataError("edge checkpoint: missing version field");
        if (j.at("version").get<int>() != kCheckpointVersion) {
            throw DataError("edge checkpoint: unsupported version " + j.at("version").dump());
        }
        EdgeClassifierParams p;
        p.seed = j.at("seed").get<std::uint64_t>();
        p.embedding = j.value("embedding", std::string("propagated"));
        if (p.embedding != "propagated" && p.embedding != "raw") {
            throw DataError("edge checkpoint: unknown embedding kind '" + p.embedding + "'");
        }
        p.input_shift = j.at("input_shift").get<std::vector<double>>();
        p.input_scale = j.at("input_scale").get<std::vector<double>>();
        p.projection = matrix_from(j.at("projection"));
        for (const auto& l : j.at("layers")) {
            p.layers.push_back({matrix_from(l.at("weight")), l.at("bias").get<std::vector<double>>()});
        }
        if (p.input_dim() != j.at("input_dim").get<std::size_t>() ||
            p.proj_dim() != j.at("proj_dim").get<std::size_t>()) {
            throw DataError("edge checkpoint: shape header disagrees with stored tensors");
        }
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("edge checkpoint: ") + e.what());
    }
}

} // namespace nref

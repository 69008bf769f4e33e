#include "nref/reco.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "nref/rng.hpp"

namespace nref {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Indices of the k largest scores; ties to the lower position.
std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t keep = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(keep), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                      });
    idx.resize(keep);
    return idx;
}

} // namespace

bool BipartiteGraph::interacted(NodeId user, NodeId item) const {
    const auto row = neighbors(user);
    return std::binary_search(row.begin(), row.end(), item_node(item));
}

BipartiteGraph build_bipartite(std::span<const Interaction> interactions, std::size_t num_users,
                               std::size_t num_items) {
    std::map<std::pair<NodeId, NodeId>, double> merged;
    for (const auto& it : interactions) {
        if (it.user >= num_users || it.item >= num_items) {
            throw DataError("build_bipartite: interaction (" + std::to_string(it.user) + ", " +
                            std::to_string(it.item) + ") out of range");
        }
        if (!(it.weight > 0.0) || !std::isfinite(it.weight)) {
            throw DataError("build_bipartite: weights must be positive and finite");
        }
        merged[{it.user, it.item}] += it.weight;
    }
    BipartiteGraph g;
    g.num_users_ = num_users;
    g.num_items_ = num_items;
    const std::size_t n = num_users + num_items;
    std::vector<std::vector<std::pair<NodeId, double>>> rows(n);
    for (const auto& [key, w] : merged) {
        const NodeId item = NodeId(num_users) + key.second;
        rows[key.first].emplace_back(item, w);
        rows[item].emplace_back(key.first, w);
    }
    g.offsets_.assign(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
        std::sort(rows[j].begin(), rows[j].end());
        g.offsets_[j + 1] = g.offsets_[j] + rows[j].size();
        for (const auto& [c, w] : rows[j]) {
            g.cols_.push_back(c);
            g.weights_.push_back(w);
        }
    }
    return g;
}

void EmbeddingTable::validate() const {
    if (values.rows() != num_users + num_items) {
        throw DataError("embeddings: " + std::to_string(values.rows()) + " rows, expected " +
                        std::to_string(num_users + num_items));
    }
    if (!values.all_finite()) throw DataError("embeddings: non-finite values");
}

std::vector<double> mean_embedding(const DenseMatrix& e) {
    std::vector<double> m(e.cols(), 0.0);
    if (e.rows() == 0) throw DataError("mean_embedding: no rows");
    for (std::size_t r = 0; r < e.rows(); ++r) {
        const auto row = e.row(r);
        for (std::size_t c = 0; c < m.size(); ++c) m[c] += row[c];
    }
    for (double& v : m) v /= static_cast<double>(e.rows());
    return m;
}

double neighbor_info_score(std::span<const double> xu, std::span<const double> xv,
                           std::span<const double> xbar) {
    if (xu.size() != xv.size() || xu.size() != xbar.size()) {
        throw DataError("neighbor_info_score: width mismatch");
    }
    const double affinity = dot(xu, xv);
    const double typicality = dot(xu, xbar);
    if (!std::isfinite(affinity) || !std::isfinite(typicality)) {
        throw NumericError("neighbor_info_score: non-finite input");
    }
    // log sigma(a) = -softplus(-a); log(1 - sigma(b)) = -softplus(b)
    return -softplus(-affinity) - softplus(typicality);
}

std::string to_string(SamplingPolicy p) {
    switch (p) {
    case SamplingPolicy::RandomWalk: return "random";
    case SamplingPolicy::Intuitive: return "intuitive";
    case SamplingPolicy::Negcn: return "negcn";
    }
    return "unknown";
}

SamplingPolicy parse_policy(const std::string& name) {
    if (name == "random" || name == "random-walk") return SamplingPolicy::RandomWalk;
    if (name == "intuitive") return SamplingPolicy::Intuitive;
    if (name == "negcn") return SamplingPolicy::Negcn;
    throw UsageError("unknown sampling policy '" + name + "'");
}

NeighborSelection select_neighbors(const BipartiteGraph& g, const EmbeddingTable& e,
                                   SamplingPolicy policy, std::size_t k, std::uint64_t seed,
                                   const RandomWalkConfig& rw) {
    if (k == 0) throw UsageError("select_neighbors: k must be at least 1");
    if (policy == SamplingPolicy::Negcn) e.validate();
    const std::size_t n = g.num_nodes();
    NeighborSelection sel;
    sel.policy = policy;
    sel.k = k;
    sel.selected.resize(n);
    const std::vector<double> xbar =
        policy == SamplingPolicy::Negcn ? mean_embedding(e.values) : std::vector<double>{};

    std::vector<double> scores;
    for (NodeId j = 0; j < n; ++j) {
        const auto nbrs = g.neighbors(j);
        scores.assign(nbrs.size(), 0.0);
        switch (policy) {
        case SamplingPolicy::Intuitive: {
            const auto w = g.weights(j);
            std::copy(w.begin(), w.end(), scores.begin());
            break;
        }
        case SamplingPolicy::Negcn:
            for (std::size_t t = 0; t < nbrs.size(); ++t) {
                scores[t] = neighbor_info_score(e.values.row(nbrs[t]), e.values.row(j), xbar);
            }
            break;
        case SamplingPolicy::RandomWalk: {
            if (nbrs.empty()) break;
            Rng rng(mix64(seed) ^ mix64(j));
            std::size_t visits = 0;
            for (std::size_t w = 0; w < rw.walks; ++w) {
                NodeId cur = j;
                for (std::size_t step = 0; step < rw.length; ++step) {
                    const auto next = g.neighbors(cur);
                    if (next.empty()) break;
                    cur = next[rng.below(next.size())];
                    const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), cur);
                    if (it != nbrs.end() && *it == cur) {
                        scores[std::size_t(it - nbrs.begin())] += 1.0;
                        ++visits;
                    }
                }
            }
            if (visits > 0) {
                for (double& s : scores) s /= static_cast<double>(visits);
            }
            break;
        }
        }
        for (std::size_t t : top_k(scores, k)) sel.selected[j].push_back(nbrs[t]);
    }
    return sel;
}

ScoreFn aggregate_and_score(const EmbeddingTable& e, const NeighborSelection& sel, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("aggregate_and_score: alpha must lie in [0, 1]");
    e.validate();
    if (sel.selected.size() != e.values.rows()) {
        throw DataError("aggregate_and_score: selection covers a different node count");
    }
    auto z = std::make_shared<DenseMatrix>(e.values);
    const std::size_t d = e.dim();
    for (std::size_t j = 0; j < sel.selected.size(); ++j) {
        const auto& picked = sel.selected[j];
        if (picked.empty()) continue;
        std::vector<double> mean(d, 0.0);
        for (NodeId u : picked) {
            const auto row = e.values.row(u);
            for (std::size_t c = 0; c < d; ++c) mean[c] += row[c];
        }
        auto out = z->row(j);
        const auto self = e.values.row(j);
        for (std::size_t c = 0; c < d; ++c) {
            out[c] = alpha * self[c] + (1.0 - alpha) * (mean[c] / static_cast<double>(picked.size()));
        }
    }
    const NodeId offset = NodeId(e.num_users);
    return [z, offset](NodeId user, NodeId item) {
        return dot(z->row(user), z->row(offset + item));
    };
}

RankingReport rank_and_evaluate(const ScoreFn& score, const BipartiteGraph& g_train,
                                std::span<const Interaction> test, std::size_t k) {
    if (k == 0) throw UsageError("rank_and_evaluate: k must be at least 1");
    std::map<NodeId, std::vector<NodeId>> by_user;
    for (const auto& t : test) {
        if (t.user >= g_train.num_users() || t.item >= g_train.num_items()) {
            throw DataError("rank_and_evaluate: test interaction out of range");
        }
        if (g_train.interacted(t.user, t.item)) {
            throw DataError("rank_and_evaluate: test pair (" + std::to_string(t.user) + ", " +
                            std::to_string(t.item) + ") also in training");
        }
        by_user[t.user].push_back(t.item);
    }

    RankingReport r;
    r.k = k;
    std::vector<double> scores;
    std::vector<NodeId> candidates;
    double sum_p = 0.0, sum_r = 0.0, sum_n = 0.0;
    for (auto& [user, items] : by_user) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        candidates.clear();
        scores.clear();
        for (NodeId i = 0; i < g_train.num_items(); ++i) {
            if (g_train.interacted(user, i)) continue;
            candidates.push_back(i);
            scores.push_back(score(user, i));
        }
        std::size_t hits = 0;
        double dcg = 0.0;
        const auto top = top_k(scores, k);
        for (std::size_t rank = 0; rank < top.size(); ++rank) {
            if (std::binary_search(items.begin(), items.end(), candidates[top[rank]])) {
                ++hits;
                dcg += 1.0 / std::log2(static_cast<double>(rank) + 2.0);
            }
        }
        double idcg = 0.0;
        for (std::size_t rank = 0; rank < std::min(k, items.size()); ++rank) {
            idcg += 1.0 / std::log2(static_cast<double>(rank) + 2.0);
        }
        sum_p += static_cast<double>(hits) / static_cast<double>(k);
        sum_r += static_cast<double>(hits) / static_cast<double>(items.size());
        sum_n += dcg / idcg;
        ++r.users_evaluated;
    }
    if (r.users_evaluated > 0) {
        const double n = static_cast<double>(r.users_evaluated);
        r.precision_at_k = sum_p / n;
        r.recall_at_k = sum_r / n;
        r.ndcg_at_k = sum_n / n;
    }
    return r;
}

double tune_alpha(const EmbeddingTable& e, const NeighborSelection& sel,
                  const BipartiteGraph& g_train, std::span<const Interaction> tuning,
                  std::span<const double> grid, std::size_t k) {
    if (grid.empty()) throw UsageError("tune_alpha: empty grid");
    double best_alpha = grid.front();
    double best = -1.0;
    for (double a : grid) {
        const double ndcg = rank_and_evaluate(aggregate_and_score(e, sel, a), g_train, tuning, k).ndcg_at_k;
        if (ndcg > best) {
            best = ndcg;
            best_alpha = a;
        }
    }
    return best_alpha;
}

} // namespace nref

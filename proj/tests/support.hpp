#pragma once

#include <cmath>
#include <vector>

#include "nref/dense.hpp"
#include "nref/graph.hpp"
#include "nref/rng.hpp"

namespace nref::test {

/// Erdos-Renyi style symmetric graph without self-loops.
inline Graph random_graph(std::size_t n, double p, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            if (rng.bernoulli(p)) edges.emplace_back(u, v);
        }
    }
    return build_graph(edges, n, true, false);
}

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix m(r, c);
    for (double& x : m.values()) x = rng.normal();
    return m;
}

inline std::vector<std::int32_t> random_labels(std::size_t n, int classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::int32_t> out(n);
    for (auto& l : out) l = std::int32_t(rng.below(std::uint64_t(classes)));
    return out;
}

/// Dense (A + I) with D^-1/2 normalization on both sides.
inline std::vector<std::vector<double>> dense_normalized(const Graph& g) {
    const std::size_t n = g.num_nodes();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v : g.neighbors(u)) a[u][v] = 1.0;
        a[u][u] = 1.0;
    }
    std::vector<double> d(n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) d[u] += a[u][v];
    }
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) a[u][v] /= std::sqrt(d[u] * d[v]);
    }
    return a;
}

inline std::vector<std::vector<double>> dense_mul(const std::vector<std::vector<double>>& a,
                                                  const std::vector<std::vector<double>>& b) {
    const std::size_t n = a.size(), m = b.size(), k = b.empty() ? 0 : b[0].size();
    std::vector<std::vector<double>> c(n, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t l = 0; l < k; ++l) c[i][l] += a[i][j] * b[j][l];
        }
    }
    return c;
}

inline std::vector<std::vector<double>> to_rows(const DenseMatrix& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
    }
    return out;
}

/// max |a - b| / max(|b|_max, tiny).
inline double max_rel_error(const DenseMatrix& a, const std::vector<std::vector<double>>& b) {
    double scale = 1e-300, err = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            scale = std::max(scale, std::abs(b[r][c]));
            err = std::max(err, std::abs(a(r, c) - b[r][c]));
        }
    }
    return err / scale;
}

} // namespace nref::test

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "nref/dense.hpp"
#include "nref/graph.hpp"
#include "nref/node_clf.hpp"
#include "nref/reco.hpp"

namespace nref {

namespace fs = std::filesystem;

inline constexpr int kBundleFormatVersion = 1;
inline constexpr int kReportSchemaVersion = 1;
/// Matrices with more values than this are written in the binary format.
inline constexpr std::size_t kBinaryMatrixThreshold = 1'000'000;

/// "%.17g": round-trips every double and is stable across runs.
std::string format_double(double x);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

std::string read_text(const fs::path& path);
/// Writes through a temporary and renames. Throws DataError on failure.
void write_text(const fs::path& path, const std::string& text);

struct EdgeList {
    std::vector<Edge> edges;
    /// Data lines in the file, i.e. the edge count before symmetrization.
    std::size_t raw_count = 0;
};

/// `src<TAB>dst` per line (any run of blanks accepted); `#` starts a comment.
EdgeList parse_edge_list(const std::string& text, const std::string& source);
/// One line per undirected edge u <= v, ascending.
std::string format_edge_list(const Graph& g);

DenseMatrix parse_matrix_csv(const std::string& text, const std::string& source);
std::string format_matrix_csv(const DenseMatrix& m);

/// Magic "NREFMAT1", u64 rows, u64 cols, then rows*cols little-endian f64.
DenseMatrix parse_matrix_bin(const std::string& bytes, const std::string& source);
std::string format_matrix_bin(const DenseMatrix& m);

/// `node<TAB>class` per line; nodes not listed are unlabeled.
LabelVector parse_labels(const std::string& text, std::size_t num_nodes, std::int32_t num_classes,
                         const std::string& source);
std::string format_labels(const LabelVector& y);

Split parse_split(const std::string& text, const std::string& source);
std::string format_split(const Split& s);

struct Bundle {
    Graph graph;
    FeatureMatrix features;
    LabelVector labels;  // known_mask = train nodes
    Split split;
    std::size_t raw_edge_count = 0;
    /// Edge list as read from disk (directed, possibly repeated). When set,
    /// it is saved instead of the canonical undirected list and must
    /// symmetrize to `graph`.
    std::vector<Edge> raw_edges;
    /// Free-form provenance copied into the manifest (e.g. generator spec).
    nlohmann::json origin = nlohmann::json::object();
};

/// Throws DataError on a missing file, checksum or count mismatch, or a
/// malformed line (with its line number).
Bundle load_bundle(const fs::path& dir);

/// Canonical serialization; returns the manifest. Saving the same objects
/// twice yields byte-identical files.
nlohmann::json save_bundle(const Bundle& b, const fs::path& dir);

/// Content hash of a bundle directory: hash over the manifest bytes, which
/// already carry the per-file checksums.
std::string bundle_hash(const fs::path& dir);

/// Interaction formats:
///  - Tsv: `user<TAB>item[<TAB>weight]` per line;
///  - Adjacency: `user item item ...` per line (the Yelp2018 / LightGCN layout).
enum class InteractionFormat { Tsv, Adjacency, Auto };

struct InteractionSet {
    std::vector<Interaction> interactions;
    std::size_t num_users = 0;  // 1 + max id seen
    std::size_t num_items = 0;
};

InteractionSet parse_interactions(const std::string& text, InteractionFormat fmt,
                                  const std::string& source);
std::string format_interactions(std::span<const Interaction> xs);

/// JSON header {"format", "version", "num_users", "num_items", "dim",
/// "matrix"} next to a CSV or binary matrix file, rows users then items.
EmbeddingTable load_embeddings(const fs::path& header);
void save_embeddings(const EmbeddingTable& e, const fs::path& header);

} // namespace nref

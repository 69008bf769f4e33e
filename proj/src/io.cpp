#include "nref/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace nref {

using nlohmann::json;

namespace {

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& what) {
    throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

// Splits on tabs, spaces, or commas (per `seps`), dropping empty fields.
std::vector<std::string_view> split_fields(std::string_view line, std::string_view seps) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && seps.find(line[i]) != std::string_view::npos) ++i;
        std::size_t j = i;
        while (j < line.size() && seps.find(line[j]) == std::string_view::npos) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

bool parse_real(std::string_view s, double& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

// Iterates over lines with comments and blanks stripped; calls f(lineno, content).
template <typename F>
void for_each_line(const std::string& text, F&& f) {
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        ++lineno;
        std::string_view line(text.data() + pos, nl - pos);
        pos = nl + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
            line.remove_suffix(1);
        }
        std::size_t lead = 0;
        while (lead < line.size() && (line[lead] == ' ' || line[lead] == '\t')) ++lead;
        line.remove_prefix(lead);
        if (line.empty()) continue;
        f(lineno, line);
    }
}

std::vector<NodeId> parse_id_array(const json& j, const char* key, const std::string& source) {
    std::vector<NodeId> out;
    if (!j.contains(key)) return out;
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw DataError(source + ": '" + key + "' must be an array");
    for (const auto& v : arr) {
        if (!v.is_number_unsigned()) throw DataError(source + ": '" + key + "' must hold node ids");
        const auto id = v.get<std::uint64_t>();
        if (id > std::numeric_limits<NodeId>::max()) throw DataError(source + ": node id too large");
        out.push_back(NodeId(id));
    }
    return out;
}

json parse_json(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(source + ": invalid JSON: " + e.what());
    }
}

std::uint64_t load_u64_le(const char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | std::uint8_t(p[i]);
    return v;
}

void store_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

constexpr char kMatrixMagic[8] = {'N', 'R', 'E', 'F', 'M', 'A', 'T', '1'};

std::string matrix_file_name(const DenseMatrix& m, const std::string& stem) {
    return m.rows() * m.cols() > kBinaryMatrixThreshold ? stem + ".bin" : stem + ".csv";
}

DenseMatrix read_matrix_file(const fs::path& path) {
    const auto bytes = read_text(path);
    if (path.extension() == ".bin") return parse_matrix_bin(bytes, path.string());
    return parse_matrix_csv(bytes, path.string());
}

std::string format_matrix_file(const DenseMatrix& m, const std::string& name) {
    return name.ends_with(".bin") ? format_matrix_bin(m) : format_matrix_csv(m);
}

} // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw DataError("sha256 failed");
    }
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned i = 0; i < len; ++i) os << std::setw(2) << int(digest[i]);
    return os.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw DataError("cannot read " + path.string());
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path.string());
        out.write(text.data(), std::streamsize(text.size()));
        if (!out) throw DataError("cannot write " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw DataError("cannot write " + path.string() + ": " + ec.message());
}

EdgeList parse_edge_list(const std::string& text, const std::string& source) {
    EdgeList out;
    for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        const auto f = split_fields(line, " \t");
        if (f.size() != 2) fail_at(source, lineno, "expected 'src<TAB>dst'");
        NodeId u, v;
        if (!parse_int(f[0], u) || !parse_int(f[1], v)) fail_at(source, lineno, "invalid node id");
        out.edges.emplace_back(u, v);
        ++out.raw_count;
    });
    return out;
}

std::string format_edge_list(const Graph& g) {
    std::string out;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
        for (NodeId v : g.neighbors(u)) {
            if (v < u) continue;
            out += std::to_string(u);
            out += '\t';
            out += std::to_string(v);
            out += '\n';
        }
    }
    return out;
}

DenseMatrix parse_matrix_csv(const std::string& text, const std::string& source) {
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        const auto f = split_fields(line, ",");
        if (rows == 0) cols = f.size();
        if (f.size() != cols) {
            fail_at(source, lineno, "expected " + std::to_string(cols) + " columns, found " + std::to_string(f.size()));
        }
        for (auto field : f) {
            while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
            while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
            double x;
            if (!parse_real(field, x)) fail_at(source, lineno, "invalid number '" + std::string(field) + "'");
            if (!std::isfinite(x)) fail_at(source, lineno, "non-finite value");
            values.push_back(x);
        }
        ++rows;
    });
    return DenseMatrix(rows, cols, std::move(values));
}

std::string format_matrix_csv(const DenseMatrix& m) {
    std::string out;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out += ',';
            out += format_double(m(r, c));
        }
        out += '\n';
    }
    return out;
}

DenseMatrix parse_matrix_bin(const std::string& bytes, const std::string& source) {
    if (bytes.size() < 24 || std::memcmp(bytes.data(), kMatrixMagic, 8) != 0) {
        throw DataError(source + ": not a binary matrix file");
    }
    const auto rows = load_u64_le(bytes.data() + 8);
    const auto cols = load_u64_le(bytes.data() + 16);
    if (cols != 0 && rows > (bytes.size() / 8) / cols) throw DataError(source + ": truncated matrix");
    if (bytes.size() != 24 + rows * cols * 8) throw DataError(source + ": size does not match header");
    std::vector<double> values(rows * cols);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = load_u64_le(bytes.data() + 24 + 8 * i);
        values[i] = std::bit_cast<double>(bits);
        if (!std::isfinite(values[i])) throw DataError(source + ": non-finite value at index " + std::to_string(i));
    }
    return DenseMatrix(rows, cols, std::move(values));
}

std::string format_matrix_bin(const DenseMatrix& m) {
    std::string out(kMatrixMagic, 8);
    out.reserve(24 + 8 * m.values().size());
    store_u64_le(out, m.rows());
    store_u64_le(out, m.cols());
    for (double x : m.values()) store_u64_le(out, std::bit_cast<std::uint64_t>(x));
    return out;
}

LabelVector parse_labels(const std::string& text, std::size_t num_nodes, std::int32_t num_classes,
                         const std::string& source) {
    LabelVector y;
    y.num_classes = num_classes;
    y.labels.assign(num_nodes, kUnlabeled);
    y.known_mask.assign(num_nodes, false);
    for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        const auto f = split_fields(line, " \t");
        if (f.size() != 2) fail_at(source, lineno, "expected 'node<TAB>class'");
        NodeId v;
        std::int32_t c;
        if (!parse_int(f[0], v)) fail_at(source, lineno, "invalid node id");
        if (!parse_int(f[1], c)) fail_at(source, lineno, "invalid class");
        if (v >= num_nodes) fail_at(source, lineno, "node " + std::to_string(v) + " out of range");
        if (c < 0 || c >= num_classes) fail_at(source, lineno, "class " + std::to_string(c) + " out of range");
        if (y.labels[v] != kUnlabeled) fail_at(source, lineno, "duplicate label for node " + std::to_string(v));
        y.labels[v] = c;
    });
    return y;
}

std::string format_labels(const LabelVector& y) {
    std::string out;
    for (NodeId v = 0; v < y.size(); ++v) {
        if (!y.labeled(v)) continue;
        out += std::to_string(v);
        out += '\t';
        out += std::to_string(y.labels[v]);
        out += '\n';
    }
    return out;
}

Split parse_split(const std::string& text, const std::string& source) {
    const json j = parse_json(text, source);
    if (!j.is_object()) throw DataError(source + ": expected a JSON object");
    Split s;
    s.train = parse_id_array(j, "train", source);
    s.val = parse_id_array(j, "val", source);
    s.test = parse_id_array(j, "test", source);
    s.semi_train = parse_id_array(j, "semi_train", source);
    return s;
}

std::string format_split(const Split& s) {
    json j = json::object();
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    if (!s.semi_train.empty()) j["semi_train"] = s.semi_train;
    return j.dump() + "\n";
}

Bundle load_bundle(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    const json m = parse_json(read_text(manifest_path), manifest_path.string());
    const std::string src = manifest_path.string();
    Bundle b;
    std::size_t n = 0;
    std::int32_t num_classes = 0;
    std::size_t num_features = 0;
    std::size_t edge_count = 0;
    json files;
    json sums;
    try {
        if (m.at("format_version").get<int>() != kBundleFormatVersion) {
            throw DataError(src + ": unsupported format_version");
        }
        n = m.at("num_nodes").get<std::size_t>();
        num_classes = m.at("num_classes").get<std::int32_t>();
        num_features = m.at("num_features").get<std::size_t>();
        edge_count = m.at("num_edges").get<std::size_t>();
        files = m.at("files");
        sums = m.at("checksums");
        if (m.contains("origin")) b.origin = m.at("origin");
    } catch (const json::exception& e) {
        throw DataError(src + ": malformed manifest: " + e.what());
    }
    if (n == 0) throw DataError(src + ": num_nodes must be positive");
    if (num_classes <= 0) throw DataError(src + ": num_classes must be positive");

    auto load_file = [&](const char* role) {
        if (!files.contains(role) || !files.at(role).is_string()) {
            throw DataError(src + ": manifest lacks file '" + role + "'");
        }
        const auto name = files.at(role).get<std::string>();
        if (name.find('/') != std::string::npos || name.find('\\') != std::string::npos) {
            throw DataError(src + ": file names must be local");
        }
        const auto path = dir / name;
        auto bytes = read_text(path);
        if (!sums.contains(name) || !sums.at(name).is_string() || sums.at(name).get<std::string>() != sha256_hex(bytes)) {
            throw DataError(path.string() + ": checksum mismatch");
        }
        return std::pair{path, std::move(bytes)};
    };

    const auto [edges_path, edges_text] = load_file("edges");
    const auto el = parse_edge_list(edges_text, edges_path.string());
    for (std::size_t i = 0; i < el.edges.size(); ++i) {
        if (el.edges[i].first >= n || el.edges[i].second >= n) {
            throw DataError(edges_path.string() + ": edge " + std::to_string(i + 1) + " references a node >= " +
                            std::to_string(n));
        }
    }
    if (el.raw_count != edge_count) throw DataError(src + ": num_edges does not match the edge file");
    b.graph = build_graph(el.edges, n, true, false);
    b.raw_edge_count = el.raw_count;
    b.raw_edges = el.edges;

    const auto [feat_path, feat_bytes] = load_file("features");
    b.features = feat_path.extension() == ".bin" ? parse_matrix_bin(feat_bytes, feat_path.string())
                                                 : parse_matrix_csv(feat_bytes, feat_path.string());
    if (b.features.rows() != n || b.features.cols() != num_features) {
        throw DataError(feat_path.string() + ": shape does not match manifest");
    }

    const auto [lab_path, lab_text] = load_file("labels");
    b.labels = parse_labels(lab_text, n, num_classes, lab_path.string());

    const auto [split_path, split_text] = load_file("splits");
    b.split = parse_split(split_text, split_path.string());
    b.split.validate(n);
    for (NodeId v : b.split.train) b.labels.known_mask[v] = b.labels.labeled(v);
    for (const auto* part : {&b.split.train, &b.split.val, &b.split.test}) {
        for (NodeId v : *part) {
            if (!b.labels.labeled(v)) throw DataError(split_path.string() + ": split node " + std::to_string(v) + " has no label");
        }
    }
    b.labels.validate();
    return b;
}

nlohmann::json save_bundle(const Bundle& b, const fs::path& dir) {
    const std::size_t n = b.graph.num_nodes();
    if (b.features.rows() != n || b.labels.size() != n) throw DataError("save_bundle: inconsistent object sizes");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    std::string edges_text;
    if (b.raw_edges.empty()) {
        edges_text = format_edge_list(b.graph);
    } else {
        if (build_graph(b.raw_edges, n, true, false) != b.graph) {
            throw DataError("save_bundle: raw edge list does not match the graph");
        }
        auto sorted = b.raw_edges;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [u, v] : sorted) {
            edges_text += std::to_string(u) + '\t' + std::to_string(v) + '\n';
        }
    }
    const std::string features_name = matrix_file_name(b.features, "features");
    const std::vector<std::pair<std::string, std::string>> outputs = {
        {"edges.tsv", std::move(edges_text)},
        {features_name, format_matrix_file(b.features, features_name)},
        {"labels.tsv", format_labels(b.labels)},
        {"splits.json", format_split(b.split)},
    };
    json sums = json::object();
    for (const auto& [name, bytes] : outputs) {
        write_text(dir / name, bytes);
        sums[name] = sha256_hex(bytes);
    }
    std::size_t lines = 0;
    for (char ch : outputs[0].second) lines += ch == '\n';

    json m = json::object();
    m["format_version"] = kBundleFormatVersion;
    m["num_nodes"] = n;
    m["num_classes"] = b.labels.num_classes;
    m["num_features"] = b.features.cols();
    m["num_edges"] = lines;
    m["files"] = {{"edges", "edges.tsv"}, {"features", features_name}, {"labels", "labels.tsv"}, {"splits", "splits.json"}};
    m["checksums"] = sums;
    if (!b.origin.empty()) m["origin"] = b.origin;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
    return m;
}

std::string bundle_hash(const fs::path& dir) { return sha256_file(dir / "manifest.json"); }

InteractionSet parse_interactions(const std::string& text, InteractionFormat fmt, const std::string& source) {
    InteractionSet out;
    if (fmt == InteractionFormat::Auto) {
        // Adjacency lines hold a user followed by any number of items; TSV
        // lines have two or three fields and a third field may be fractional.
        fmt = InteractionFormat::Tsv;
        for_each_line(text, [&](std::size_t, std::string_view line) {
            const auto f = split_fields(line, " \t");
            if (f.size() > 3) fmt = InteractionFormat::Adjacency;
        });
    }
    std::size_t max_user = 0;
    std::size_t max_item = 0;
    bool any_user = false;
    for_each_line(text, [&](std::size_t lineno, std::string_view line) {
        const auto f = split_fields(line, " \t");
        NodeId u;
        if (f.empty() || !parse_int(f[0], u)) fail_at(source, lineno, "invalid user id");
        max_user = std::max<std::size_t>(max_user, u);
        any_user = true;
        if (fmt == InteractionFormat::Tsv) {
            if (f.size() < 2 || f.size() > 3) fail_at(source, lineno, "expected 'user<TAB>item[<TAB>weight]'");
            NodeId i;
            if (!parse_int(f[1], i)) fail_at(source, lineno, "invalid item id");
            double w = 1.0;
            if (f.size() == 3 && (!parse_real(f[2], w) || !(w > 0.0) || !std::isfinite(w))) {
                fail_at(source, lineno, "weight must be a positive number");
            }
            out.interactions.push_back({u, i, w});
            max_item = std::max<std::size_t>(max_item, i + std::size_t{1});
        } else {
            for (std::size_t k = 1; k < f.size(); ++k) {
                NodeId i;
                if (!parse_int(f[k], i)) fail_at(source, lineno, "invalid item id");
                out.interactions.push_back({u, i, 1.0});
                max_item = std::max<std::size_t>(max_item, i + std::size_t{1});
            }
        }
    });
    out.num_users = any_user ? max_user + 1 : 0;
    out.num_items = max_item;
    return out;
}

std::string format_interactions(std::span<const Interaction> xs) {
    std::string out;
    for (const auto& x : xs) {
        out += std::to_string(x.user);
        out += '\t';
        out += std::to_string(x.item);
        out += '\t';
        out += format_double(x.weight);
        out += '\n';
    }
    return out;
}

EmbeddingTable load_embeddings(const fs::path& header) {
    const json h = parse_json(read_text(header), header.string());
    EmbeddingTable e;
    std::string matrix_name;
    try {
        if (h.at("format").get<std::string>() != "nref-embeddings" || h.at("version").get<int>() != 1) {
            throw DataError(header.string() + ": unrecognized embedding header");
        }
        e.num_users = h.at("num_users").get<std::size_t>();
        e.num_items = h.at("num_items").get<std::size_t>();
        matrix_name = h.at("matrix").get<std::string>();
        const auto dim = h.at("dim").get<std::size_t>();
        e.values = read_matrix_file(header.parent_path() / matrix_name);
        if (e.values.cols() != dim) throw DataError(header.string() + ": dim does not match matrix");
    } catch (const json::exception& ex) {
        throw DataError(header.string() + ": malformed header: " + ex.what());
    }
    e.validate();
    return e;
}

void save_embeddings(const EmbeddingTable& e, const fs::path& header) {
    e.validate();
    const auto stem = header.stem().string();
    const auto name = matrix_file_name(e.values, stem);
    write_text(header.parent_path() / name, format_matrix_file(e.values, name));
    json h = {{"format", "nref-embeddings"}, {"version", 1},   {"num_users", e.num_users},
              {"num_items", e.num_items},    {"dim", e.dim()}, {"matrix", name}};
    write_text(header, h.dump(2) + "\n");
}

} // namespace nref

// nref: graph neighbor refinement toolkit, command-line front end.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nref/edge_model.hpp"
#include "nref/io.hpp"
#include "nref/node_clf.hpp"
#include "nref/propagate.hpp"
#include "nref/reco.hpp"
#include "nref/refine.hpp"
#include "nref/rng.hpp"
#include "nref/sim.hpp"
#include "nref/synth.hpp"

using nlohmann::json;
using namespace nref;

namespace {

json opt_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json stats_json(const RatioStats& s, const Graph& g, bool per_node) {
    double mean_node_ratio = 0.0;
    std::size_t non_isolated = 0;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        if (s.per_node_positive[v] + s.per_node_negative[v] == 0) continue;
        mean_node_ratio += s.per_node_ratio[v];
        ++non_isolated;
    }
    json j = {
        {"num_nodes", g.num_nodes()},
        {"num_undirected_edges", g.undirected_edges().size()},
        {"global_positive", s.global_positive},
        {"global_negative", s.global_negative},
        {"global_ratio", s.global_ratio},
        {"mean_node_ratio", non_isolated ? mean_node_ratio / double(non_isolated) : 0.0},
        {"isolated_nodes", g.num_nodes() - non_isolated},
    };
    if (per_node) {
        j["per_node_positive"] = s.per_node_positive;
        j["per_node_negative"] = s.per_node_negative;
        j["per_node_ratio"] = s.per_node_ratio;
    }
    return j;
}

json class_report_json(const ClassReport& r) {
    json per = json::array();
    for (const auto& a : r.per_class_accuracy) per.push_back(opt_json(a));
    return {{"accuracy", r.accuracy},
            {"per_class_accuracy", per},
            {"epochs_run", r.epochs_run},
            {"evaluated", r.evaluated}};
}

json edge_report_json(const EdgeEvalReport& r) {
    return {{"p", opt_json(r.p)},
            {"q", opt_json(r.q)},
            {"p_minus_q", r.p && r.q ? json(*r.p - *r.q) : json(nullptr)},
            {"p_pre", opt_json(r.p_pre)},
            {"accuracy", r.accuracy},
            {"tp", r.counts.tp},
            {"fp", r.counts.fp},
            {"tn", r.counts.tn},
            {"fn", r.counts.fn}};
}

json ranking_json(const RankingReport& r) {
    return {{"k", r.k},
            {"precision_at_k", r.precision_at_k},
            {"recall_at_k", r.recall_at_k},
            {"ndcg_at_k", r.ndcg_at_k},
            {"users_evaluated", r.users_evaluated}};
}

json bundle_input(const std::string& dir) {
    return {{"path", dir}, {"sha256", bundle_hash(dir)}};
}

json file_input(const std::string& path) { return {{"path", path}, {"sha256", sha256_file(path)}}; }

LabelVector full_labels(const Bundle& b) {
    return LabelVector::fully_known(b.labels.labels, b.labels.num_classes);
}

DenseMatrix node_embedding(const std::string& kind, const Graph& g, const DenseMatrix& x) {
    if (kind == "raw") return x;
    if (kind == "propagated") return parameter_free_embedding(g, x);
    throw UsageError("unknown embedding '" + kind + "' (expected propagated or raw)");
}

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double x;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw UsageError(std::string("invalid ") + what + " '" + text + "'");
        out.push_back(x);
    }
    if (out.empty()) throw UsageError(std::string("empty ") + what);
    return out;
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::fwrite(text.data(), 1, text.size(), stdout);
        std::fflush(stdout);
    } else {
        write_text(path, text);
    }
}

json report(const std::string& command, json config, json inputs, json result) {
    return {{"schema_version", kReportSchemaVersion},
            {"command", command},
            {"config", std::move(config)},
            {"inputs", std::move(inputs)},
            {"result", std::move(result)}};
}

void emit_report(const json& r, const std::string& path) { emit(r.dump(2) + "\n", path); }

// Seeds are mandatory for every command that draws random numbers.
std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, const std::string& cmd) {
    if (!seed) throw UsageError(cmd + ": --seed is required");
    return *seed;
}

struct Common {
    std::string report_path;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c, bool seeded) {
    sub->add_option("--report", c.report_path, "Write the JSON report here instead of stdout");
    if (seeded) sub->add_option("--seed", c.seed, "Random seed (required)");
}

// ---- stats -------------------------------------------------------------

struct StatsOpts {
    Common common;
    std::string bundle;
    bool per_node = false;
};

void cmd_stats(const StatsOpts& o) {
    const auto b = load_bundle(o.bundle);
    const auto s = ratio_stats(b.graph, full_labels(b));
    auto result = stats_json(s, b.graph, o.per_node);
    result["raw_edge_count"] = b.raw_edge_count;
    result["num_classes"] = b.labels.num_classes;
    result["num_features"] = b.features.cols();
    emit_report(report("stats", {{"bundle", o.bundle}, {"per_node", o.per_node}},
                       {{"bundle", bundle_input(o.bundle)}}, result),
                o.common.report_path);
}

// ---- train-edge --------------------------------------------------------

struct TrainEdgeOpts {
    Common common;
    std::string bundle;
    std::string checkpoint;
    std::string embedding = "propagated";
    EdgeTrainConfig cfg;
    std::vector<std::size_t> hidden{64};
    bool sampled_negatives_only = false;
};

json edge_config_json(const EdgeTrainConfig& c, const std::string& embedding) {
    return {{"embedding", embedding},
            {"proj_dim", c.shape.proj_dim},
            {"hidden", c.shape.hidden},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"mix_observed_negatives", c.mix_observed_negatives},
            {"standardize", c.standardize},
            {"seed", c.seed}};
}

void cmd_train_edge(TrainEdgeOpts o) {
    o.cfg.seed = require_seed(o.common.seed, "train-edge");
    o.cfg.shape.hidden = o.hidden;
    o.cfg.mix_observed_negatives = !o.sampled_negatives_only;
    const auto b = load_bundle(o.bundle);
    const auto emb = node_embedding(o.embedding, b.graph, b.features);
    std::vector<double> losses;
    auto params = train_edge_classifier(emb, b.graph, b.labels, o.cfg, &losses);
    params.embedding = o.embedding;

    // Held-out edges: pairs among validation and test nodes, never seen in training.
    std::vector<NodeId> held;
    held.insert(held.end(), b.split.val.begin(), b.split.val.end());
    held.insert(held.end(), b.split.test.begin(), b.split.test.end());
    std::sort(held.begin(), held.end());
    EdgeTrainConfig eval_cfg = o.cfg;
    eval_cfg.seed = mix64(o.cfg.seed ^ 0x5eed);
    json held_out = nullptr;
    try {
        const auto eval_set = build_edge_samples(b.graph, full_labels(b), held, eval_cfg);
        held_out = edge_report_json(evaluate_edge_classifier(params, eval_set.samples, emb));
        held_out["samples"] = eval_set.samples.size();
        held_out["observed_edges"] = eval_set.positives + eval_set.observed_negatives;
    } catch (const DataError&) {
        held_out = nullptr;  // no labeled held-out edges
    }
    const auto train_set = build_edge_samples(b.graph, b.labels, b.split.train, o.cfg);
    json train = edge_report_json(evaluate_edge_classifier(params, train_set.samples, emb));

    write_text(o.checkpoint, edge_params_to_json(params) + "\n");
    json result = {{"train", train},
                   {"held_out", held_out},
                   {"train_samples", train_set.samples.size()},
                   {"initial_loss", losses.front()},
                   {"final_loss", losses.back()},
                   {"checkpoint", file_input(o.checkpoint)}};
    auto config = edge_config_json(o.cfg, o.embedding);
    config["bundle"] = o.bundle;
    config["checkpoint"] = o.checkpoint;
    emit_report(report("train-edge", config, {{"bundle", bundle_input(o.bundle)}}, result), o.common.report_path);
}

// ---- refine ------------------------------------------------------------

struct RefineOpts {
    Common common;
    std::string bundle;
    std::string out;
    std::string checkpoint;
    std::string oracle;
    bool filter_only = false;
    bool add_only = false;
    RefineConfig cfg;
};

void cmd_refine(RefineOpts o) {
    const auto seed = require_seed(o.common.seed, "refine");
    if (o.checkpoint.empty() == o.oracle.empty()) {
        throw UsageError("refine: give exactly one of --checkpoint or --oracle");
    }
    if (o.filter_only && o.add_only) throw UsageError("refine: --filter-only and --add-only are exclusive");
    o.cfg.do_filter = !o.add_only;
    o.cfg.do_add = !o.filter_only;
    o.cfg.validate();

    auto b = load_bundle(o.bundle);
    const auto truth = full_labels(b);
    json inputs = {{"bundle", bundle_input(o.bundle)}};
    json scorer_cfg;
    PairScorer scorer;
    if (!o.checkpoint.empty()) {
        auto params = edge_params_from_json(read_text(o.checkpoint));
        const auto emb = node_embedding(params.embedding, b.graph, b.features);
        scorer = EdgeScorer(params, emb);
        inputs["checkpoint"] = file_input(o.checkpoint);
        scorer_cfg = {{"checkpoint", o.checkpoint}, {"embedding", params.embedding}};
    } else {
        const auto pq = parse_list(o.oracle, "oracle rates");
        if (pq.size() != 2) throw UsageError("refine: --oracle expects 'p,q'");
        scorer = make_noisy_oracle(truth, pq[0], pq[1], seed);
        scorer_cfg = {{"oracle", {{"p", pq[0]}, {"q", pq[1]}}}};
    }

    const auto before = ratio_stats(b.graph, truth);
    RefineTrace trace;
    const Graph refined = enhance(b.graph, scorer, o.cfg, &trace);
    const auto after = ratio_stats(refined, truth);

    Bundle nb = b;
    nb.graph = refined;
    nb.raw_edges.clear();
    nb.origin = {{"refined_from", bundle_hash(o.bundle)}};
    save_bundle(nb, o.out);

    json config = {{"bundle", o.bundle},     {"out", o.out},
                   {"seed", seed},           {"filter", o.cfg.do_filter},
                   {"add", o.cfg.do_add},    {"n_max", o.cfg.n_max},
                   {"threshold", o.cfg.threshold}, {"scorer", scorer_cfg}};
    json result = {{"before", stats_json(before, b.graph, false)},
                   {"after", stats_json(after, refined, false)},
                   {"filter_scored", trace.filter_scored},
                   {"filter_removed", trace.filter_removed},
                   {"add_scored", trace.add_scored},
                   {"add_added", trace.add_added},
                   {"output", bundle_input(o.out)}};
    emit_report(report("refine", config, inputs, result), o.common.report_path);
}

// ---- train-clf ---------------------------------------------------------

struct TrainClfOpts {
    Common common;
    std::string bundle;
    std::string refined;
    bool semi = false;
    SgcConfig cfg;
};

void cmd_train_clf(TrainClfOpts o) {
    o.cfg.seed = require_seed(o.common.seed, "train-clf");
    const auto b = load_bundle(o.bundle);
    json inputs = {{"bundle", bundle_input(o.bundle)}};
    json config = {{"bundle", o.bundle},
                   {"k", o.cfg.k},
                   {"epochs", o.cfg.epochs},
                   {"learning_rate", o.cfg.learning_rate},
                   {"momentum", o.cfg.momentum},
                   {"weight_decay", o.cfg.weight_decay},
                   {"patience", o.cfg.patience},
                   {"normalize_features", o.cfg.normalize_features},
                   {"semi_supervised", o.semi},
                   {"seed", o.cfg.seed}};
    json result;
    if (o.refined.empty()) {
        const auto model = train_sgc(b.graph, b.features, b.labels, b.split, o.cfg, o.semi);
        result["origin"] = class_report_json(evaluate(model, b.graph, b.features, b.labels, b.split.test));
        result["origin"]["epochs_run"] = model.epochs_run;
    } else {
        const auto r = load_bundle(o.refined);
        if (!(r.features == b.features) || r.labels.labels != b.labels.labels ||
            r.split.train != b.split.train || r.split.val != b.split.val || r.split.test != b.split.test) {
            throw DataError("train-clf: refined bundle must share features, labels and splits with the original");
        }
        inputs["refined"] = bundle_input(o.refined);
        config["refined"] = o.refined;
        const auto cmp = compare_origin_vs_ne(b.graph, r.graph, b.features, b.labels, b.split, o.cfg, o.semi);
        result["origin"] = class_report_json(cmp.origin);
        result["refined"] = class_report_json(cmp.refined);
        result["delta"] = cmp.delta;
    }
    emit_report(report("train-clf", config, inputs, result), o.common.report_path);
}

// ---- degrade -----------------------------------------------------------

struct DegradeOpts {
    Common common;
    std::string bundle;
    std::string out;
    std::size_t per_node = 5;
};

void cmd_degrade(const DegradeOpts& o) {
    const auto seed = require_seed(o.common.seed, "degrade");
    auto b = load_bundle(o.bundle);
    const auto truth = full_labels(b);
    const auto before = ratio_stats(b.graph, truth);
    const Graph g = degrade_graph(b.graph, truth, o.per_node, seed);
    const auto after = ratio_stats(g, truth);
    Bundle nb = b;
    nb.graph = g;
    nb.raw_edges.clear();
    nb.origin = {{"degraded_from", bundle_hash(o.bundle)}, {"per_node", o.per_node}, {"seed", seed}};
    save_bundle(nb, o.out);
    emit_report(report("degrade", {{"bundle", o.bundle}, {"out", o.out}, {"per_node", o.per_node}, {"seed", seed}},
                       {{"bundle", bundle_input(o.bundle)}},
                       {{"before", stats_json(before, b.graph, false)},
                        {"after", stats_json(after, g, false)},
                        {"output", bundle_input(o.out)}}),
                o.common.report_path);
}

// ---- synth -------------------------------------------------------------

json synth_spec_json(const SynthSpec& s) {
    return {{"num_nodes", s.num_nodes},         {"num_classes", s.num_classes},
            {"target_ratio", s.target_ratio},   {"mean_degree", s.mean_degree},
            {"feature_dim", s.feature_dim},     {"class_separation", s.class_separation},
            {"seed", s.seed}};
}

void add_synth_options(CLI::App* sub, SynthSpec& s) {
    sub->add_option("--nodes", s.num_nodes, "Number of nodes")->capture_default_str();
    sub->add_option("--classes", s.num_classes, "Number of classes")->capture_default_str();
    sub->add_option("--ratio", s.target_ratio, "Target positive ratio")->capture_default_str();
    sub->add_option("--degree", s.mean_degree, "Expected non-self degree")->capture_default_str();
    sub->add_option("--features", s.feature_dim, "Feature dimension")->capture_default_str();
    sub->add_option("--separation", s.class_separation, "Distance between class means")->capture_default_str();
}

struct SynthOpts {
    Common common;
    std::string out;
    SynthSpec spec;
};

void cmd_synth(SynthOpts o) {
    o.spec.seed = require_seed(o.common.seed, "synth");
    auto data = generate_labeled_graph(o.spec);
    Bundle b;
    b.graph = std::move(data.graph);
    b.features = std::move(data.features);
    b.labels = std::move(data.labels);
    b.split = std::move(data.split);
    b.origin = {{"generator", "synth"}, {"spec", synth_spec_json(o.spec)}};
    save_bundle(b, o.out);
    const auto s = ratio_stats(b.graph, full_labels(b));
    auto config = synth_spec_json(o.spec);
    config["out"] = o.out;
    emit_report(report("synth", config, json::object(),
                       {{"stats", stats_json(s, b.graph, false)}, {"output", bundle_input(o.out)}}),
                o.common.report_path);
}

// ---- synth-reco --------------------------------------------------------

struct SynthRecoOpts {
    Common common;
    std::string out;
    BipartiteSpec spec;
};

void cmd_synth_reco(SynthRecoOpts o) {
    o.spec.seed = require_seed(o.common.seed, "synth-reco");
    const auto data = generate_bipartite(o.spec);
    const fs::path dir = o.out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "train.tsv", format_interactions(data.train));
    write_text(dir / "test.tsv", format_interactions(data.test));
    save_embeddings(data.embeddings, dir / "embeddings.json");
    json config = {{"out", o.out},
                   {"num_users", o.spec.num_users},
                   {"num_items", o.spec.num_items},
                   {"groups", o.spec.groups},
                   {"noise", o.spec.noise},
                   {"interactions_per_user", o.spec.interactions_per_user},
                   {"dim", o.spec.dim},
                   {"embedding_noise", o.spec.embedding_noise},
                   {"in_group_weight", o.spec.in_group_weight},
                   {"cross_group_weight", o.spec.cross_group_weight},
                   {"seed", o.spec.seed}};
    json result = {{"train_interactions", data.train.size()},
                   {"test_interactions", data.test.size()},
                   {"files",
                    {{"train", file_input((dir / "train.tsv").string())},
                     {"test", file_input((dir / "test.tsv").string())},
                     {"embeddings", file_input((dir / "embeddings.json").string())}}}};
    emit_report(report("synth-reco", config, json::object(), result), o.common.report_path);
}

// ---- reco --------------------------------------------------------------

struct RecoOpts {
    Common common;
    std::string train;
    std::string test;
    std::string tune;
    std::string embeddings;
    std::string policy = "negcn";
    std::string format = "auto";
    std::size_t k = 20;
    std::size_t neighbors = 3;
    double alpha = 0.5;
    RandomWalkConfig rw;
};

InteractionFormat parse_format(const std::string& f) {
    if (f == "tsv") return InteractionFormat::Tsv;
    if (f == "adjacency") return InteractionFormat::Adjacency;
    if (f == "auto") return InteractionFormat::Auto;
    throw UsageError("unknown interaction format '" + f + "'");
}

void cmd_reco(const RecoOpts& o) {
    const auto seed = require_seed(o.common.seed, "reco");
    const auto policy = parse_policy(o.policy);
    if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) throw UsageError("reco: --alpha must lie in [0, 1]");
    const auto fmt = parse_format(o.format);
    const auto e = load_embeddings(o.embeddings);
    const auto train = parse_interactions(read_text(o.train), fmt, o.train);
    const auto test = parse_interactions(read_text(o.test), fmt, o.test);
    const auto g = build_bipartite(train.interactions, e.num_users, e.num_items);
    const auto sel = select_neighbors(g, e, policy, o.neighbors, seed, o.rw);

    json inputs = {{"train", file_input(o.train)}, {"test", file_input(o.test)},
                   {"embeddings", file_input(o.embeddings)}};
    double alpha = o.alpha;
    if (!o.tune.empty()) {
        const auto tune = parse_interactions(read_text(o.tune), fmt, o.tune);
        const std::vector<double> grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        alpha = tune_alpha(e, sel, g, tune.interactions, grid, o.k);
        inputs["tune"] = file_input(o.tune);
    }
    const auto score = aggregate_and_score(e, sel, alpha);
    auto result = ranking_json(rank_and_evaluate(score, g, test.interactions, o.k));
    result["alpha"] = alpha;
    result["train_interactions"] = g.num_interactions();
    json config = {{"train", o.train},         {"test", o.test},          {"tune", o.tune},
                   {"embeddings", o.embeddings}, {"policy", to_string(policy)}, {"format", o.format},
                   {"k", o.k},                 {"neighbors", o.neighbors}, {"alpha", o.alpha},
                   {"walks", o.rw.walks},      {"walk_length", o.rw.length}, {"seed", seed}};
    emit_report(report("reco", config, inputs, result), o.common.report_path);
}

// ---- simulate ----------------------------------------------------------

struct SimulateOpts {
    Common common;
    std::string mode = "filter";
    std::string grid;
    bool absolute = false;
    std::string csv_path;
    CrossoverSpec spec;
};

void cmd_simulate(SimulateOpts o) {
    o.spec.seed = require_seed(o.common.seed, "simulate");
    const auto mode = parse_sim_mode(o.mode);
    std::vector<double> grid;
    if (!o.grid.empty()) {
        grid = parse_list(o.grid, "grid");
    } else if (mode == SimMode::Filter) {
        grid = {-0.3, -0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2, 0.3};
    } else {
        grid = {-0.3, -0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2};
    }
    const bool relative = mode == SimMode::Add && !o.absolute;
    const auto points = run_crossover(o.spec, mode, grid, relative);
    const auto csv = sim_points_csv(points);
    emit(csv, o.csv_path);
    if (!o.common.report_path.empty()) {
        json rows = json::array();
        for (const auto& p : points) {
            rows.push_back({{"target", p.target}, {"p", p.p}, {"q", p.q}, {"p_pre", p.p_pre},
                            {"R", p.ratio_origin}, {"R_ne", p.ratio_ne}, {"origin_acc", p.origin_acc},
                            {"ne_acc", p.ne_acc}, {"delta", p.delta}, {"per_repeat_delta", p.deltas}});
        }
        auto config = synth_spec_json(o.spec.synth);
        config.erase("seed");
        config.update({{"mode", o.mode}, {"grid", grid}, {"targets_relative_to_R", relative},
                       {"n_max", o.spec.n_max}, {"repeats", o.spec.repeats}, {"k", o.spec.sgc.k},
                       {"seed", o.spec.seed}});
        write_text(o.common.report_path,
                   report("simulate", config, json::object(), {{"points", rows}}).dump(2) + "\n");
    }
}

// ---- import-citation ---------------------------------------------------

struct ImportOpts {
    Common common;
    std::string content;
    std::string cites;
    std::string out;
    std::size_t per_class = 20;
};

// <id> <f_1> ... <f_F> <class> per line in the content file; <cited> <citing>
// per line in the cites file. Ids are arbitrary tokens.
void cmd_import_citation(const ImportOpts& o) {
    const auto seed = require_seed(o.common.seed, "import-citation");
    const auto content = read_text(o.content);
    std::map<std::string, NodeId> ids;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> class_names;
    std::istringstream in(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> f;
        for (std::string t; ls >> t;) f.push_back(t);
        if (f.empty()) continue;
        if (f.size() < 3) throw DataError(o.content + ":" + std::to_string(lineno) + ": too few fields");
        if (!rows.empty() && f.size() - 2 != rows.front().size()) {
            throw DataError(o.content + ":" + std::to_string(lineno) + ": feature count differs");
        }
        if (!ids.emplace(f[0], NodeId(rows.size())).second) {
            throw DataError(o.content + ":" + std::to_string(lineno) + ": duplicate id " + f[0]);
        }
        std::vector<double> row;
        for (std::size_t i = 1; i + 1 < f.size(); ++i) {
            try {
                row.push_back(std::stod(f[i]));
            } catch (const std::exception&) {
                throw DataError(o.content + ":" + std::to_string(lineno) + ": invalid feature value");
            }
        }
        rows.push_back(std::move(row));
        class_names.push_back(f.back());
    }
    if (rows.empty()) throw DataError(o.content + ": no nodes");
    std::vector<std::string> classes = class_names;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    Bundle b;
    const std::size_t n = rows.size();
    b.features = DenseMatrix(n, rows.front().size());
    std::vector<std::int32_t> labels(n);
    for (NodeId v = 0; v < n; ++v) {
        std::copy(rows[v].begin(), rows[v].end(), b.features.row(v).begin());
        labels[v] = std::int32_t(std::lower_bound(classes.begin(), classes.end(), class_names[v]) - classes.begin());
    }

    std::istringstream cin_(read_text(o.cites));
    lineno = 0;
    std::size_t dropped = 0;
    while (std::getline(cin_, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string a, c;
        if (!(ls >> a)) continue;
        if (!(ls >> c)) throw DataError(o.cites + ":" + std::to_string(lineno) + ": expected two ids");
        const auto ia = ids.find(a);
        const auto ic = ids.find(c);
        if (ia == ids.end() || ic == ids.end()) {
            ++dropped;
            continue;
        }
        // Stored citing -> cited.
        b.raw_edges.emplace_back(ic->second, ia->second);
    }
    b.graph = build_graph(b.raw_edges, n, true, false);
    b.raw_edge_count = b.raw_edges.size();

    Rng rng(seed);
    std::vector<NodeId> order(n);
    for (NodeId v = 0; v < n; ++v) order[v] = v;
    rng.shuffle(order.begin(), order.end());
    const std::size_t n_train = n * 6 / 10;
    const std::size_t n_val = n * 2 / 10;
    b.split.train.assign(order.begin(), order.begin() + std::ptrdiff_t(n_train));
    b.split.val.assign(order.begin() + std::ptrdiff_t(n_train), order.begin() + std::ptrdiff_t(n_train + n_val));
    b.split.test.assign(order.begin() + std::ptrdiff_t(n_train + n_val), order.end());
    std::vector<std::size_t> taken(classes.size(), 0);
    for (NodeId v : b.split.train) {
        if (taken[std::size_t(labels[v])]++ < o.per_class) b.split.semi_train.push_back(v);
    }
    for (auto* part : {&b.split.train, &b.split.val, &b.split.test, &b.split.semi_train}) {
        std::sort(part->begin(), part->end());
    }
    b.labels = LabelVector::fully_known(std::move(labels), std::int32_t(classes.size()));
    b.origin = {{"generator", "import-citation"}, {"classes", classes}, {"seed", seed}};
    save_bundle(b, o.out);
    emit_report(report("import-citation",
                       {{"content", o.content}, {"cites", o.cites}, {"out", o.out}, {"per_class", o.per_class},
                        {"seed", seed}},
                       {{"content", file_input(o.content)}, {"cites", file_input(o.cites)}},
                       {{"num_nodes", n},
                        {"num_features", b.features.cols()},
                        {"num_classes", classes.size()},
                        {"raw_edge_count", b.raw_edge_count},
                        {"dropped_citations", dropped},
                        {"output", bundle_input(o.out)}}),
                o.common.report_path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nref: neighbor refinement for graph learning"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    StatsOpts stats;
    auto* s_stats = app.add_subcommand("stats", "Positive/negative neighbor statistics of a bundle");
    s_stats->add_option("--bundle", stats.bundle, "Bundle directory")->required();
    s_stats->add_flag("--per-node", stats.per_node, "Include per-node arrays");
    add_common(s_stats, stats.common, false);

    TrainEdgeOpts te;
    auto* s_te = app.add_subcommand("train-edge", "Train the pairwise edge classifier");
    s_te->add_option("--bundle", te.bundle, "Bundle directory")->required();
    s_te->add_option("--checkpoint", te.checkpoint, "Output checkpoint (JSON)")->required();
    s_te->add_option("--embedding", te.embedding, "propagated (A_hat^2 X) or raw (X)")->capture_default_str();
    s_te->add_option("--epochs", te.cfg.epochs, "Training epochs")->capture_default_str();
    s_te->add_option("--batch-size", te.cfg.batch_size, "Mini-batch size")->capture_default_str();
    s_te->add_option("--lr", te.cfg.learning_rate, "Learning rate")->capture_default_str();
    s_te->add_option("--momentum", te.cfg.momentum, "Momentum")->capture_default_str();
    s_te->add_option("--weight-decay", te.cfg.weight_decay, "L2 penalty on weights")->capture_default_str();
    s_te->add_option("--proj-dim", te.cfg.shape.proj_dim, "Projection width")->capture_default_str();
    s_te->add_option("--hidden", te.hidden, "Hidden layer widths")->capture_default_str();
    s_te->add_flag("--sampled-negatives-only", te.sampled_negatives_only,
                   "Draw every negative at random instead of keeping observed different-label edges");
    add_common(s_te, te.common, true);

    RefineOpts rf;
    auto* s_rf = app.add_subcommand("refine", "Filter and add neighbors, write the refined bundle");
    s_rf->add_option("--bundle", rf.bundle, "Bundle directory")->required();
    s_rf->add_option("--out", rf.out, "Output bundle directory")->required();
    s_rf->add_option("--checkpoint", rf.checkpoint, "Edge classifier checkpoint");
    s_rf->add_option("--oracle", rf.oracle, "Noisy label oracle 'p,q' instead of a classifier");
    s_rf->add_flag("--filter-only", rf.filter_only, "Skip the adding step");
    s_rf->add_flag("--add-only", rf.add_only, "Skip the filtering step");
    s_rf->add_option("--n-max", rf.cfg.n_max, "Target non-self degree when adding")->capture_default_str();
    s_rf->add_option("--threshold", rf.cfg.threshold, "Score threshold")->capture_default_str();
    add_common(s_rf, rf.common, true);

    TrainClfOpts tc;
    auto* s_tc = app.add_subcommand("train-clf", "Train and evaluate SGC, optionally against a refined graph");
    s_tc->add_option("--bundle", tc.bundle, "Bundle directory")->required();
    s_tc->add_option("--refined", tc.refined, "Refined bundle to compare against");
    s_tc->add_flag("--semi", tc.semi, "Train on the semi_train split");
    s_tc->add_option("--k", tc.cfg.k, "Propagation steps")->capture_default_str();
    s_tc->add_option("--epochs", tc.cfg.epochs, "Maximum epochs")->capture_default_str();
    s_tc->add_option("--lr", tc.cfg.learning_rate, "Learning rate")->capture_default_str();
    s_tc->add_option("--momentum", tc.cfg.momentum, "Momentum")->capture_default_str();
    s_tc->add_option("--weight-decay", tc.cfg.weight_decay, "L2 penalty")->capture_default_str();
    s_tc->add_option("--patience", tc.cfg.patience, "Early-stopping patience")->capture_default_str();
    add_common(s_tc, tc.common, true);

    DegradeOpts dg;
    auto* s_dg = app.add_subcommand("degrade", "Add different-label neighbors to every node");
    s_dg->add_option("--bundle", dg.bundle, "Bundle directory")->required();
    s_dg->add_option("--out", dg.out, "Output bundle directory")->required();
    s_dg->add_option("--per-node", dg.per_node, "Edges added per node")->capture_default_str();
    add_common(s_dg, dg.common, true);

    SimulateOpts sm;
    sm.spec.synth.num_nodes = 2000;
    sm.spec.synth.num_classes = 2;
    sm.spec.synth.target_ratio = 0.7;
    sm.spec.synth.mean_degree = 6.0;
    sm.spec.synth.feature_dim = 16;
    sm.spec.synth.class_separation = 2.5;
    sm.spec.n_max = 12;
    auto* s_sm = app.add_subcommand("simulate", "Crossover grid with a noisy oracle on synthetic graphs (CSV)");
    s_sm->add_option("--mode", sm.mode, "filter (grid over p - q) or add (grid over p_pre)")->capture_default_str();
    s_sm->add_option("--grid", sm.grid, "Comma-separated targets; add mode offsets them by R unless --absolute");
    s_sm->add_flag("--absolute", sm.absolute, "Add-mode targets are absolute p_pre values");
    s_sm->add_option("--repeats", sm.spec.repeats, "Graphs per grid cell")->capture_default_str();
    s_sm->add_option("--n-max", sm.spec.n_max, "Target degree when adding")->capture_default_str();
    s_sm->add_option("--k", sm.spec.sgc.k, "SGC propagation steps")->capture_default_str();
    s_sm->add_option("--jobs", sm.spec.jobs, "Worker threads over repeats")->capture_default_str();
    s_sm->add_option("--out", sm.csv_path, "Write the CSV here instead of stdout");
    add_synth_options(s_sm, sm.spec.synth);
    add_common(s_sm, sm.common, true);

    RecoOpts rc;
    auto* s_rc = app.add_subcommand("reco", "Neighbor sampling + ranking evaluation on interactions");
    s_rc->add_option("--train", rc.train, "Training interactions")->required();
    s_rc->add_option("--test", rc.test, "Test interactions")->required();
    s_rc->add_option("--embeddings", rc.embeddings, "Embedding header (JSON)")->required();
    s_rc->add_option("--tune", rc.tune, "Interactions used to pick alpha");
    s_rc->add_option("--policy", rc.policy, "random-walk, intuitive or negcn")->capture_default_str();
    s_rc->add_option("--format", rc.format, "tsv, adjacency or auto")->capture_default_str();
    s_rc->add_option("--k", rc.k, "Ranking cutoff")->capture_default_str();
    s_rc->add_option("--neighbors", rc.neighbors, "Neighbors kept per node")->capture_default_str();
    s_rc->add_option("--alpha", rc.alpha, "Weight of a node's own embedding")->capture_default_str();
    s_rc->add_option("--walks", rc.rw.walks, "Random walks per node")->capture_default_str();
    s_rc->add_option("--walk-length", rc.rw.length, "Steps per walk")->capture_default_str();
    add_common(s_rc, rc.common, true);

    SynthOpts sy;
    auto* s_sy = app.add_subcommand("synth", "Generate a labeled graph bundle");
    s_sy->add_option("--out", sy.out, "Output bundle directory")->required();
    add_synth_options(s_sy, sy.spec);
    add_common(s_sy, sy.common, true);

    SynthRecoOpts sr;
    auto* s_sr = app.add_subcommand("synth-reco", "Generate planted-group interactions and embeddings");
    s_sr->add_option("--out", sr.out, "Output directory")->required();
    s_sr->add_option("--users", sr.spec.num_users, "Users")->capture_default_str();
    s_sr->add_option("--items", sr.spec.num_items, "Items")->capture_default_str();
    s_sr->add_option("--groups", sr.spec.groups, "Latent groups")->capture_default_str();
    s_sr->add_option("--noise", sr.spec.noise, "Cross-group interaction rate")->capture_default_str();
    s_sr->add_option("--per-user", sr.spec.interactions_per_user, "Mean interactions per user")->capture_default_str();
    s_sr->add_option("--dim", sr.spec.dim, "Embedding width")->capture_default_str();
    s_sr->add_option("--embedding-noise", sr.spec.embedding_noise, "Embedding perturbation")->capture_default_str();
    add_common(s_sr, sr.common, true);

    ImportOpts im;
    auto* s_im = app.add_subcommand("import-citation", "Convert a citation dataset (.content/.cites) to a bundle");
    s_im->add_option("--content", im.content, "Node file: id, features, class")->required();
    s_im->add_option("--cites", im.cites, "Edge file: cited id, citing id")->required();
    s_im->add_option("--out", im.out, "Output bundle directory")->required();
    s_im->add_option("--per-class", im.per_class, "Semi-supervised labels per class")->capture_default_str();
    add_common(s_im, im.common, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (s_stats->parsed()) cmd_stats(stats);
        else if (s_te->parsed()) cmd_train_edge(te);
        else if (s_rf->parsed()) cmd_refine(rf);
        else if (s_tc->parsed()) cmd_train_clf(tc);
        else if (s_dg->parsed()) cmd_degrade(dg);
        else if (s_sm->parsed()) cmd_simulate(sm);
        else if (s_rc->parsed()) cmd_reco(rc);
        else if (s_sy->parsed()) cmd_synth(sy);
        else if (s_sr->parsed()) cmd_synth_reco(sr);
        else if (s_im->parsed()) cmd_import_citation(im);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

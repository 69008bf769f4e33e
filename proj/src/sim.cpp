#include "nref/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <thread>

#include "nref/io.hpp"
#include "nref/refine.hpp"
#include "nref/rng.hpp"

namespace nref {

std::string to_string(SimMode m) { return m == SimMode::Filter ? "filter" : "add"; }

SimMode parse_sim_mode(const std::string& s) {
    if (s == "filter") return SimMode::Filter;
    if (s == "add") return SimMode::Add;
    throw UsageError("unknown simulation mode '" + s + "' (expected filter or add)");
}

std::pair<double, double> one_sided_rates(double d) {
    if (!(d >= -1.0 && d <= 1.0)) throw UsageError("p - q must lie in [-1, 1]");
    return d >= 0.0 ? std::pair{1.0, 1.0 - d} : std::pair{1.0 + d, 1.0};
}

std::pair<double, double> rates_for_precision(double p_pre, double base_rate) {
    if (!(p_pre > 0.0 && p_pre < 1.0)) throw UsageError("p_pre must lie in (0, 1)");
    if (!(base_rate > 0.0 && base_rate < 1.0)) throw DataError("candidate base rate must lie in (0, 1)");
    // p_pre = p b / (p b + q (1 - b))
    const double odds = (p_pre / (1.0 - p_pre)) * ((1.0 - base_rate) / base_rate);
    return odds >= 1.0 ? std::pair{1.0, 1.0 / odds} : std::pair{odds, 1.0};
}

double candidate_base_rate(const Graph& g, const LabelVector& y, std::size_t n_max) {
    std::uint64_t same = 0;
    std::uint64_t total = 0;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        if (g.non_self_degree(v) >= n_max) continue;
        for (NodeId w : two_hop_candidates(g, v)) {
            ++total;
            same += y.labels[v] == y.labels[w];
        }
    }
    if (total == 0) throw DataError("no 2-hop candidates");
    return double(same) / double(total);
}

namespace {

struct RepeatResult {
    double origin_acc = 0.0;
    double ratio_origin = 0.0;
    std::vector<double> p, q, p_pre, ratio_ne, ne_acc;
};

RepeatResult run_repeat(const CrossoverSpec& spec, SimMode mode, std::span<const double> targets,
                        bool relative, std::size_t r) {
    SynthSpec synth = spec.synth;
    synth.seed = mix64(spec.seed ^ mix64(r));
    const auto data = generate_labeled_graph(synth);
    const auto truth = LabelVector::fully_known(data.labels.labels, data.labels.num_classes);

    SgcConfig sgc = spec.sgc;
    sgc.seed = synth.seed;
    RepeatResult out;
    const auto origin = train_sgc(data.graph, data.features, data.labels, data.split, sgc);
    out.origin_acc = evaluate(origin, data.graph, data.features, data.labels, data.split.test).accuracy;
    const auto before = ratio_stats(data.graph, truth);
    out.ratio_origin = before.global_ratio;

    RefineConfig rc;
    rc.do_filter = mode == SimMode::Filter;
    rc.do_add = mode == SimMode::Add;
    rc.n_max = spec.n_max;
    const double base = mode == SimMode::Add ? candidate_base_rate(data.graph, truth, spec.n_max) : 0.0;

    for (std::size_t t = 0; t < targets.size(); ++t) {
        double target = targets[t];
        if (relative) target += before.global_ratio;
        const auto [p, q] = mode == SimMode::Filter ? one_sided_rates(target)
                                                    : rates_for_precision(std::clamp(target, 1e-6, 1.0 - 1e-6), base);
        const auto oracle = make_noisy_oracle(truth, p, q, mix64(synth.seed + 1 + t));
        const Graph ne = enhance(data.graph, oracle, rc);
        const auto after = ratio_stats(ne, truth);

        // Precision of the decisions that changed the graph.
        double precision = 0.0;
        if (mode == SimMode::Add) {
            const auto dp = double(after.global_positive - before.global_positive);
            const auto dn = double(after.global_negative - before.global_negative);
            precision = dp + dn > 0.0 ? dp / (dp + dn) : 0.0;
        } else {
            const auto kp = double(after.global_positive);
            const auto kn = double(after.global_negative);
            precision = kp + kn > 0.0 ? kp / (kp + kn) : 0.0;
        }
        const auto model = train_sgc(ne, data.features, data.labels, data.split, sgc);
        out.p.push_back(p);
        out.q.push_back(q);
        out.p_pre.push_back(precision);
        out.ratio_ne.push_back(after.global_ratio);
        out.ne_acc.push_back(evaluate(model, ne, data.features, data.labels, data.split.test).accuracy);
    }
    return out;
}

} // namespace

std::vector<SimPoint> run_crossover(const CrossoverSpec& spec, SimMode mode, std::span<const double> targets,
                                    bool relative_to_ratio) {
    if (spec.repeats == 0) throw UsageError("simulate: repeats must be positive");
    if (targets.empty()) throw UsageError("simulate: empty grid");
    std::vector<RepeatResult> results(spec.repeats);
    std::vector<std::exception_ptr> errors(spec.repeats);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r; (r = next++) < spec.repeats;) {
            try {
                results[r] = run_repeat(spec, mode, targets, relative_to_ratio, r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(spec.jobs, 1, spec.repeats);
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    const double inv = 1.0 / double(spec.repeats);
    std::vector<SimPoint> out(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        auto& pt = out[t];
        pt.mode = mode;
        pt.target = targets[t];
        for (const auto& r : results) {
            pt.p += inv * r.p[t];
            pt.q += inv * r.q[t];
            pt.p_pre += inv * r.p_pre[t];
            pt.ratio_origin += inv * r.ratio_origin;
            pt.ratio_ne += inv * r.ratio_ne[t];
            pt.origin_acc += inv * r.origin_acc;
            pt.ne_acc += inv * r.ne_acc[t];
            pt.deltas.push_back(r.ne_acc[t] - r.origin_acc);
        }
        pt.delta = pt.ne_acc - pt.origin_acc;
    }
    return out;
}

std::string sim_points_csv(std::span<const SimPoint> points) {
    std::string out = "mode,target,p,q,p_pre,R,R_ne,origin_acc,ne_acc,delta\n";
    for (const auto& pt : points) {
        out += to_string(pt.mode);
        for (double x : {pt.target, pt.p, pt.q, pt.p_pre, pt.ratio_origin, pt.ratio_ne, pt.origin_acc, pt.ne_acc,
                         pt.delta}) {
            out += ',';
            out += format_double(x);
        }
        out += '\n';
    }
    return out;
}

} // namespace nref

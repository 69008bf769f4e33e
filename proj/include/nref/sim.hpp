#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nref/graph.hpp"
#include "nref/node_clf.hpp"
#include "nref/synth.hpp"

namespace nref {

enum class SimMode { Filter, Add };

std::string to_string(SimMode m);
SimMode parse_sim_mode(const std::string& s);

/// (p, q) with p - q = d and one of the two rates pinned at 1, so the
/// oracle only ever errs in one direction. d = 0 leaves the graph unchanged.
std::pair<double, double> one_sided_rates(double d);

/// (p, q) whose precision on a candidate pool with same-label base rate
/// `base_rate` equals p_pre, again with one rate pinned at 1.
std::pair<double, double> rates_for_precision(double p_pre, double base_rate);

/// Fraction of same-label pairs among the 2-hop candidates of nodes whose
/// non-self degree is below n_max.
double candidate_base_rate(const Graph& g, const LabelVector& y, std::size_t n_max);

struct CrossoverSpec {
    SynthSpec synth;
    SgcConfig sgc;
    std::size_t n_max = 6;
    std::size_t repeats = 5;
    std::uint64_t seed = 0;
    /// Worker threads over repeats; results do not depend on it.
    std::size_t jobs = 1;
};

/// One grid cell averaged over repeats.
struct SimPoint {
    SimMode mode = SimMode::Filter;
    double target = 0.0;         // p - q (filter) or p_pre (add)
    double p = 0.0;              // mean oracle rates used
    double q = 0.0;
    double p_pre = 0.0;          // realized precision of removed-or-added decisions
    double ratio_origin = 0.0;
    double ratio_ne = 0.0;
    double origin_acc = 0.0;
    double ne_acc = 0.0;
    double delta = 0.0;          // ne_acc - origin_acc
    std::vector<double> deltas;  // per repeat
};

/// For every repeat, generates a graph, trains SGC on it, then for every
/// target rewires with a noisy oracle (filter only or add only) and retrains
/// with the same config. Add-mode targets are offsets from the graph's
/// measured global ratio when `relative_to_ratio` is set.
std::vector<SimPoint> run_crossover(const CrossoverSpec& spec, SimMode mode,
                                    std::span<const double> targets, bool relative_to_ratio = false);

std::string sim_points_csv(std::span<const SimPoint> points);

} // namespace nref

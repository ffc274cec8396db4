#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "levy_core.hpp"
#include "parallel.hpp"
#include "path_sim.hpp"
#include "rng.hpp"

namespace sptree {

// One sigma^(i): coalescence depth plus sorted mutation depths.
struct LineageMeasure {
    double coalescence_depth = 0.0;
    std::vector<double> mutation_depths;  // increasing, all <= coalescence_depth
    bool coalescence_is_mutation = false;

    bool valid(double tau = kInf) const {
        if (!(coalescence_depth > 0.0) || !(coalescence_depth < tau)) return false;
        for (std::size_t i = 0; i < mutation_depths.size(); ++i) {
            if (!(mutation_depths[i] > 0.0) || mutation_depths[i] > coalescence_depth) return false;
            if (i && !(mutation_depths[i] > mutation_depths[i - 1])) return false;
        }
        if (coalescence_is_mutation && (mutation_depths.empty() || mutation_depths.back() != coalescence_depth)) return false;
        return true;
    }
    std::size_t mutation_count() const { return mutation_depths.size(); }
    std::size_t mutations_at_least(double eps) const {
        return static_cast<std::size_t>(mutation_depths.end() -
                                        std::lower_bound(mutation_depths.begin(), mutation_depths.end(), eps));
    }
    bool operator==(const LineageMeasure&) const = default;
};

struct CppAtom {
    double position = 0.0;
    LineageMeasure lineage;
    bool operator==(const CppAtom&) const = default;
};

struct MarkedCPP {
    std::vector<CppAtom> atoms;
    double n = 0.0, d_n = 0.0, tau = 0.0;
    std::int64_t I_n = 0;
    std::uint64_t seed = 0;
    std::string regime;
    std::vector<std::string> warnings;
    std::optional<LineageMeasure> first_lineage;  // Brownian memoryless variant only
};

// Depth chain of the future infimum: (depth, mark), depth increasing.
struct ChainEntry {
    double depth;
    bool marked;
};

inline std::vector<ChainEntry> lineage_chain(const MarkedExcursion& exc, double tau) {
    auto fi = future_infimum(exc);
    std::vector<ChainEntry> out;
    out.reserve(fi.size());
    for (auto it = fi.rbegin(); it != fi.rend(); ++it) out.push_back({tau - it->level, it->marked});
    return out;
}

inline LineageMeasure extract_lineage_measure(const MarkedExcursion& exc, double tau) {
    if (exc.end_reason != EndReason::CrossedTau) throw ContractError("extract_lineage_measure: excursion did not cross tau");
    auto fi = future_infimum(exc);
    LineageMeasure L;
    if (fi.empty()) throw ContractError("extract_lineage_measure: empty future infimum chain");
    L.coalescence_depth = tau - fi.front().level;
    L.coalescence_is_mutation = fi.front().marked;
    for (auto it = fi.rbegin(); it != fi.rend(); ++it)
        if (it->marked) L.mutation_depths.push_back(tau - it->level);
    return L;
}

inline std::optional<LineageMeasure> restrict_to_epsilon(const LineageMeasure& L, double eps) {
    if (L.coalescence_depth < eps) return std::nullopt;
    LineageMeasure r = L;
    r.mutation_depths.erase(r.mutation_depths.begin(),
                            std::lower_bound(r.mutation_depths.begin(), r.mutation_depths.end(), eps));
    return r;
}

// Upsilon: the smallest chain depth >= eps, with its mark.
struct Upsilon {
    double depth;
    bool marked;
};

inline std::optional<Upsilon> upsilon_of(const MarkedExcursion& exc, double tau, double eps) {
    for (const auto& c : lineage_chain(exc, tau))
        if (c.depth >= eps) return Upsilon{c.depth, c.marked};
    return std::nullopt;
}

// Upsilon conditioned on depth >= eps, exactly: the path after its first passage at tau - eps
// is a fresh path from that level, conditioned to cross tau before 0.
inline Upsilon sample_upsilon(const LevyModel& model, double tau, double eps, Rng& rng) {
    auto rule = PathStopRule::first_of({PathStopRule::hit_level(0.0), PathStopRule::cross_above(tau)});
    for (;;) {
        auto e = sample_path(model, tau - eps, rule, rng);
        if (e.end_reason != EndReason::CrossedTau) continue;
        auto u = upsilon_of(e, tau, eps);
        if (u) return *u;
    }
}

inline std::int64_t default_I_n(double n, double dn) { return std::max<std::int64_t>(1, std::llround(dn / n)); }

struct CppOptions {
    unsigned threads = 1;
    std::string stream = "lineage";
};

// I_n - 1 i.i.d. lineages at positions i n/d_n. Lineage i uses stream (seed, "lineage", i).
inline MarkedCPP simulate_marked_cpp(const LevyModel& model, const RescalingScheme& scheme, double tau, std::int64_t I_n,
                                     std::uint64_t seed, const CppOptions& opt = {}) {
    if (I_n < 1) throw DomainError("I_n must be >= 1");
    MarkedCPP cpp;
    cpp.n = scheme.n;
    cpp.d_n = scheme.d_n;
    cpp.tau = tau;
    cpp.I_n = I_n;
    cpp.seed = seed;
    const double step = scheme.n / scheme.d_n;
    if (static_cast<double>(I_n) * step > 1.0 + 1e-9)
        cpp.warnings.push_back("positions exceed [0,1]: I_n n/d_n = " + std::to_string(static_cast<double>(I_n) * step));
    std::size_t count = static_cast<std::size_t>(I_n - 1);
    cpp.atoms.resize(count);
    parallel_for(count, opt.threads, [&](std::size_t k) {
        Rng rng(seed, opt.stream, k + 1);
        auto e = sample_excursion_below_tau(model, tau, rng);
        cpp.atoms[k] = {static_cast<double>(k + 1) * step, extract_lineage_measure(e, tau)};
    });
    return cpp;
}

// Xi(tau) given survival: 1 + accepted excursions before the first rejection.
inline std::int64_t simulate_population_count(const LevyModel& model, double tau, Rng& rng) {
    auto rule = PathStopRule::first_of({PathStopRule::hit_level(0.0), PathStopRule::cross_above(tau)});
    std::int64_t k = 1;
    for (;;) {
        auto e = sample_path(model, tau, rule, rng);
        if (e.end_reason != EndReason::CrossedTau) return k;
        ++k;
    }
}

inline double population_count_parameter(const LevyModel& model, double tau) {
    return scale_function(model, 0.0) / scale_function(model, tau);
}

// P(depth >= eps) for one excursion below tau.
inline double p_depth_at_least(const LevyModel& model, double tau, double eps) {
    double W0 = scale_function(model, 0.0), Wt = scale_function(model, tau);
    return W0 * (1.0 / scale_function(model, eps) - 1.0 / Wt) / (1.0 - W0 / Wt);
}

}  // namespace sptree

#pragma once

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "levy_core.hpp"
#include "rng.hpp"

namespace sptree {

// Linear descent at the model drift for `duration`, reaching `level_before`, then one jump.
// The last segment of a path stopped during a descent has jump == 0.
struct Segment {
    double duration = 0.0;
    double jump = 0.0;
    bool marked = false;
    double level_before = 0.0;
};

enum class EndReason { HitZero, CrossedTau, StopLevelHit, TimeLimit };

inline const char* to_string(EndReason r) {
    switch (r) {
        case EndReason::HitZero: return "HitZero";
        case EndReason::CrossedTau: return "CrossedTau";
        case EndReason::StopLevelHit: return "StopLevelHit";
        case EndReason::TimeLimit: return "TimeLimit";
    }
    return "?";
}

struct MarkedExcursion {
    double start_level = 0.0;
    double drift = -1.0;
    std::vector<Segment> segments;
    EndReason end_reason = EndReason::TimeLimit;
    double end_level = 0.0;

    double lifetime() const {
        double t = 0.0;
        for (const auto& s : segments) t += s.duration;
        return t;
    }
    double infimum() const {
        double m = std::min(start_level, end_level);
        for (const auto& s : segments) m = std::min(m, s.level_before);
        return m;
    }
    double supremum() const {
        double m = start_level;
        for (const auto& s : segments) m = std::max(m, s.level_before + s.jump);
        return m;
    }
    std::size_t jump_count() const {
        std::size_t k = 0;
        for (const auto& s : segments) k += s.jump > 0.0;
        return k;
    }
    // number of jumps in [0, t]
    std::size_t jumps_before(double t) const {
        std::size_t k = 0;
        double clock = 0.0;
        for (const auto& s : segments) {
            clock += s.duration;
            if (clock > t) break;
            k += s.jump > 0.0;
        }
        return k;
    }
};

// HitLevel(x): continuous down-crossing of x. CrossAbove(y): a jump landing strictly above y.
struct PathStopRule {
    std::vector<double> hit_levels;
    std::vector<double> cross_levels;
    std::size_t max_jumps = 50'000'000;

    static PathStopRule hit_level(double x) { return PathStopRule{{x}, {}}; }
    static PathStopRule cross_above(double y) { return PathStopRule{{}, {y}}; }
    static PathStopRule first_of(std::initializer_list<PathStopRule> rules) {
        PathStopRule r;
        for (const auto& p : rules) {
            r.hit_levels.insert(r.hit_levels.end(), p.hit_levels.begin(), p.hit_levels.end());
            r.cross_levels.insert(r.cross_levels.end(), p.cross_levels.begin(), p.cross_levels.end());
            r.max_jumps = std::min(r.max_jumps, p.max_jumps);
        }
        return r;
    }
    // highest hit level <= x, or -inf
    double hit_below(double x) const {
        double h = -kInf;
        for (double v : hit_levels)
            if (v <= x) h = std::max(h, v);
        return h;
    }
    double lowest_cross() const {
        double c = kInf;
        for (double v : cross_levels) c = std::min(c, v);
        return c;
    }
};

inline void require_samplable(const LevyModel& m) {
    if (m.b() == 0.0 && m.drift() == 0.0 && m.jump_mass() == 0.0) throw DomainError("degenerate model: zero drift and zero jump mass");
    if (!m.samplable()) throw ContractError("path simulation needs a finite-variation model with negative drift");
}

// Exact skeleton simulation. Callback-free core shared by the public samplers.
inline MarkedExcursion sample_path(const LevyModel& model, double x0, const PathStopRule& stop, Rng& rng) {
    require_samplable(model);
    const double c = -model.drift();
    const double mass = model.jump_mass();
    const double ceiling = stop.lowest_cross();
    MarkedExcursion e;
    e.start_level = x0;
    e.drift = model.drift();
    double x = x0;
    for (std::size_t k = 0;; ++k) {
        if (k >= stop.max_jumps) {
            e.end_reason = EndReason::TimeLimit;
            e.end_level = x;
            return e;
        }
        double w = mass > 0 ? rng.exponential(mass) : kInf;
        double low = x - c * w;
        double h = stop.hit_below(x);
        if (h > -kInf && low <= h) {
            e.segments.push_back({(x - h) / c, 0.0, false, h});
            e.end_reason = h == 0.0 ? EndReason::HitZero : EndReason::StopLevelHit;
            e.end_level = h;
            return e;
        }
        if (!std::isfinite(w)) {
            e.end_reason = EndReason::TimeLimit;
            e.end_level = -kInf;
            return e;
        }
        double j = model.jumps().sample(rng);
        bool marked = rng.uniform() < model.mark_prob(j);
        e.segments.push_back({w, j, marked, low});
        x = low + j;
        if (x > ceiling) {
            e.end_reason = EndReason::CrossedTau;
            e.end_level = x;
            return e;
        }
    }
}

inline double excursion_acceptance(const LevyModel& model, double tau) {
    return 1.0 - scale_function(model, 0.0) / scale_function(model, tau);
}

// One inter-visit excursion below tau, conditioned (by rejection) to cross tau before hitting 0.
inline MarkedExcursion sample_excursion_below_tau(const LevyModel& model, double tau, Rng& rng,
                                                  std::size_t* rejections = nullptr) {
    if (!(tau > 0)) throw DomainError("tau must be positive");
    double acc = excursion_acceptance(model, tau);
    if (acc < 1e-6) throw DomainError("excursion acceptance probability below 1e-6; n too small for tau");
    auto rule = PathStopRule::first_of({PathStopRule::hit_level(0.0), PathStopRule::cross_above(tau)});
    for (;;) {
        auto e = sample_path(model, tau, rule, rng);
        if (e.end_reason == EndReason::CrossedTau) return e;
        if (rejections) ++*rejections;
    }
}

struct InfimumJump {
    double time;   // jump time of the future infimum
    double level;  // j(s-)
    bool marked;   // mark of the path jump at s
    double jump;   // size of that path jump
};

// Jump chain of the future infimum j(t) = inf_{[t, zeta]} Z, in forward time order.
inline std::vector<InfimumJump> future_infimum(const MarkedExcursion& e) {
    std::vector<double> times(e.segments.size());
    double t = 0.0;
    for (std::size_t k = 0; k < e.segments.size(); ++k) {
        t += e.segments[k].duration;
        times[k] = t;
    }
    std::vector<InfimumJump> out;
    double cur = e.end_level;
    for (std::size_t k = e.segments.size(); k-- > 0;) {
        const auto& s = e.segments[k];
        if (s.jump > 0.0 && s.level_before < cur) out.push_back({times[k], s.level_before, s.marked, s.jump});
        cur = std::min(cur, s.level_before);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

struct LadderRecord {
    double level;       // new running supremum
    double increment;   // level minus the previous supremum
    double jump;        // size of the path jump
    double undershoot;  // previous supremum minus the pre-jump level
    bool marked;
};

// New-supremum events of a path started at its supremum.
inline std::vector<LadderRecord> ladder_records(const MarkedExcursion& e) {
    std::vector<LadderRecord> out;
    double sup = e.start_level;
    for (const auto& s : e.segments) {
        double post = s.level_before + s.jump;
        if (s.jump > 0.0 && post > sup) {
            out.push_back({post, post - sup, s.jump, sup - s.level_before, s.marked});
            sup = post;
        }
    }
    return out;
}

// Depth process tau - Z((zeta - t)-) of an excursion, as a skeleton of the same kind.
// It starts at tau minus the pre-jump level of the final jump.
inline MarkedExcursion reversed_depth_path(const MarkedExcursion& e, double tau) {
    MarkedExcursion r;
    r.drift = e.drift;
    const auto& S = e.segments;
    if (S.empty()) {
        r.start_level = tau - e.start_level;
        r.end_level = r.start_level;
        return r;
    }
    const std::size_t N = S.size();
    r.start_level = tau - S[N - 1].level_before;
    for (std::size_t k = N; k-- > 0;) {
        double prev = k == 0 ? e.start_level : S[k - 1].level_before + S[k - 1].jump;
        double low = tau - prev;
        if (k == 0) {
            r.segments.push_back({S[k].duration, 0.0, false, low});
            r.end_level = low;
        } else {
            r.segments.push_back({S[k].duration, S[k - 1].jump, S[k - 1].marked, low});
        }
    }
    r.end_reason = EndReason::StopLevelHit;
    return r;
}

// Tab separated: duration, jump, mark. One line per segment.
inline void dump_skeleton(std::ostream& os, const MarkedExcursion& e) {
    os << "# skeleton start_level=" << std::setprecision(17) << e.start_level << " drift=" << e.drift
       << " end_reason=" << to_string(e.end_reason) << " end_level=" << e.end_level << "\n";
    os << "duration\tjump\tmark\n";
    for (const auto& s : e.segments) os << s.duration << '\t' << s.jump << '\t' << (s.marked ? 1 : 0) << '\n';
}

inline std::string skeleton_string(const MarkedExcursion& e) {
    std::ostringstream os;
    dump_skeleton(os, e);
    return os.str();
}

}  // namespace sptree

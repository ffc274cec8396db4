#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "genealogy.hpp"
#include "kernels.hpp"
#include "levy_core.hpp"
#include "rng.hpp"

namespace sptree {

// ---------------------------------------------------------------- Psi

// Psi(h, u, l): coalescence depth h(l-), mutation depths h(u_i) for u_i <= l.
inline LineageMeasure assemble_sigma(const std::function<double(double)>& h, const std::function<double(double)>& h_left,
                                     const std::vector<double>& mutation_times, double l) {
    if (l < 0) throw DomainError("assemble_sigma: negative lifetime");
    if (!std::is_sorted(mutation_times.begin(), mutation_times.end())) throw ContractError("assemble_sigma: mutation times not sorted");
    LineageMeasure L;
    L.coalescence_depth = h_left(l);
    for (double u : mutation_times) {
        if (u > l) break;
        double d = u == l ? h_left(l) : h(u);
        if (!L.mutation_depths.empty() && !(d > L.mutation_depths.back()))
            throw ContractError("assemble_sigma: mutation depths not strictly increasing");
        L.mutation_depths.push_back(d);
    }
    if (!L.mutation_depths.empty() && L.mutation_depths.back() > L.coalescence_depth)
        throw ContractError("assemble_sigma: mutation deeper than the coalescence");
    L.coalescence_is_mutation = !L.mutation_depths.empty() && L.mutation_depths.back() == L.coalescence_depth;
    return L;
}

inline LineageMeasure assemble_sigma(const std::function<double(double)>& h, const std::vector<double>& mutation_times, double l) {
    return assemble_sigma(h, h, mutation_times, l);
}

// ---------------------------------------------------------------- H^K

struct HKOptions {
    double delta = 1e-3;  // jumps below delta are replaced by their mean (drift) and mark rate
    std::size_t grid = 400;
    MuKWeighting weighting = MuKWeighting::Defective;
    bool stop_at_first_mark = false;
    std::size_t max_events = 1'000'000;
};

enum class HKEventKind { Jump, Mark, Kill, Lost };

struct HKEvent {
    HKEventKind kind;
    double depth_before;
    double depth_after;
    bool marked;
};

struct HKPath {
    double x0 = 0.0;
    std::vector<HKEvent> events;
    std::vector<double> mark_depths;
    double kill_depth = std::numeric_limits<double>::quiet_NaN();
    bool killed = false;
    bool lost = false;  // passed tau
    bool stopped_at_mark = false;
    std::size_t violations = 0;
};

// Killed inhomogeneous subordinator driven by mu^K(a, .), drift b^2/2, Poisson marks at rate theta + rho.
// Rates are tabulated on a depth grid at construction.
class HKSampler {
public:
    HKSampler(LevyModel m, double tau, HKOptions opt = {}) : m_(std::move(m)), tau_(tau), opt_(opt) {
        if (!(tau > 0)) throw DomainError("H^K: tau must be positive");
        const auto& J = m_.jumps();
        has_jumps_ = J.kind != JumpKind::Zero;
        stable_ = m_.closed_form() == ClosedFormKind::Stable;
        closed_ = m_.closed_form() != ClosedFormKind::None;
        if (has_jumps_ && !J.finite_mass() && !(opt_.delta > 0))
            throw NumericError("H^K: rate not locally bounded (infinite jump mass and no small-jump cutoff)");
        cut_ = J.finite_mass() ? 0.0 : opt_.delta;
        mark_rate_ = m_.ladder_theta() + m_.rho();
        bivariate_ = !m_.mutation().is_zero();
        grid_ = num::geomspace(tau * 1e-6, tau, opt_.grid);
        for (double a : grid_) {
            kill_.push_back(1.0 / scale_function(m_, a));
            double jm = 0.0, dr = 0.5 * m_.b() * m_.b(), sm = 0.0;
            if (has_jumps_) {
                jm = jump_mass(a);
                if (cut_ > 0) {
                    dr += num::integrate_singular_left([&](double u) { return u * jd(a, u); }, 0.0, cut_, 4.0, 1e-9);
                    if (bivariate_) sm = small_mark_mass(a);
                }
            }
            jump_.push_back(jm);
            drift_.push_back(dr);
            small_mark_.push_back(sm);
        }
    }

    const LevyModel& model() const { return m_; }
    double tau() const { return tau_; }

    // jump density used by the sampler
    double jd(double a, double u) const {
        double d;
        if (stable_) {
            d = m_.jumps().weight * mu_K_stable_closed_form(m_.jumps().alpha, tau_, a, u, MuKWeighting::Defective);
        } else {
            d = mu_K_jump_density(m_, a, u);
        }
        if (opt_.weighting == MuKWeighting::Stated) d *= u < tau_ - a ? scale_function(m_, tau_ - a - u) / scale_function(m_, tau_) : 0.0;
        return d;
    }

    double kill_rate(double a) const { return closed_ ? 1.0 / scale_function(m_, a) : interp(kill_, a); }
    double jump_rate(double a) const { return interp(jump_, a); }
    double drift(double a) const { return interp(drift_, a); }
    double mark_rate(double a) const { return mark_rate_ + interp(small_mark_, a); }
    double total_rate(double a) const { return kill_rate(a) + jump_rate(a) + mark_rate(a); }

    HKPath sample(double x0, Rng& rng) const {
        if (!(x0 > 0 && x0 < tau_)) throw DomainError("H^K: x0 must lie in (0, tau)");
        HKPath p;
        p.x0 = x0;
        double a = x0;
        double step = (tau_ - x0) / 64.0;
        for (std::size_t ev = 0; ev < opt_.max_events; ++ev) {
            double d = drift(a);
            double next;  // depth at the next candidate event
            if (d <= 0.0) {
                // no drift: rates frozen until the next event
                next = a;
            } else {
                // thinning in depth: event intensity r(a)/d(a) per unit depth
                bool found = false;
                next = a;
                while (!found) {
                    double hi = std::min(tau_, a + step);
                    double bound = std::max(total_rate(a) / drift(a), total_rate(hi) / drift(hi));
                    double s = a + rng.exponential(bound);
                    if (s >= hi) {
                        if (hi >= tau_) {
                            p.lost = true;
                            p.events.push_back({HKEventKind::Lost, a, tau_, false});
                            return p;
                        }
                        a = hi;
                        continue;
                    }
                    double r = total_rate(s) / drift(s);
                    if (r > bound * (1 + 1e-12)) {
                        ++p.violations;
                        step *= 0.5;
                        continue;
                    }
                    a = s;
                    if (rng.uniform() * bound < r) found = true;
                }
                next = a;
            }
            // choose the event at depth `next`
            double k = kill_rate(next), j = jump_rate(next), mr = mark_rate(next);
            double u = rng.uniform() * (k + j + mr);
            if (u < k) {
                p.killed = true;
                p.kill_depth = next;
                p.events.push_back({HKEventKind::Kill, next, next, false});
                return p;
            }
            if (u < k + mr) {
                p.events.push_back({HKEventKind::Mark, next, next, true});
                p.mark_depths.push_back(next);
                if (opt_.stop_at_first_mark) {
                    p.stopped_at_mark = true;
                    return p;
                }
                continue;
            }
            double size = sample_jump(next, rng);
            if (!(next + size < tau_)) {
                p.lost = true;
                p.events.push_back({HKEventKind::Lost, next, next + size, false});
                return p;
            }
            bool marked = false;
            if (bivariate_) {
                double tot = mu_K_jump_density(m_, next, size);
                double one = mu_K_jump_density(m_, next, size, 1);
                marked = tot > 0 && rng.uniform() * tot < one;
            }
            p.events.push_back({HKEventKind::Jump, next, next + size, marked});
            a = next + size;
            if (marked) {
                p.mark_depths.push_back(a);
                if (opt_.stop_at_first_mark) {
                    p.stopped_at_mark = true;
                    return p;
                }
            }
        }
        throw NumericError("H^K: event cap exceeded");
    }

    // one jump of mu^K(a, .) restricted to [cut, inf); may land beyond tau - a (loss)
    double sample_jump(double a, Rng& rng) const {
        if (stable_ && opt_.weighting == MuKWeighting::Defective) {
            // envelope u^{-alpha} on [cut, inf), accept with a/(a+u)
            double al = m_.jumps().alpha;
            for (;;) {
                double u = cut_ * std::pow(rng.uniform(), -1.0 / (al - 1.0));
                if (rng.uniform() * (a + u) < a) return u;
            }
        }
        double lo = std::max(cut_, 1e-9 * tau_);
        double hi = tau_ - a;
        double in = num::integrate([&](double u) { return jd(a, u); }, lo, hi, 1e-8);
        double total = jump_rate(a);
        if (rng.uniform() * total >= in) return hi * 2.0 + 1.0;  // lost
        auto grid = num::geomspace(lo, hi, 256);
        auto cdf = num::TabulatedCdf::build([&](double u) { return jd(a, u); }, grid);
        return cdf.invert(rng.uniform());
    }

private:
    // marked mass of jumps below cut_, integrated in x first:
    // int_0^a W(a-x)/W(a) int_x^{x+cut} lambda(r) f(r) dr dx
    double small_mark_mass(double a) const {
        const double Wa = scale_function(m_, a);
        auto kink = detail::mark_kink(m_);
        // log scale in r: the density blows up at r = 0
        auto g = [&](double t) {
            double r = std::exp(t);
            return m_.jumps().density(r) * m_.mark_prob(r) * r;
        };
        auto inner = [&](double x) {
            if (!(x > 0)) return 0.0;
            double l = std::log(x), r = std::log(x + cut_);
            if (kink && *kink > x && *kink < x + cut_) {
                double k = std::log(*kink);
                return num::integrate(g, l, k, 1e-9) + num::integrate(g, k, r, 1e-9);
            }
            return num::integrate(g, l, r, 1e-9);
        };
        auto outer = [&](double x) { return scale_function(m_, a - x) / Wa * inner(x); };
        return num::integrate_singular_left(outer, 0.0, a, 4.0, 1e-8);
    }

    double jump_mass(double a) const {
        double lo = cut_;
        auto f = [&](double u) { return jd(a, u); };
        double s = 0.0;
        double mid = tau_ - a;
        if (lo > 0 || m_.jumps().finite_mass()) {
            if (mid > lo) s += num::integrate(f, lo, mid, 1e-9);
            s += num::integrate(f, std::max(lo, mid), kInf, 1e-9);
        }
        return s;
    }
    double interp(const std::vector<double>& v, double a) const {
        if (a <= grid_.front()) return v.front();
        if (a >= grid_.back()) return v.back();
        auto it = std::upper_bound(grid_.begin(), grid_.end(), a);
        std::size_t i = static_cast<std::size_t>(it - grid_.begin());
        double f = (a - grid_[i - 1]) / (grid_[i] - grid_[i - 1]);
        return v[i - 1] + f * (v[i] - v[i - 1]);
    }

    LevyModel m_;
    double tau_;
    HKOptions opt_;
    bool has_jumps_ = false, stable_ = false, bivariate_ = false, closed_ = false;
    double cut_ = 0.0, mark_rate_ = 0.0;
    std::vector<double> grid_, kill_, jump_, drift_, small_mark_;
};

inline HKPath sample_H_K(const LevyModel& m, double tau, double x0, Rng& rng, HKOptions opt = {}) {
    return HKSampler(m, tau, opt).sample(x0, rng);
}

// ---------------------------------------------------------------- M_eps

struct ChainHistory {
    std::vector<ChainState> states;
    std::size_t K() const { return states.empty() ? 0 : states.size() - 1; }
    double absorption_depth() const { return states.back().depth; }
    LineageMeasure lineage() const {
        LineageMeasure L;
        L.coalescence_depth = states.back().depth;
        for (const auto& s : states)
            if (s.mark == 1) L.mutation_depths.push_back(s.depth);
        L.coalescence_is_mutation = false;
        return L;
    }
};

enum class ChainKind { PreLimit, Brownian, General };

struct ChainOptions {
    std::size_t cap = 10'000;
    HKOptions hk;
    std::size_t init_grid = 400;
};

// Draws (Upsilon, mark) from nu_init by tabulated inversion.
class NuInitSampler {
public:
    NuInitSampler(const LevyModel& m, double eps, double tau, std::size_t grid) {
        auto nu = nu_init(m, eps, tau);
        atom_ = nu.atom_mass(0);
        if (nu.density) {
            std::vector<double> g(grid);
            for (std::size_t i = 0; i < grid; ++i) {
                double s = static_cast<double>(i) / static_cast<double>(grid - 1);
                g[i] = eps + (tau - eps) * std::pow(s, 3.0);
            }
            g.back() = tau * (1 - 1e-12);
            for (int q = 0; q < 2; ++q) {
                const auto& gg = g;
                // the value at eps only enters the first cell, which is replaced below
                cdf_[q] = num::TabulatedCdf::build([&](double u) { return u > eps ? nu(u, q) : 0.0; }, gg);
                // the first cell misses the integrable blow-up at eps; use the exact mass there
                double first = nu.density_mass(q, eps, gg[1]);
                double approx = cdf_[q].cdf[1];
                for (std::size_t i = 1; i < cdf_[q].cdf.size(); ++i) cdf_[q].cdf[i] += first - approx;
                cdf_[q].total = cdf_[q].cdf.back();
            }
        }
        eps_ = eps;
    }
    ChainState sample(Rng& rng) const {
        double total = atom_ + cdf_[0].total + cdf_[1].total;
        double u = rng.uniform() * total;
        if (u < atom_) return {eps_, 0};
        if (u < atom_ + cdf_[0].total) return {cdf_[0].invert(rng.uniform()), 0};
        return {cdf_[1].invert(rng.uniform()), 1};
    }
    double mass() const { return atom_ + cdf_[0].total + cdf_[1].total; }

private:
    double atom_ = 0.0, eps_ = 0.0;
    num::TabulatedCdf cdf_[2];
};

class ChainSampler {
public:
    ChainSampler(LevyModel m, double eps, double tau, ChainOptions opt = {}) : m_(std::move(m)), eps_(eps), tau_(tau), opt_(opt) {
        if (!(eps > 0 && eps < tau)) throw DomainError("M_eps: need 0 < eps < tau");
        if (m_.samplable())
            kind_ = ChainKind::PreLimit;
        else if (m_.b() > 0 && m_.jumps().kind == JumpKind::Zero)
            kind_ = ChainKind::Brownian;
        else
            kind_ = ChainKind::General;
        if (kind_ == ChainKind::General) {
            init_ = std::make_shared<NuInitSampler>(m_, eps, tau, opt_.init_grid);
            auto hk = opt_.hk;
            hk.stop_at_first_mark = true;
            hk_ = std::make_shared<HKSampler>(m_, tau, hk);
        }
    }
    ChainKind kind() const { return kind_; }

    ChainState transition(const ChainState& s, Rng& rng) const {
        if (s.mark == 0) return s;
        switch (kind_) {
            case ChainKind::PreLimit: return sample_transition_prelimit(m_, s.depth, tau_, rng);
            case ChainKind::Brownian: return sample_transition_brownian(m_, s.depth, tau_, rng);
            case ChainKind::General:
                for (;;) {
                    auto p = hk_->sample(s.depth, rng);
                    if (p.lost) continue;
                    if (p.stopped_at_mark) return {p.mark_depths.front(), 1};
                    return {p.kill_depth, 0};
                }
        }
        return s;
    }

    ChainState initial(Rng& rng) const {
        ChainState s0;
        switch (kind_) {
            case ChainKind::PreLimit: {
                auto u = sample_upsilon(m_, tau_, eps_, rng);
                s0 = {u.depth, u.marked ? 1 : 0};
                break;
            }
            case ChainKind::Brownian: s0 = {eps_, 0}; break;
            case ChainKind::General: s0 = init_->sample(rng); break;
        }
        return s0;
    }

    ChainHistory sample(Rng& rng) const {
        ChainHistory h;
        auto s0 = initial(rng);
        if (s0.mark == 0) {
            // M(0) composes nu_init(., {0}) with one kernel step
            auto s1 = transition(ChainState{s0.depth, 1}, rng);
            h.states.push_back(s1);
        } else {
            h.states.push_back(s0);
        }
        while (h.states.back().mark == 1) {
            if (h.states.size() > opt_.cap) throw NumericError("M_eps: iteration cap exceeded");
            h.states.push_back(transition(h.states.back(), rng));
        }
        return h;
    }

private:
    LevyModel m_;
    double eps_, tau_;
    ChainOptions opt_;
    ChainKind kind_ = ChainKind::General;
    std::shared_ptr<NuInitSampler> init_;
    std::shared_ptr<HKSampler> hk_;
};

inline ChainHistory sample_chain_M_eps(const LevyModel& m, double eps, double tau, Rng& rng, ChainOptions opt = {}) {
    return ChainSampler(m, eps, tau, opt).sample(rng);
}

inline ChainState sample_transition(const LevyModel& m, const ChainState& s, double tau, Rng& rng, HKOptions hk = {}) {
    if (s.mark == 0) return s;
    if (m.samplable()) return sample_transition_prelimit(m, s.depth, tau, rng);
    if (m.b() > 0 && m.jumps().kind == JumpKind::Zero) return sample_transition_brownian(m, s.depth, tau, rng);
    hk.stop_at_first_mark = true;
    HKSampler hs(m, tau, hk);
    for (;;) {
        auto p = hs.sample(s.depth, rng);
        if (p.lost) continue;
        if (p.stopped_at_mark) return {p.mark_depths.front(), 1};
        return {p.kill_depth, 0};
    }
}

// ---------------------------------------------------------------- Pi_1 / Pi_2

struct PiBValue {
    double value = 0.0;
    double se = 0.0;
};

inline bool is_brownian_limit(const LevyModel& m) { return m.b() > 0 && m.jumps().kind == JumpKind::Zero && m.drift() == 0.0; }

// Brownian: int_eps^tau W'(h)/W(h)^2 P(Poisson(beta (h - eps)) = m) dh
inline double pi1_B_brownian(const LevyModel& m, int count, double eps, double tau) {
    if (!(eps > 0 && eps < tau)) throw DomainError("pi1_B: need 0 < eps < tau");
    double beta = brownian_beta_eff(m);
    auto f = [&](double h) {
        double W = scale_function(m, h);
        return scale_derivative(m, h) / (W * W) * num::poisson_pmf(count, beta * (h - eps));
    };
    return num::integrate_split(f, {eps, std::min(tau, 10 * eps), tau}, 1e-12);
}

// Full-lineage variant: at least `count` mutations anywhere on (0, h).
inline double pi1_at_least_full_lineage(const LevyModel& m, int count, double eps, double tau) {
    double beta = brownian_beta_eff(m);
    auto f = [&](double h) {
        double W = scale_function(m, h);
        double below = 0.0;
        for (int k = 0; k < count; ++k) below += num::poisson_pmf(k, beta * h);
        return scale_derivative(m, h) / (W * W) * std::max(0.0, 1.0 - below);
    };
    std::vector<double> pts{eps};
    for (double p = eps * 10; p < tau; p *= 10) pts.push_back(p);
    pts.push_back(tau);
    return num::integrate_split(f, pts, 1e-12);
}

// p_eps P(K_eps = m) from chain Monte Carlo.
inline PiBValue pi1_B_monte_carlo(const ChainSampler& cs, const LevyModel& m, int count, double eps, double tau,
                                  std::size_t chains, std::uint64_t seed) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < chains; ++i) {
        Rng rng(seed, "chain", i);
        hit += cs.sample(rng).K() == static_cast<std::size_t>(count);
    }
    double p = static_cast<double>(hit) / static_cast<double>(chains);
    double pe = p_eps(m, eps, tau);
    return {pe * p, pe * std::sqrt(p * (1 - p) / static_cast<double>(chains))};
}

inline PiBValue pi1_B(const LevyModel& m, int count, double eps, double tau, std::size_t chains = 20000, std::uint64_t seed = 1) {
    if (count < 0) throw DomainError("pi1_B: m must be >= 0");
    if (is_brownian_limit(m)) return {pi1_B_brownian(m, count, eps, tau), 0.0};
    ChainSampler cs(m, eps, tau);
    return pi1_B_monte_carlo(cs, m, count, eps, tau, chains, seed);
}

// ---------------------------------------------------------------- limit CPP

struct LimitCppOptions {
    double window = 1.0;
    bool survival_conditioned = false;  // window [0, e], e ~ Exp(1/W(tau))
    bool first_lineage = false;         // Brownian only
    ChainOptions chain;
};

// Brownian lineage: depth from W'(h)/W(h)^2 on (eps, tau), mutations Poisson(beta_eff) on (0, depth).
inline LineageMeasure sample_brownian_lineage(const LevyModel& m, double eps, double tau, Rng& rng) {
    double inv = 1.0 / scale_function(m, tau) + rng.uniform() * p_eps(m, eps, tau);
    double h = 2.0 / (m.b() * m.b() * inv);
    LineageMeasure L;
    L.coalescence_depth = h;
    double beta = brownian_beta_eff(m);
    long k = beta > 0 ? rng.poisson(beta * h) : 0;
    for (long i = 0; i < k; ++i) L.mutation_depths.push_back(rng.uniform() * h);
    std::sort(L.mutation_depths.begin(), L.mutation_depths.end());
    return L;
}

inline MarkedCPP sample_limit_cpp(const LevyModel& m, double tau, double eps, Rng& rng, const LimitCppOptions& opt = {},
                                  const ChainSampler* chain = nullptr) {
    if (!(eps > 0)) throw DomainError("sample_limit_cpp: eps must be positive");
    MarkedCPP cpp;
    cpp.tau = tau;
    cpp.regime = m.mutation().kind == MutationKind::LinearCapped ? "B2" : "B1";
    double window = opt.survival_conditioned ? rng.exponential(1.0 / scale_function(m, tau)) : opt.window;
    long count = rng.poisson(window * p_eps(m, eps, tau));
    std::vector<double> pos(static_cast<std::size_t>(count));
    for (auto& p : pos) p = rng.uniform() * window;
    std::sort(pos.begin(), pos.end());
    bool brown = is_brownian_limit(m);
    std::unique_ptr<ChainSampler> own;
    if (!brown && !chain) {
        own = std::make_unique<ChainSampler>(m, eps, tau, opt.chain);
        chain = own.get();
    }
    for (double p : pos) {
        LineageMeasure L = brown ? sample_brownian_lineage(m, eps, tau, rng) : chain->sample(rng).lineage();
        cpp.atoms.push_back({p, std::move(L)});
    }
    if (opt.first_lineage) {
        if (!brown) throw ContractError("first-lineage atom is only available for the Brownian limit");
        LineageMeasure L;
        L.coalescence_depth = tau;
        double beta = brownian_beta_eff(m);
        long k = beta > 0 ? rng.poisson(beta * tau) : 0;
        for (long i = 0; i < k; ++i) L.mutation_depths.push_back(rng.uniform() * tau);
        std::sort(L.mutation_depths.begin(), L.mutation_depths.end());
        cpp.first_lineage = L;
    }
    return cpp;
}

}  // namespace sptree

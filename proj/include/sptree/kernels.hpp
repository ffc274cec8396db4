#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "genealogy.hpp"
#include "levy_core.hpp"
#include "parallel.hpp"
#include "path_sim.hpp"
#include "rng.hpp"

namespace sptree {

// ---------------------------------------------------------------- container

struct KernelAtom {
    double location;  // kInf for the killing atom
    int mark;
    double weight;
    bool at_infinity() const { return std::isinf(location); }
};

// Atoms plus a density in (u, mark) on [lo, hi).
struct AtomicDensity {
    std::vector<KernelAtom> atoms;
    std::function<double(double, int)> density;
    // optional: density at lo + d, taking d directly (no rounding near a singular lo)
    std::function<double(double, int)> density_from_lo;
    double lo = 0.0, hi = kInf;
    int marks = 1;
    std::vector<double> breaks;  // kinks or jumps of the density inside (lo, hi)
    bool singular_lo = false;    // integrable blow-up at lo
    bool singular_hi = false;    // square-root type endpoint at hi

    double operator()(double u, int q = 0) const {
        if (!density || u < lo || u >= hi) return 0.0;
        return density(u, q);
    }
    double atom_mass() const {
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight;
        return s;
    }
    double atom_mass(int q) const {
        double s = 0.0;
        for (const auto& a : atoms)
            if (a.mark == q) s += a.weight;
        return s;
    }
    double density_mass(int q, double a, double b) const {
        if (!density) return 0.0;
        a = std::max(a, lo);
        b = std::min(b, hi);
        if (!(b > a)) return 0.0;
        std::vector<double> pts{a};
        for (double x : breaks)
            if (x > a && x < b) pts.push_back(x);
        if (std::isinf(b)) pts.push_back(pts.back() + 1.0);
        if (singular_lo && singular_hi && pts.size() == 1 && b == hi) pts.push_back(0.5 * (a + b));
        std::sort(pts.begin(), pts.end());
        // finite pieces run in the offset d = u - lo when the density takes it directly
        const bool off = static_cast<bool>(density_from_lo);
        const double base = off ? lo : 0.0;
        auto f = [&](double x) { return off ? density_from_lo(x, q) : density(x, q); };
        auto fu = [&](double u) { return density(u, q); };
        double s = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double l = pts[i];
            double r = i + 1 < pts.size() ? pts[i + 1] : b;
            if (std::isinf(r)) {
                // log scale copes with power tails
                auto fl = [&](double t) { if (t > 700.0) return 0.0; double u = std::exp(t); double v = fu(u) * u; return std::isfinite(v) ? v : 0.0; };
                s += num::integrate(fl, std::log(l), kInf, 1e-9);
                continue;
            }
            const double dl = l - base, dr = r - base;
            if (i == 0 && singular_lo && l == lo) {
                s += num::integrate_singular_left(f, dl, dr, 4.0, 1e-9);
            } else if (i + 1 == pts.size() && singular_hi && r == hi) {
                auto fr = [&](double t) { return f(dl + dr - t); };
                s += num::integrate_singular_left(fr, dl, dr, 2.0, 1e-9);
            } else {
                // the density is itself a quadrature, noisy near 1e-10: bound the refinement
                s += num::integrate(f, dl, dr, 1e-9, 12);
            }
        }
        return s;
    }
    double density_mass(int q) const { return density_mass(q, lo, hi); }
    double density_mass() const {
        double s = 0.0;
        for (int q = 0; q < marks; ++q) s += density_mass(q);
        return s;
    }
    double total_mass() const { return atom_mass() + density_mass(); }
};

inline double bern(double p, int q) { return q ? p : 1.0 - p; }

namespace detail {
inline double W(const LevyModel& m, double x) { return scale_function(m, x); }
inline double lam(const LevyModel& m, double r) { return m.jumps().density(r); }
// breakpoint of f(r) = min(1, k r) in r, if any
inline std::optional<double> mark_kink(const LevyModel& m) {
    if (m.mutation().kind == MutationKind::LinearCapped && m.mutation().kappa() > 0) return 1.0 / m.mutation().kappa();
    return std::nullopt;
}
inline bool marks_depend_on_size(const LevyModel& m) { return m.mutation().kind == MutationKind::LinearCapped; }
}  // namespace detail

// ---------------------------------------------------------------- excursion marginal

inline double excursion_marginal(const LevyModel& m, double x, double z) {
    if (!(x > 0) || !(z > 0)) throw DomainError("excursion_marginal: x and z must be positive");
    double v = std::exp(-m.eta() * x) * detail::lam(m, x + z);
    if (m.finite_variation()) v *= m.scale_at_zero();
    return v;
}

// ---------------------------------------------------------------- g^x

// g^x(a, {q}, dv) with y = x + a.
inline AtomicDensity g_x(const LevyModel& m, double x, double a) {
    if (!(x > 0) || a < 0) throw DomainError("g_x: need x > 0, a >= 0");
    const double y = x + a;
    const double eta = m.eta();
    const double Wy = detail::W(m, y);
    AtomicDensity g;
    g.marks = 2;
    g.lo = 0.0;
    g.hi = kInf;
    if (m.b() > 0) {
        double w = 0.5 * m.b() * m.b() * (scale_derivative(m, y) - eta * Wy);
        g.atoms.push_back({0.0, 0, w});
    }
    if (m.jumps().kind == JumpKind::Zero) return g;
    auto kink = detail::mark_kink(m);
    g.density = [m, y, eta, Wy, kink](double v, int q) {
        auto f = [&](double u) {
            double r = u + v;
            double w = eta == 0.0 ? Wy * scale_defect(m, y, u) : std::exp(-eta * u) * Wy - scale_function(m, y - u);
            return w * bern(m.mark_prob(r), q) * m.jumps().density(r);
        };
        std::vector<double> pts{0.0, y};
        if (kink && *kink - v > 0.0 && *kink - v < y) pts.push_back(*kink - v);
        if (m.jumps().kind == JumpKind::TruncatedStable && m.jumps().cutoff > v && m.jumps().cutoff - v < y)
            pts.push_back(m.jumps().cutoff - v);
        std::sort(pts.begin(), pts.end());
        const bool stable0 = m.jumps().kind == JumpKind::TruncatedStable && m.jumps().cutoff == 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (i == 0 && stable0 && v > 0 && v < 0.1 * y) {
                // u = v (e^t - 1): lambda varies on the scale v
                const double top = pts[1];
                auto fl = [&](double t) { return f(std::min(top, v * std::expm1(t))) * v * std::exp(t); };
                s += num::integrate(fl, 0.0, std::log1p(top / v), 1e-10);
            } else {
                s += num::integrate(f, pts[i], pts[i + 1], 1e-10);
            }
        }
        // u > y: W(y - u) = 0
        auto tailf = [&](double u) { return std::exp(-eta * u) * Wy * bern(m.mark_prob(u + v), q) * m.jumps().density(u + v); };
        double lo = y;
        if (kink && *kink - v > y) {
            s += num::integrate(tailf, y, *kink - v, 1e-10);
            lo = *kink - v;
        }
        // f is constant beyond lo + v
        if (eta == 0.0) {
            s += Wy * bern(m.mark_prob(lo + v), q) * m.jumps().tail(lo + v);
        } else {
            s += num::integrate(tailf, lo, kInf, 1e-10);
        }
        return s;
    };
    g.singular_lo = m.jumps().kind == JumpKind::TruncatedStable && m.jumps().cutoff == 0.0;
    if (g.singular_lo) g.breaks.push_back(y);
    if (kink) {
        g.breaks.push_back(*kink);
        if (*kink > y) g.breaks.push_back(*kink - y);
    }
    return g;
}

// ---------------------------------------------------------------- nu-init

inline double p_eps(const LevyModel& m, double eps, double tau) {
    return 1.0 / detail::W(m, eps) - 1.0 / detail::W(m, tau);
}

// Law of (Upsilon, mark) on [eps, tau) x {0,1}.
inline AtomicDensity nu_init(const LevyModel& m, double eps, double tau) {
    if (!(eps > 0 && eps < tau)) throw DomainError("nu_init: need 0 < eps < tau");
    const double We = detail::W(m, eps), Wt = detail::W(m, tau);
    const double P = 1.0 / We - 1.0 / Wt;
    AtomicDensity nu;
    nu.marks = 2;
    nu.lo = eps;
    nu.hi = tau;
    if (m.b() > 0) {
        double w = (detail::W(m, tau - eps) / Wt) * 0.5 * m.b() * m.b() * scale_derivative(m, eps) / We / P;
        nu.atoms.push_back({eps, 0, w});
    }
    if (m.jumps().kind == JumpKind::Zero) return nu;
    auto kink = detail::mark_kink(m);
    nu.density_from_lo = [m, eps, tau, We, Wt, P, kink](double d, int q) {
        // w = z - (u - eps); bracket 1 - W(eps - w)/W(eps), linearized for tiny w
        const double u = eps + d;
        if (!(d > 0) && m.jumps().kind == JumpKind::TruncatedStable && m.jumps().cutoff == 0.0) return 0.0;  // integrable blow-up
        auto f = [&](double w) {
            double br = scale_defect(m, eps, w);
            double z = d + w;
            return m.jumps().density(z) * bern(m.mark_prob(z), q) * br;
        };
        std::vector<double> pts{0.0, eps};
        if (kink && *kink > d && *kink < u) pts.push_back(*kink - d);
        const auto& J = m.jumps();
        if (J.kind == JumpKind::TruncatedStable && J.cutoff > d && J.cutoff < u) pts.push_back(J.cutoff - d);
        std::sort(pts.begin(), pts.end());
        double s = 0.0;
        bool stable0 = J.kind == JumpKind::TruncatedStable && J.cutoff == 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (i == 0 && stable0 && d < 0.1 * eps && d > 0) {
                // lambda blows up just left of the range: w = d (e^t - 1)
                const double top = pts[1];
                auto fl = [&](double t) { return f(std::min(top, d * std::expm1(t))) * d * std::exp(t); };
                s += num::integrate(fl, 0.0, std::log1p(top / d), 1e-10);
            } else if (i == 0 && stable0 && d < 0.1 * eps) {
                s += num::integrate_singular_left(f, pts[0], pts[1], 4.0, 1e-10);
            } else {
                s += num::integrate(f, pts[i], pts[i + 1], 1e-10);
            }
        }
        // z > u: the bracket is 1
        if (!detail::marks_depend_on_size(m)) {
            s += bern(m.mark_prob(1.0), q) * J.tail(u);
        } else {
            auto g = [&](double z) { return J.density(z) * bern(m.mark_prob(z), q); };
            double lo = u;
            if (kink && *kink > u) {
                s += num::integrate(g, u, *kink, 1e-10);
                lo = *kink;
            }
            // beyond the kink f is constant
            s += bern(m.mark_prob(lo), q) * J.tail(lo);
        }
        return (scale_function(m, tau - u) / Wt) * s / P;
    };
    nu.density = [f = nu.density_from_lo, eps](double u, int q) { return f(u - eps, q); };
    nu.singular_lo = m.jumps().kind == JumpKind::TruncatedStable && m.jumps().cutoff == 0.0;
    nu.singular_hi = m.closed_form() == ClosedFormKind::Stable;
    if (auto k = detail::mark_kink(m); k && *k > eps && *k < tau) nu.breaks.push_back(*k);
    if (m.finite_variation()) nu.breaks.push_back(std::min(tau, 2.0 * eps));
    return nu;
}

// ---------------------------------------------------------------- ladder measures

struct LadderMeasures {
    std::function<double(double, int)> mu;  // mu(u, q)
    std::function<double(double)> mu_plus;
    std::function<double(double)> mu_star;
    double lambda_rate = 0.0;  // total mark rate per unit ladder local time
    double kill_rate = 0.0;
    double drift = 0.0;        // b^2/2
    double rho = 0.0;
    double theta = 0.0;
};

inline double mu_density(const LevyModel& m, double u, int q) {
    if (!(u > 0) || m.jumps().kind == JumpKind::Zero) return 0.0;
    const double eta = m.eta();
    const auto& J = m.jumps();
    if (eta == 0.0 && !detail::marks_depend_on_size(m)) return bern(m.mark_prob(1.0), q) * J.tail(u);
    auto f = [&](double x) { return std::exp(-eta * x) * J.density(x + u) * bern(m.mark_prob(x + u), q); };
    std::vector<double> pts{0.0};
    if (auto k = detail::mark_kink(m); k && *k > u) pts.push_back(*k - u);
    if (J.kind == JumpKind::TruncatedStable && J.cutoff > u) pts.push_back(J.cutoff - u);
    if (J.kind == JumpKind::Tabulated)
        for (double s : J.sizes)
            if (s > u) pts.push_back(s - u);
    std::sort(pts.begin(), pts.end());
    double s = num::integrate_split(f, pts, 1e-11);
    s += num::integrate(f, pts.back(), kInf, 1e-11);
    return s;
}

inline double mu_mass(const LevyModel& m, int q) {
    if (m.jumps().kind == JumpKind::Zero) return 0.0;
    auto f = [&](double u) { return mu_density(m, u, q); };
    bool stable0 = m.jumps().kind == JumpKind::TruncatedStable && m.jumps().cutoff == 0.0;
    if (stable0 && q == 0) return kInf;
    double split = 1.0;
    if (auto k = detail::mark_kink(m)) split = *k;
    if (stable0) return num::integrate_singular_left(f, 0.0, split, 4.0, 1e-9) + num::integrate(f, split, kInf, 1e-9);
    return num::integrate(f, 0.0, split, 1e-9) + num::integrate(f, split, kInf, 1e-9);
}

inline LadderMeasures ladder_measures(const LevyModel& m) {
    LadderMeasures L;
    L.mu = [m](double u, int q) { return mu_density(m, u, q); };
    L.mu_plus = [m](double u) { return mu_density(m, u, 0) + mu_density(m, u, 1); };
    L.mu_star = [m](double u) { return mu_density(m, u, 0); };
    L.theta = m.ladder_theta();
    L.rho = m.rho();
    L.drift = 0.5 * m.b() * m.b();
    L.kill_rate = m.kill_rate();
    double marked = m.mutation().is_zero() ? 0.0 : mu_mass(m, 1);
    L.lambda_rate = L.theta + marked + L.rho;
    return L;
}

// ---------------------------------------------------------------- mu^K

enum class MuKWeighting { Stated, Defective };

// Jump density of H^K at depth a, without the W(tau - a - u)/W(tau) factor.
inline double mu_K_jump_density(const LevyModel& m, double a, double u, int q = -1) {
    if (!(u > 0) || m.jumps().kind == JumpKind::Zero) return 0.0;
    const double Wa = detail::W(m, a);
    const auto& J = m.jumps();
    auto f = [&](double x) {
        double r = x + u;
        double w = J.density(r) * scale_function(m, a - x) / Wa;
        return q < 0 ? w : w * bern(m.mark_prob(r), q);
    };
    std::vector<double> pts{0.0, a};
    if (auto k = detail::mark_kink(m); k && *k - u > 0 && *k - u < a) pts.push_back(*k - u);
    if (J.kind == JumpKind::TruncatedStable && J.cutoff - u > 0 && J.cutoff - u < a) pts.push_back(J.cutoff - u);
    std::sort(pts.begin(), pts.end());
    // W(a - x) vanishes like (a - x)^(alpha-1) at x = a: fine for GK; the density end at x = 0 is smooth for u > 0
    return num::integrate_split(f, pts, 1e-12);
}

inline double mu_K_stable_closed_form(double alpha, double tau, double a, double u, MuKWeighting w) {
    double G = std::abs(std::tgamma(-alpha));
    double d = a / (alpha * G * std::pow(u, alpha) * (a + u));
    if (w == MuKWeighting::Stated) d *= u < tau - a ? std::pow((tau - a - u) / tau, alpha - 1.0) : 0.0;
    return d;
}

inline AtomicDensity mu_K(const LevyModel& m, double tau, double a, bool bivariate,
                          MuKWeighting weighting = MuKWeighting::Stated) {
    if (!(a > 0 && a < tau)) throw DomainError("mu_K: a must lie in (0, tau)");
    AtomicDensity k;
    k.marks = bivariate ? 2 : 1;
    k.atoms.push_back({kInf, 0, 1.0 / detail::W(m, a)});
    k.lo = 0.0;
    k.hi = weighting == MuKWeighting::Stated ? tau - a : kInf;
    if (weighting == MuKWeighting::Defective) k.breaks.push_back(tau - a);
    k.singular_lo = !m.jumps().finite_mass();
    if (m.jumps().kind == JumpKind::Zero) return k;
    const double Wt = detail::W(m, tau);
    k.density = [m, tau, a, bivariate, weighting, Wt](double u, int q) {
        double d = mu_K_jump_density(m, a, u, bivariate ? q : -1);
        if (weighting == MuKWeighting::Stated) d *= scale_function(m, tau - a - u) / Wt;
        return d;
    };
    return k;
}

// ---------------------------------------------------------------- U_*

inline bool psi_star_analytic(const LevyModel& m) {
    return m.mutation().kind != MutationKind::LinearCapped && m.eta() == 0.0 && m.kill_rate() == 0.0 &&
           m.jumps().analytic_extension();
}

// psi*(r) = (b^2/2) r + int (1 - e^{-r u}) mu*(du)
inline cplx psi_star(const LevyModel& m, cplx r) {
    double d = 0.5 * m.b() * m.b();
    if (psi_star_analytic(m)) {
        if (std::abs(r) < 1e-14) return 0.0;
        // critical: mu+ has density tail(u), and mu* = (1 - theta) mu+
        double th = m.mutation()(1.0);
        return d * r + (1.0 - th) * (m.psi(r) / r - d * r);
    }
    cplx s = d * r;
    if (m.jumps().kind == JumpKind::Zero) return s;
    // Fubini: int_0^inf Lambda(dv) (1 - f(v)) k(v), k(v) = int_0^v e^{-eta (v - u)} (1 - e^{-r u}) du
    const double eta = m.eta();
    auto k = [&](double v) -> cplx {
        if ((std::abs(r) + eta) * v < 0.5) {
            // v sum_{k>=1, j>=0} (-1)^{k+1} (-eta v)^j (r v)^k / (j+k+1)!
            const cplx z = r * v;
            const double e = -eta * v;
            cplx sum = 0.0;
            double fact = 1.0;  // (N+1)!
            for (int N = 1; N <= 24; ++N) {
                fact *= static_cast<double>(N + 1);
                cplx inner = 0.0, zk = z;
                for (int k = 1; k <= N; ++k) {
                    inner += (k % 2 ? 1.0 : -1.0) * std::pow(e, N - k) * zk;
                    zk *= z;
                }
                sum += inner / fact;
            }
            return v * sum;
        }
        cplx a = eta > 0 ? cplx(-std::expm1(-eta * v) / eta) : cplx(v);
        cplx c = eta - r;
        cplx b;
        if (std::abs(c * v) < 0.5) {
            // e^{-eta v} (e^{c v} - 1) / c by series
            cplx term = v, sum = 0.0;
            for (int j = 1; j < 30; ++j) {
                sum += term;
                term *= c * v / static_cast<double>(j + 1);
            }
            b = std::exp(-eta * v) * sum;
        } else {
            b = (std::exp(-r * v) - std::exp(-eta * v)) / c;
        }
        return a - b;
    };
    const auto& J = m.jumps();
    auto w = [&](double v) { return J.density(v) * (1.0 - m.mark_prob(v)); };
    auto re = [&](double v) { return w(v) * k(v).real(); };
    auto im = [&](double v) { return w(v) * k(v).imag(); };
    std::vector<double> pts{0.0};
    if (J.kind == JumpKind::TruncatedStable && J.cutoff > 0) pts.push_back(J.cutoff);
    if (J.kind == JumpKind::Tabulated) pts.insert(pts.end(), J.sizes.begin(), J.sizes.end());
    auto kink = detail::mark_kink(m);
    if (kink) pts.push_back(*kink);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() == 1) pts.push_back(1.0);
    double sr = 0.0, si = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (i == 0 && !J.finite_mass()) {
            // below 1/|r| the integrand is ~ v^{1-alpha}; above it ~ v^{-alpha}, done in log v
            double v0 = std::min(pts[1], 1.0 / std::abs(r));
            sr += num::integrate_singular_left(re, 0.0, v0, 2.0, 1e-11);
            si += num::integrate_singular_left(im, 0.0, v0, 2.0, 1e-11);
            if (v0 < pts[1]) {
                auto lre = [&](double t) { return re(std::exp(t)) * std::exp(t); };
                auto lim = [&](double t) { return im(std::exp(t)) * std::exp(t); };
                sr += num::integrate(lre, std::log(v0), std::log(pts[1]), 1e-11);
                si += num::integrate(lim, std::log(v0), std::log(pts[1]), 1e-11);
            }
        } else {
            sr += num::integrate(re, pts[i], pts[i + 1], 1e-11);
            si += num::integrate(im, pts[i], pts[i + 1], 1e-11);
        }
    }
    // beyond a full-mark kink nothing survives
    bool dead_tail = kink && m.mark_prob(*kink * 2.0) >= 1.0;
    if (!dead_tail && !(J.kind == JumpKind::Tabulated)) {
        sr += num::integrate(re, pts.back(), kInf, 1e-11);
        si += num::integrate(im, pts.back(), kInf, 1e-11);
    }
    return s + cplx(sr, si);
}

// U_*^{(l)} = atom at 0 plus a density.
struct Resolvent {
    double l = 0.0;
    double atom = 0.0;
    std::function<double(double)> density;
    double accuracy = 1e-12;  // relative, of the inverted density
    double singular_power = 3.0;  // substitution z = s^p near 0 for the transform
    double transform(double r) const;
};

inline Resolvent resolvent_U_star(const LevyModel& m, double l) {
    if (!(l > 0)) throw DomainError("resolvent_U_star: l must be positive");
    Resolvent R;
    R.l = l;
    // compound Poisson H*: time spent at 0 before the first jump
    if (m.b() == 0.0 && m.jumps().finite_mass() && m.jumps().kind != JumpKind::Zero) {
        double mstar = mu_mass(m, 0);
        R.atom = 1.0 / (l + mstar);
    }
    bool reduced = psi_star_analytic(m);
    double atom = R.atom;
    // infinite-mass stable: density ~ z^{alpha-2} at 0, smooth after z = s^{2/(alpha-1)}
    if (!m.jumps().finite_mass()) R.singular_power = 2.0 / (m.jumps().alpha - 1.0);
    if (m.b() > 0 && m.jumps().kind == JumpKind::Zero) {
        // H* is a pure drift b^2/2
        double d = 0.5 * m.b() * m.b();
        R.density = [l, d](double z) { return z < 0 ? 0.0 : std::exp(-l * z / d) / d; };
        return R;
    }
    if (reduced) {
        R.density = [m, l, atom](double z) {
            if (!(z > 0)) return 0.0;
            // with an atom removed the contour sum cancels badly for tiny z; the density is flat there
            if (atom > 0) z = std::max(z, 1e-6);
            double v = num::talbot([&](cplx s) { return 1.0 / (l + psi_star(m, s)) - atom; }, z, 24);
            if (!std::isfinite(v)) throw NumericError("resolvent_U_star: inversion failed at z=" + std::to_string(z));
            return std::max(v, 0.0);
        };
    } else {
        R.accuracy = 1e-7;
        R.density = [m, l, atom](double z) {
            if (!(z > 0)) return 0.0;
            double v = num::euler_inversion([&](cplx s) { return 1.0 / (l + psi_star(m, s)) - atom; }, z);
            if (!std::isfinite(v)) throw NumericError("resolvent_U_star: inversion failed at z=" + std::to_string(z));
            return std::max(v, 0.0);
        };
    }
    return R;
}

inline double resolvent_U_star(const LevyModel& m, double l, double z) { return resolvent_U_star(m, l).density(z); }

// int e^{-r z} U(dz), by quadrature of the inverted density.
inline double Resolvent::transform(double r) const {
    auto f = [&](double z) { return std::exp(-r * z) * density(z); };
    const double tol = std::max(1e-9, 10 * accuracy);
    double s = atom;
    s += atom > 0 ? num::integrate(f, 0.0, 1.0, tol) : num::integrate_singular_left(f, 0.0, 1.0, singular_power, tol);
    // doubling pieces; stop once the tail is negligible (the inverted density is noisy near 0)
    const double zmax = 60.0 / std::max(r, 0.05);
    for (double z = 1.0; z < zmax; z *= 2.0) {
        if (z * std::abs(f(z)) < std::max(1e-12, accuracy) * std::abs(s)) break;
        double piece = num::integrate(f, z, std::min(2.0 * z, zmax), tol, 4);
        s += piece;
        if (std::abs(piece) < std::max(1e-12, accuracy) * std::abs(s)) break;
    }
    return s;
}

// ---------------------------------------------------------------- pi

struct PiEstimate {
    double x = 0.0, tau = 0.0;
    std::vector<double> edges;   // bins on [0, tau - x]
    std::vector<double> mass;    // probability per bin
    std::vector<double> se;
    std::vector<double> values;  // record levels of the counted paths
    std::size_t sample_count = 0;
    std::size_t marked_count = 0;    // a marked record came first
    std::size_t overflow_count = 0;  // supremum passed tau - x unmarked
    std::uint64_t seed = 0;

    double total_mass() const { return sample_count ? static_cast<double>(values.size()) / static_cast<double>(sample_count) : 0.0; }
    double total_se() const {
        double p = total_mass();
        return sample_count ? std::sqrt(p * (1 - p) / static_cast<double>(sample_count)) : 0.0;
    }
    double overflow_mass() const { return sample_count ? static_cast<double>(overflow_count) / static_cast<double>(sample_count) : 0.0; }
    // histogram density at a
    double density(double a) const {
        if (edges.size() < 2 || a < edges.front() || a >= edges.back()) return 0.0;
        auto it = std::upper_bound(edges.begin(), edges.end(), a);
        std::size_t i = static_cast<std::size_t>(it - edges.begin()) - 1;
        return mass[i] / (edges[i + 1] - edges[i]);
    }
    double density_se(double a) const {
        if (edges.size() < 2 || a < edges.front() || a >= edges.back()) return 0.0;
        auto it = std::upper_bound(edges.begin(), edges.end(), a);
        std::size_t i = static_cast<std::size_t>(it - edges.begin()) - 1;
        return se[i] / (edges[i + 1] - edges[i]);
    }
};

// Monte Carlo pi from a pre-limit proxy: paths from 0 until T^{-x}; counted when no marked record
// comes first. Paths whose supremum passes tau - x are stopped and reported as overflow.
inline PiEstimate estimate_pi(const LevyModel& proxy, double x, double tau, std::size_t samples, std::uint64_t seed,
                              std::size_t bins = 40, unsigned threads = 1) {
    if (!(x > 0 && x < tau)) throw DomainError("estimate_pi: need 0 < x < tau");
    require_samplable(proxy);
    PiEstimate pi;
    pi.x = x;
    pi.tau = tau;
    pi.seed = seed;
    pi.sample_count = samples;
    auto rule = PathStopRule::first_of({PathStopRule::hit_level(-x), PathStopRule::cross_above(tau - x)});
    // 0: counted, 1: marked, 2: overflow
    std::vector<int> outcome(samples);
    std::vector<double> level(samples, 0.0);
    parallel_for(samples, threads, [&](std::size_t i) {
        Rng rng(seed, "pi", i);
        auto e = sample_path(proxy, 0.0, rule, rng);
        double sup = 0.0;
        int oc = 0;
        for (const auto& r : ladder_records(e)) {
            if (r.marked) {
                oc = 1;
                break;
            }
            sup = r.level;
        }
        if (oc == 0 && e.end_reason == EndReason::CrossedTau) oc = 2;
        outcome[i] = oc;
        level[i] = sup;
    });
    for (std::size_t i = 0; i < samples; ++i) {
        if (outcome[i] == 0) pi.values.push_back(level[i]);
        pi.marked_count += outcome[i] == 1;
        pi.overflow_count += outcome[i] == 2;
    }
    pi.edges = num::linspace(0.0, tau - x, bins + 1);
    pi.mass.assign(bins, 0.0);
    pi.se.assign(bins, 0.0);
    for (double v : pi.values) {
        std::size_t b = std::min<std::size_t>(bins - 1, static_cast<std::size_t>(v / (tau - x) * static_cast<double>(bins)));
        pi.mass[b] += 1.0;
    }
    const double N = static_cast<double>(samples);
    for (std::size_t b = 0; b < bins; ++b) {
        double p = pi.mass[b] / N;
        pi.mass[b] = p;
        pi.se[b] = std::sqrt(p * (1 - p) / N);
    }
    return pi;
}

// ---------------------------------------------------------------- first-mutation jump law

struct JumpLawValue {
    double atom_y0 = 0.0;     // coefficient of delta_0(dy)
    double atom_y0_se = 0.0;
    double density = 0.0;     // density in (z, y)
    double density_se = 0.0;
};

struct JumpLawContext {
    LevyModel model;
    double x = 0.0, tau = 0.0;
    double mark_rate_gauss = 0.0;  // theta + rho: marks without a jump
    double l = 0.0;                // lambda + k
    Resolvent U;
    const PiEstimate* pi = nullptr;
};

inline JumpLawContext make_jump_law_context(const LevyModel& m, double x, double tau, const PiEstimate* pi) {
    if (!pi) throw ContractError("jump_law_first_mutation: missing PiEstimate");
    if (!(x > 0 && x < tau)) throw DomainError("jump_law_first_mutation: x must lie in (0, tau)");
    auto L = ladder_measures(m);
    JumpLawContext c{m, x, tau, L.theta + L.rho, L.lambda_rate + L.kill_rate, Resolvent{}, pi};
    if (c.l > 0) c.U = resolvent_U_star(m, c.l);
    return c;
}

namespace detail {
inline double g_atom0(const LevyModel& m, double x, double a) {
    if (m.b() == 0.0) return 0.0;
    double y = x + a;
    return 0.5 * m.b() * m.b() * (scale_derivative(m, y) - m.eta() * scale_function(m, y));
}
}  // namespace detail

// P(H+(e-) in dz, dH+(e) in dy, L^{-1}(e) < T^{-x} < T^{(tau-x,inf)}), pi from Monte Carlo.
inline JumpLawValue jump_law_first_mutation(const JumpLawContext& c, double z, double y) {
    JumpLawValue v;
    if (c.l == 0.0) return v;  // no marks at all
    const auto& m = c.model;
    if (z < 0 || y < 0 || z + y > c.tau - c.x) return v;
    const double Wt = scale_function(m, c.tau);
    const auto& vals = c.pi->values;
    const double N = static_cast<double>(c.pi->sample_count);
    // bracket = u(z) - int pi(da) int U(dz - b) g^x(a, {0}, db - a), per sample
    double mean = 0.0, sq = 0.0;
    for (double a : vals) {
        if (a > z) continue;
        double t = detail::g_atom0(m, c.x, a) * c.U.density(z - a);
        if (m.jumps().kind != JumpKind::Zero) {
            auto g = g_x(m, c.x, a);
            auto f = [&](double w) { return g(w, 0) * c.U.density(z - a - w); };
            if (z - a > 0) t += num::integrate(f, 0.0, z - a, 1e-7);
        }
        mean += t;
        sq += t * t;
    }
    mean /= N;
    double var = std::max(0.0, sq / N - mean * mean) / N;
    double bracket = c.U.density(z) - mean;
    double bracket_se = std::sqrt(var);
    double surv = scale_function(m, c.tau - c.x - z - y) / Wt;
    v.atom_y0 = c.mark_rate_gauss * bracket * scale_function(m, c.tau - c.x - z) / Wt;
    v.atom_y0_se = c.mark_rate_gauss * bracket_se * scale_function(m, c.tau - c.x - z) / Wt;
    double muy = mu_density(m, y, 1);
    double g1 = 0.0;
    if (m.jumps().kind != JumpKind::Zero && !m.mutation().is_zero()) g1 = g_x(m, c.x, z)(y, 1);
    v.density = (muy * bracket - c.pi->density(z) * g1) * surv;
    v.density_se = std::hypot(muy * bracket_se, c.pi->density_se(z) * g1) * surv;
    return v;
}

struct PartitionMass {
    double nu_M = 0.0, nu_D = 0.0;
    double se = 0.0;  // of the sum
    double sum() const { return nu_M + nu_D; }
};

// Masses of nu^M(x, .) and nu^D(x, .), both normalised by P_x(T^0 < T^{(tau, inf)}).
inline PartitionMass nu_partition_mass(const JumpLawContext& c, std::size_t grid = 65) {
    const auto& m = c.model;
    const double x = c.x, tau = c.tau;
    const double span = tau - x;
    const double Wt = scale_function(m, tau);
    const double norm = scale_function(m, span) / Wt;
    // R(r): mark at the current height, then killed within r more depth (times W(tau))
    bool jumps = m.jumps().kind != JumpKind::Zero && !m.mutation().is_zero();
    auto R = [&](double r) {
        if (r < 0) return 0.0;
        double s = c.mark_rate_gauss * scale_function(m, r);
        if (jumps) s += num::integrate([&](double y) { return mu_density(m, y, 1) * scale_function(m, r - y); }, 0.0, r, 1e-8);
        return s;
    };
    // Kf(s) = int U(dt) R(s - t), tabulated on [0, span]
    auto grid_s = num::linspace(0.0, span, grid);
    std::vector<double> Kf(grid);
    for (std::size_t i = 0; i < grid; ++i) {
        double s = grid_s[i];
        double v = c.U.atom * R(s);
        if (s > 0 && c.l > 0) v += num::integrate_singular_left([&](double t) { return c.U.density(t) * R(s - t); }, 0.0, s, 3.0, 1e-8);
        Kf[i] = v;
    }
    auto Kfi = [&](double s) {
        if (s <= 0) return Kf[0] * (s == 0.0);
        double p = s / span * static_cast<double>(grid - 1);
        std::size_t i = std::min<std::size_t>(grid - 2, static_cast<std::size_t>(p));
        double f = p - static_cast<double>(i);
        return Kf[i] + f * (Kf[i + 1] - Kf[i]);
    };
    const double N = static_cast<double>(c.pi->sample_count);
    double head = c.l > 0 ? Kf.back() : 0.0;
    // per-sample correction depends on a only: tabulate it
    auto corr = [&](double a) {
        double t = 0.0;
        if (c.l > 0) {
            t -= detail::g_atom0(m, x, a) * Kfi(span - a);
            if (m.jumps().kind != JumpKind::Zero) {
                auto g = g_x(m, x, a);
                t -= num::integrate([&](double v) { return g(v, 0) * Kfi(span - a - v); }, 0.0, span - a, 1e-7);
                if (!m.mutation().is_zero())
                    t -= num::integrate([&](double v) { return g(v, 1) * scale_function(m, span - a - v); }, 0.0, span - a, 1e-7);
            }
        }
        return t;
    };
    std::vector<double> corr_tab(grid);
    for (std::size_t i = 0; i < grid; ++i) corr_tab[i] = corr(grid_s[i]);
    auto corri = [&](double a) {
        double p = a / span * static_cast<double>(grid - 1);
        std::size_t i = std::min<std::size_t>(grid - 2, static_cast<std::size_t>(p));
        double f = p - static_cast<double>(i);
        return corr_tab[i] + f * (corr_tab[i + 1] - corr_tab[i]);
    };
    double mean = 0.0, sq = 0.0;
    for (double a : c.pi->values) {
        if (a >= span) continue;
        double t = corri(a);
        t /= Wt;
        double d = 1.0;  // nu^D contribution before normalisation
        mean += d + t;
        sq += (d + t) * (d + t);
    }
    mean /= N;
    double var = std::max(0.0, sq / N - mean * mean) / N;
    PartitionMass pm;
    double dmass = 0.0;
    for (double a : c.pi->values) dmass += a < span;
    dmass /= N;
    pm.nu_D = dmass / norm;
    pm.nu_M = (head / Wt + mean - dmass) / norm;
    pm.se = std::sqrt(var) / norm;
    return pm;
}

// ---------------------------------------------------------------- transitions

struct ChainState {
    double depth;
    int mark;
    bool operator==(const ChainState&) const = default;
};

// Pre-limit kernel: depth path from x (same law as the model from x, killed at 0), rejected if it passes tau.
inline ChainState sample_transition_prelimit(const LevyModel& m, double x, double tau, Rng& rng) {
    auto rule = PathStopRule::first_of({PathStopRule::hit_level(0.0), PathStopRule::cross_above(tau)});
    for (int tries = 0; tries < 10'000'000; ++tries) {
        auto e = sample_path(m, x, rule, rng);
        if (e.end_reason == EndReason::CrossedTau) continue;
        double sup = x;
        for (const auto& r : ladder_records(e)) {
            if (r.marked) return {r.level, 1};
            sup = r.level;
        }
        return {sup, 0};
    }
    throw NumericError("sample_transition_prelimit: rejection loop did not terminate");
}

// Marks per unit depth along a Brownian lineage.
inline double brownian_beta_eff(const LevyModel& m) { return (m.ladder_theta() + m.rho()) / (0.5 * m.b() * m.b()); }

// Brownian limit kernel: K | K < tau = x/U, first mark at x + Exp(beta_eff).
inline ChainState sample_transition_brownian(const LevyModel& m, double x, double tau, Rng& rng) {
    double U = rng.uniform(x / tau, 1.0);
    double K = x / U;
    double beta = brownian_beta_eff(m);
    double M = beta > 0 ? x + rng.exponential(beta) : kInf;
    if (M < K) return {M, 1};
    return {K, 0};
}

}  // namespace sptree

#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "numerics.hpp"
#include "rng.hpp"

namespace sptree {

using num::cplx;

// ---------------------------------------------------------------- jump measures

enum class JumpKind { Zero, Exponential, TruncatedStable, Tabulated };

struct JumpMeasure {
    JumpKind kind = JumpKind::Zero;
    double weight = 0.0;  // Exponential: total mass. TruncatedStable: density multiplier.
    double rate = 0.0;    // Exponential
    double alpha = 0.0;   // TruncatedStable
    double cutoff = 0.0;  // TruncatedStable; 0 means the full (infinite mass) stable measure
    std::vector<double> sizes, dens;  // Tabulated, piecewise linear

    static JumpMeasure zero() { return {}; }
    static JumpMeasure exponential(double mass, double rate) {
        JumpMeasure j;
        j.kind = JumpKind::Exponential;
        j.weight = mass;
        j.rate = rate;
        if (!(mass >= 0) || !(rate > 0)) throw DomainError("exponential jump measure: need mass >= 0, rate > 0");
        return j;
    }
    static JumpMeasure stable(double alpha, double cutoff, double weight = 1.0) {
        if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("stable jump measure: alpha must lie in (1,2)");
        if (cutoff < 0) throw DomainError("stable jump measure: negative cutoff");
        JumpMeasure j;
        j.kind = JumpKind::TruncatedStable;
        j.alpha = alpha;
        j.cutoff = cutoff;
        j.weight = weight;
        return j;
    }
    static JumpMeasure tabulated(std::vector<std::pair<double, double>> pts) {
        JumpMeasure j;
        j.kind = JumpKind::Tabulated;
        if (pts.size() < 2) throw DomainError("tabulated jump measure: need at least two points");
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].first < 0 || pts[i].second < 0) throw DomainError("tabulated jump measure: negative entry");
            if (i && !(pts[i].first > pts[i - 1].first)) throw DomainError("tabulated jump measure: sizes must increase");
            j.sizes.push_back(pts[i].first);
            j.dens.push_back(pts[i].second);
        }
        return j;
    }

    // |Gamma(-alpha)|
    double stable_norm() const { return std::abs(std::tgamma(-alpha)); }

    bool finite_mass() const { return !(kind == JumpKind::TruncatedStable && cutoff == 0.0); }
    bool analytic_extension() const { return !(kind == JumpKind::TruncatedStable && cutoff > 0.0); }

    double total_mass() const {
        switch (kind) {
            case JumpKind::Zero: return 0.0;
            case JumpKind::Exponential: return weight;
            case JumpKind::TruncatedStable: return cutoff > 0 ? tail(cutoff) : kInf;
            case JumpKind::Tabulated: return tail(0.0);
        }
        return 0.0;
    }

    double density(double r) const {
        if (r <= 0) return 0.0;
        switch (kind) {
            case JumpKind::Zero: return 0.0;
            case JumpKind::Exponential: return weight * rate * std::exp(-rate * r);
            case JumpKind::TruncatedStable:
                return r > cutoff ? weight * std::pow(r, -alpha - 1.0) / stable_norm() : 0.0;
            case JumpKind::Tabulated: {
                if (r < sizes.front() || r > sizes.back()) return 0.0;
                auto it = std::upper_bound(sizes.begin(), sizes.end(), r);
                std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - sizes.begin()), sizes.size() - 1);
                double w = (r - sizes[i - 1]) / (sizes[i] - sizes[i - 1]);
                return dens[i - 1] + w * (dens[i] - dens[i - 1]);
            }
        }
        return 0.0;
    }

    // Lambda((x, inf))
    double tail(double x) const {
        x = std::max(x, 0.0);
        switch (kind) {
            case JumpKind::Zero: return 0.0;
            case JumpKind::Exponential: return weight * std::exp(-rate * x);
            case JumpKind::TruncatedStable: {
                double y = std::max(x, cutoff);
                if (y == 0.0) return kInf;
                return weight * std::pow(y, -alpha) / (alpha * stable_norm());
            }
            case JumpKind::Tabulated: {
                double s = 0.0;
                for (std::size_t i = 1; i < sizes.size(); ++i) {
                    double a = sizes[i - 1], b = sizes[i];
                    if (b <= x) continue;
                    double lo = std::max(a, x);
                    double dlo = density(lo);
                    if (lo == a) dlo = dens[i - 1];
                    s += 0.5 * (dlo + dens[i]) * (b - lo);
                }
                return s;
            }
        }
        return 0.0;
    }

    // int r Lambda(dr) restricted to r < 1 plus tail mass beyond 1; finite iff the measure is admissible.
    double small_jump_moment() const {
        auto f = [this](double r) { return std::min(1.0, r) * density(r); };
        switch (kind) {
            case JumpKind::Zero: return 0.0;
            case JumpKind::Tabulated: {
                std::vector<double> pts(sizes);
                if (sizes.front() < 1.0 && sizes.back() > 1.0) pts.push_back(1.0);
                std::sort(pts.begin(), pts.end());
                return num::integrate_split(f, pts);
            }
            default: return num::integrate(f, 0.0, 1.0) + tail(1.0);
        }
    }

    // int r Lambda(dr); infinite for the untruncated stable measure
    double first_moment() const {
        switch (kind) {
            case JumpKind::Zero: return 0.0;
            case JumpKind::Exponential: return weight / rate;
            case JumpKind::TruncatedStable:
                if (cutoff == 0.0) return kInf;
                return weight * std::pow(cutoff, 1.0 - alpha) / ((alpha - 1.0) * stable_norm());
            case JumpKind::Tabulated: {
                double s = 0.0;
                for (std::size_t i = 1; i < sizes.size(); ++i) {
                    double a = sizes[i - 1], b = sizes[i];
                    double B = (dens[i] - dens[i - 1]) / (b - a);
                    double A = dens[i - 1] - B * a;
                    s += A * (b * b - a * a) / 2.0 + B * (b * b * b - a * a * a) / 3.0;
                }
                return s;
            }
        }
        return 0.0;
    }

    // Lambda / |Lambda|
    double sample(Rng& rng) const {
        switch (kind) {
            case JumpKind::Zero: throw ContractError("sampling from the zero jump measure");
            case JumpKind::Exponential: return rng.exponential(rate);
            case JumpKind::TruncatedStable:
                if (cutoff <= 0) throw ContractError("sampling from an infinite jump measure");
                return cutoff * std::pow(rng.uniform(), -1.0 / alpha);
            case JumpKind::Tabulated: {
                double target = rng.uniform() * total_mass();
                double acc = 0.0;
                for (std::size_t i = 1; i < sizes.size(); ++i) {
                    double w = sizes[i] - sizes[i - 1];
                    double m = 0.5 * (dens[i - 1] + dens[i]) * w;
                    if (acc + m >= target || i + 1 == sizes.size()) {
                        double A = dens[i - 1], B = dens[i];
                        double u = rng.uniform();
                        double x;
                        if (std::abs(B - A) < 1e-12 * std::max(A, B))
                            x = u * w;
                        else
                            x = w * (-A + std::sqrt(A * A + (B * B - A * A) * u)) / (B - A);
                        return sizes[i - 1] + x;
                    }
                    acc += m;
                }
                return sizes.back();
            }
        }
        return 0.0;
    }

    // Jump part of the Laplace exponent: int (e^{-l r} - 1) Lambda(dr), compensated by +l r for the
    // infinite-mass stable measure.
    cplx exponent(cplx l) const {
        switch (kind) {
            case JumpKind::Zero: return 0.0;
            case JumpKind::Exponential: return -weight * l / (rate + l);
            case JumpKind::TruncatedStable:
                if (cutoff == 0.0) return weight * std::pow(l, alpha);
                if (l.imag() != 0.0) throw NumericError("truncated stable exponent has no analytic extension");
                return exponent_real(l.real());
            case JumpKind::Tabulated: {
                // exact integral of (A + B r)(e^{-l r} - 1) on each linear piece
                cplx s = 0.0;
                for (std::size_t i = 1; i < sizes.size(); ++i) {
                    double a = sizes[i - 1], b = sizes[i];
                    double B = (dens[i] - dens[i - 1]) / (b - a);
                    double A = dens[i - 1] - B * a;
                    // J0 = int (e^{-l r} - 1) dr, J1 = int r (e^{-l r} - 1) dr over [a, b]
                    cplx J0, J1;
                    if (std::abs(l) * b < 0.5) {
                        // series; the closed form cancels badly here
                        cplx term = 1.0;
                        for (int j = 1; j <= 24; ++j) {
                            term *= -l / static_cast<double>(j);
                            J0 += term * (std::pow(b, j + 1) - std::pow(a, j + 1)) / static_cast<double>(j + 1);
                            J1 += term * (std::pow(b, j + 2) - std::pow(a, j + 2)) / static_cast<double>(j + 2);
                        }
                    } else {
                        cplx ea = std::exp(-l * a), eb = std::exp(-l * b);
                        J0 = (ea - eb) / l - (b - a);
                        J1 = (a * ea - b * eb) / l + (ea - eb) / (l * l) - (b * b - a * a) / 2.0;
                    }
                    s += A * J0 + B * J1;
                }
                return s;
            }
        }
        return 0.0;
    }

    double exponent_real(double l) const {
        if (kind == JumpKind::TruncatedStable && cutoff > 0.0) {
            if (l == 0.0) return 0.0;
            // int_c^inf (e^{-l r} - 1) r^{-a-1} dr = l^a Gamma(-a, l c) - c^{-a}/a
            double v = std::pow(l, alpha) * num::upper_gamma_neg(-alpha, l * cutoff) - std::pow(cutoff, -alpha) / alpha;
            return weight * v / stable_norm();
        }
        return exponent(cplx(l, 0.0)).real();
    }

    // Lambda-tilde = d_n Lambda(n .)
    JumpMeasure rescaled(double n, double dn) const {
        JumpMeasure j = *this;
        switch (kind) {
            case JumpKind::Zero: break;
            case JumpKind::Exponential:
                j.weight = weight * dn;
                j.rate = rate * n;
                break;
            case JumpKind::TruncatedStable:
                j.weight = weight * dn * std::pow(n, -alpha);
                j.cutoff = cutoff / n;
                break;
            case JumpKind::Tabulated:
                for (auto& s : j.sizes) s /= n;
                for (auto& d : j.dens) d *= dn * n;
                break;
        }
        return j;
    }
};

// ---------------------------------------------------------------- mutation functions

enum class MutationKind { Zero, Constant, LinearCapped };

struct MutationFunction {
    MutationKind kind = MutationKind::Zero;
    double param = 0.0;  // theta_n or slope
    double scale = 1.0;  // evaluated at scale * size (rescaled models keep f_n(n r))

    static MutationFunction zero() { return {}; }
    static MutationFunction constant(double theta) {
        if (theta < 0 || theta > 1) throw DomainError("constant mutation probability outside [0,1]");
        return {MutationKind::Constant, theta, 1.0};
    }
    static MutationFunction linear_capped(double slope) {
        if (slope < 0) throw DomainError("negative mutation slope");
        return {MutationKind::LinearCapped, slope, 1.0};
    }

    double operator()(double size) const {
        switch (kind) {
            case MutationKind::Zero: return 0.0;
            case MutationKind::Constant: return param;
            case MutationKind::LinearCapped: return std::min(1.0, param * scale * size);
        }
        return 0.0;
    }
    bool is_zero() const { return kind == MutationKind::Zero || param == 0.0; }
    // slope of f at 0 in model units
    double kappa() const { return kind == MutationKind::LinearCapped ? param * scale : 0.0; }
};

// ---------------------------------------------------------------- models

enum class ScaleMethod { Auto, ClosedForm, Talbot, Renewal };
enum class ClosedFormKind { None, Brownian, CriticalExponential, Stable };

struct ModelSpec {
    double drift = 0.0;  // velocity of the linear part; pre-limit models use -c < 0
    double gaussian_b = 0.0;
    JumpMeasure jumps;
    MutationFunction mutation;
    double ladder_theta = 0.0;  // B.1 limit models: Poisson mark rate per unit ladder local time
    std::string label;
};

struct RenewalTable {
    double h = 0.0;
    std::vector<double> w;
};

class LevyModel {
public:
    LevyModel() : LevyModel(ModelSpec{0.0, 1.0, JumpMeasure::zero(), MutationFunction::zero(), 0.0, "brownian"}) {}
    explicit LevyModel(ModelSpec s) : spec_(std::move(s)) {
        if (spec_.gaussian_b < 0) throw DomainError("gaussian coefficient must be >= 0");
        if (spec_.jumps.kind == JumpKind::Tabulated && !std::isfinite(spec_.jumps.small_jump_moment()))
            throw DomainError("tabulated jump measure violates int (1 ^ r) Lambda(dr) < inf");
        closed_ = detect_closed_form();
        eta_ = compute_eta();
        renewal_ = std::make_shared<RenewalCache>();
    }

    const ModelSpec& spec() const { return spec_; }
    double drift() const { return spec_.drift; }
    double b() const { return spec_.gaussian_b; }
    const JumpMeasure& jumps() const { return spec_.jumps; }
    const MutationFunction& mutation() const { return spec_.mutation; }
    double ladder_theta() const { return spec_.ladder_theta; }
    double eta() const { return eta_; }
    ClosedFormKind closed_form() const { return closed_; }
    const std::string& label() const { return spec_.label; }

    bool finite_variation() const { return spec_.gaussian_b == 0.0 && spec_.jumps.finite_mass(); }
    // pre-limit: exact path simulation possible
    bool samplable() const {
        return finite_variation() && spec_.drift < 0.0;
    }
    bool analytics_only() const { return !samplable(); }
    double jump_mass() const { return spec_.jumps.total_mass(); }
    double mark_prob(double size) const { return spec_.mutation(size); }
    // B.2 Gaussian mark rate rho = kappa b^2
    double rho() const { return spec_.mutation.kappa() * spec_.gaussian_b * spec_.gaussian_b; }

    cplx psi(cplx l) const {
        return -spec_.drift * l + 0.5 * spec_.gaussian_b * spec_.gaussian_b * l * l + spec_.jumps.exponent(l);
    }
    double psi(double l) const {
        return -spec_.drift * l + 0.5 * spec_.gaussian_b * spec_.gaussian_b * l * l + spec_.jumps.exponent_real(l);
    }

    // psi'(0+) when positive, i.e. 1/W(inf); 0 for critical and supercritical models
    double kill_rate() const {
        if (eta_ > 0.0) return 0.0;
        if (spec_.jumps.kind == JumpKind::TruncatedStable && spec_.jumps.cutoff == 0.0) return std::max(0.0, -spec_.drift);
        double k = -spec_.drift - spec_.jumps.first_moment();
        return k > 1e-10 * std::max(1.0, std::abs(spec_.drift)) ? k : 0.0;
    }

    // W(0): 1/c for finite variation, 0 otherwise
    double scale_at_zero() const { return finite_variation() ? -1.0 / spec_.drift : 0.0; }

    const RenewalTable& renewal_table(double xmax) const {
        std::lock_guard<std::mutex> lk(renewal_->m);
        if (!renewal_->table || renewal_->xmax < xmax) {
            renewal_->xmax = std::max(xmax, 2.0 * renewal_->xmax);
            renewal_->table = std::make_shared<RenewalTable>(build_renewal(renewal_->xmax));
        }
        return *renewal_->table;
    }

private:
    struct RenewalCache {
        std::mutex m;
        double xmax = 0.0;
        std::shared_ptr<RenewalTable> table;
    };

    ClosedFormKind detect_closed_form() const {
        const auto& j = spec_.jumps;
        double b = spec_.gaussian_b;
        if (b > 0 && j.kind == JumpKind::Zero && spec_.drift == 0.0) return ClosedFormKind::Brownian;
        if (b == 0 && j.kind == JumpKind::Exponential && spec_.drift < 0) {
            double c = -spec_.drift;
            if (std::abs(c - j.weight / j.rate) <= 1e-12 * c) return ClosedFormKind::CriticalExponential;
        }
        if (b == 0 && j.kind == JumpKind::TruncatedStable && j.cutoff == 0.0 && spec_.drift == 0.0)
            return ClosedFormKind::Stable;
        return ClosedFormKind::None;
    }

    double compute_eta() const {
        if (closed_ != ClosedFormKind::None) return 0.0;
        // convex, psi(0) = 0: eta > 0 iff psi dips below zero somewhere
        double hi = 1.0;
        int guard = 0;
        while (psi(hi) <= 0.0) {
            hi *= 2.0;
            if (++guard > 200) throw NumericError("largest_root_eta: psi never becomes positive");
        }
        auto [arg, val] = num::minimize([this](double l) { return psi(l); }, 0.0, hi);
        double scale = std::max({std::abs(psi(hi)), 1e-300});
        if (!(val < -1e-14 * scale) || arg <= 0.0) return 0.0;
        return num::solve_bracketed([this](double l) { return psi(l); }, arg, hi, 1e-14);
    }

    RenewalTable build_renewal(double xmax) const {
        if (!finite_variation() || spec_.drift >= 0)
            throw NumericError("renewal scale function needs a finite-variation model with negative drift");
        const double c = -spec_.drift;
        const std::size_t N = 4000;
        RenewalTable t;
        t.h = xmax / static_cast<double>(N);
        std::vector<double> tail(N + 1);
        for (std::size_t k = 0; k <= N; ++k) tail[k] = spec_.jumps.tail(static_cast<double>(k) * t.h);
        t.w.assign(N + 1, 0.0);
        t.w[0] = 1.0 / c;
        for (std::size_t k = 1; k <= N; ++k) {
            double s = 0.5 * tail[k] * t.w[0];
            for (std::size_t j = 1; j < k; ++j) s += tail[j] * t.w[k - j];
            t.w[k] = (1.0 + t.h * s) / (c - 0.5 * t.h * tail[0]);
        }
        return t;
    }

    ModelSpec spec_;
    ClosedFormKind closed_ = ClosedFormKind::None;
    double eta_ = 0.0;
    std::shared_ptr<RenewalCache> renewal_;
};

// ---------------------------------------------------------------- rescaling

struct RescalingScheme {
    double n = 1.0;
    double d_n = 1.0;

    double time_factor() const { return d_n / n; }
    // (d_n/n) theta_n under B.1
    double theta(const MutationFunction& base) const {
        return base.kind == MutationKind::Constant ? base.param * d_n / n : 0.0;
    }
    // kappa with f_n(n u) = min(1, kappa u)
    double kappa(const MutationFunction& base) const {
        return base.kind == MutationKind::LinearCapped ? base.param * n : 0.0;
    }
    double rho(const MutationFunction& base, double b) const { return kappa(base) * b * b; }
};

inline double dn_rule(const std::string& rule, double n, double alpha = 1.5) {
    if (rule == "n2_over_2") return n * n / 2.0;
    if (rule == "n_pow_alpha") return std::pow(n, alpha);
    throw DomainError("unknown d_n rule: " + rule);
}

// ---------------------------------------------------------------- operations

inline double laplace_exponent(const LevyModel& m, double lambda) {
    if (lambda < 0) throw DomainError("laplace_exponent: lambda must be >= 0");
    return m.psi(lambda);
}

inline double largest_root_eta(const LevyModel& m) { return m.eta(); }

inline double inverse_phi(const LevyModel& m, double q) {
    if (q < 0) throw DomainError("inverse_phi: q must be >= 0");
    double lo = m.eta();
    if (q == 0.0) return lo;
    double hi = std::max(1.0, 2.0 * lo);
    int guard = 0;
    while (m.psi(hi) < q) {
        hi *= 2.0;
        if (++guard > 400) throw NumericError("inverse_phi: bracket search failed");
    }
    return num::solve_bracketed([&](double l) { return m.psi(l) - q; }, lo, hi, 1e-14);
}

namespace detail {
inline double closed_form_W(const LevyModel& m, double x) {
    switch (m.closed_form()) {
        case ClosedFormKind::Brownian: return 2.0 * x / (m.b() * m.b());
        case ClosedFormKind::CriticalExponential: {
            double c = -m.drift();
            return 1.0 / c + m.jumps().rate * x / c;
        }
        case ClosedFormKind::Stable:
            return std::pow(x, m.jumps().alpha - 1.0) / (m.jumps().weight * std::tgamma(m.jumps().alpha));
        default: break;
    }
    throw ContractError("no closed form registered for this model");
}
inline double closed_form_Wprime(const LevyModel& m, double x) {
    switch (m.closed_form()) {
        case ClosedFormKind::Brownian: return 2.0 / (m.b() * m.b());
        case ClosedFormKind::CriticalExponential: return m.jumps().rate / (-m.drift());
        case ClosedFormKind::Stable: {
            double a = m.jumps().alpha;
            return (a - 1.0) * std::pow(x, a - 2.0) / (m.jumps().weight * std::tgamma(a));
        }
        default: break;
    }
    throw ContractError("no closed form registered for this model");
}
}  // namespace detail

inline ScaleMethod resolve_scale_method(const LevyModel& m, ScaleMethod method) {
    if (method != ScaleMethod::Auto) return method;
    if (m.closed_form() != ClosedFormKind::None) return ScaleMethod::ClosedForm;
    if (m.jumps().analytic_extension()) return ScaleMethod::Talbot;
    return ScaleMethod::Renewal;
}

inline double scale_function(const LevyModel& m, double x, ScaleMethod method = ScaleMethod::Auto, int nodes = 32) {
    if (x < 0) return 0.0;
    method = resolve_scale_method(m, method);
    switch (method) {
        case ScaleMethod::ClosedForm: return detail::closed_form_W(m, x);
        case ScaleMethod::Talbot: {
            if (x == 0.0) return m.scale_at_zero();
            if (!m.jumps().analytic_extension()) throw NumericError("scale_function: psi has no analytic extension for Talbot inversion");
            const double eta = m.eta();
            double v = num::talbot(
                           [&](cplx s) {
                               cplx p = m.psi(s + eta);
                               // bounded-support jumps overflow far left on the contour, where 1/psi is negligible
                               return std::isfinite(std::abs(p)) ? 1.0 / p : cplx(0.0);
                           },
                           x, nodes) * std::exp(eta * x);
            if (!std::isfinite(v) || v < -1e-8) {
                throw NumericError("scale_function: Talbot inversion unstable at x=" + std::to_string(x) +
                                   " (value " + std::to_string(v) + ", nodes " + std::to_string(nodes) + ")");
            }
            return std::max(v, 0.0);
        }
        case ScaleMethod::Renewal: {
            const auto& t = m.renewal_table(std::max(2.0 * x, 10.0));
            double pos = x / t.h;
            std::size_t i = static_cast<std::size_t>(pos);
            if (i + 1 >= t.w.size()) return t.w.back();
            double f = pos - static_cast<double>(i);
            return t.w[i] + f * (t.w[i + 1] - t.w[i]);
        }
        case ScaleMethod::Auto: break;
    }
    return 0.0;
}

inline double scale_derivative(const LevyModel& m, double x, ScaleMethod method = ScaleMethod::Auto) {
    if (x < 0) return 0.0;
    if (resolve_scale_method(m, method) == ScaleMethod::ClosedForm) return detail::closed_form_Wprime(m, x);
    double h = 1e-4 * std::max(x, 1e-2);
    if (x - h <= 0) return (scale_function(m, x + h, method) - scale_function(m, x, method)) / h;
    return (scale_function(m, x + h, method) - scale_function(m, x - h, method)) / (2.0 * h);
}

// 1 - W(x - w)/W(x) without cancellation for small w.
inline double scale_defect(const LevyModel& m, double x, double w) {
    if (w <= 0.0) return 0.0;
    if (w >= x) return 1.0;
    switch (m.closed_form()) {
        case ClosedFormKind::Brownian:
        case ClosedFormKind::CriticalExponential: return w * detail::closed_form_Wprime(m, x) / detail::closed_form_W(m, x);
        case ClosedFormKind::Stable: return -std::expm1((m.jumps().alpha - 1.0) * std::log1p(-w / x));
        default: break;
    }
    return 1.0 - scale_function(m, x - w) / scale_function(m, x);
}

inline LevyModel rescale(const LevyModel& base, const RescalingScheme& s) {
    if (!base.finite_variation() || base.drift() >= 0) throw ContractError("rescale: base must be a pre-limit model");
    ModelSpec r = base.spec();
    r.drift = base.drift() * s.d_n / s.n;
    r.jumps = base.jumps().rescaled(s.n, s.d_n);
    r.mutation.scale = base.mutation().scale * s.n;
    r.label = base.label() + " rescaled(n=" + std::to_string(s.n) + ")";
    return LevyModel(std::move(r));
}

// ---------------------------------------------------------------- named models

inline LevyModel brownian_model(double b = 1.0, double theta = 0.0, double kappa = 0.0) {
    ModelSpec s;
    s.gaussian_b = b;
    s.ladder_theta = theta;
    s.mutation = kappa > 0 ? MutationFunction::linear_capped(kappa) : MutationFunction::zero();
    s.label = "brownian";
    return LevyModel(std::move(s));
}

inline LevyModel stable_limit_model(double alpha, double theta = 0.0, double kappa = 0.0) {
    ModelSpec s;
    s.jumps = JumpMeasure::stable(alpha, 0.0);
    s.ladder_theta = theta;
    s.mutation = kappa > 0 ? MutationFunction::linear_capped(kappa) : MutationFunction::zero();
    s.label = "stable";
    return LevyModel(std::move(s));
}

// Lambda_n = e^{-r} dr, drift -1
inline LevyModel exponential_base_model(MutationFunction f = MutationFunction::zero()) {
    ModelSpec s;
    s.drift = -1.0;
    s.jumps = JumpMeasure::exponential(1.0, 1.0);
    s.mutation = f;
    s.label = "exponential";
    return LevyModel(std::move(s));
}

// Lambda_n = r^{-alpha-1}/|Gamma(-alpha)| 1_{r>1} dr, drift -1
inline LevyModel stable_base_model(double alpha, MutationFunction f = MutationFunction::zero()) {
    ModelSpec s;
    s.drift = -1.0;
    s.jumps = JumpMeasure::stable(alpha, 1.0);
    s.mutation = f;
    s.label = "truncated-stable";
    return LevyModel(std::move(s));
}

// Example-1 family: rescaled critical exponential model with d_n = n^2/2.
inline LevyModel example1_model(double n, MutationFunction base_f = MutationFunction::zero(), double dn = -1.0) {
    if (dn <= 0) dn = n * n / 2.0;
    return rescale(exponential_base_model(base_f), RescalingScheme{n, dn});
}

}  // namespace sptree

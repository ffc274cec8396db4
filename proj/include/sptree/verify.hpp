#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/statistics/bivariate_statistics.hpp>

#include "genealogy.hpp"
#include "kernels.hpp"
#include "levy_core.hpp"
#include "parallel.hpp"

namespace sptree {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TestReport {
    std::string name;
    std::string statistic_name;
    double statistic = 0.0;
    double p_value = std::numeric_limits<double>::quiet_NaN();
    double threshold = 0.01;
    std::vector<std::size_t> sample_sizes;
    std::vector<std::uint64_t> seeds;
    bool pass = false;
    std::vector<std::string> artifacts;
    std::vector<std::string> notes;
    std::map<std::string, double> extra;
};

// ---------------------------------------------------------------- KS

// P(sqrt(n) D > lambda) asymptotically, with Stephens' small-sample correction
inline double kolmogorov_q(double lambda) {
    if (lambda < 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double t = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? 2.0 : -2.0) * t;
        if (t < 1e-17) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

inline double ks_pvalue(double D, double ne) {
    double r = std::sqrt(ne);
    return kolmogorov_q((r + 0.12 + 0.11 / r) * D);
}

inline void check_finite(const std::vector<double>& v) {
    for (double x : v)
        if (std::isnan(x)) throw DataError("NaN in sample");
}

inline TestReport ks_test(std::vector<double> samples, const std::function<double(double)>& cdf, double threshold = 0.01,
                          std::string name = "ks") {
    check_finite(samples);
    if (samples.size() < 100) throw DataError("ks_test: need at least 100 samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double D = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double F = cdf(samples[i]);
        D = std::max({D, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
    }
    TestReport r;
    r.name = std::move(name);
    r.statistic_name = "D";
    r.statistic = D;
    r.p_value = ks_pvalue(D, n);
    r.threshold = threshold;
    r.sample_sizes = {samples.size()};
    r.pass = r.p_value > threshold;
    return r;
}

inline TestReport ks_two_sample(std::vector<double> a, std::vector<double> b, double threshold = 0.01, std::string name = "ks2") {
    check_finite(a);
    check_finite(b);
    if (a.empty() || b.empty()) throw DataError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double D = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        D = std::max(D, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    TestReport r;
    r.name = std::move(name);
    r.statistic_name = "D";
    r.statistic = D;
    r.p_value = ks_pvalue(D, na * nb / (na + nb));
    r.threshold = threshold;
    r.sample_sizes = {a.size(), b.size()};
    r.pass = r.p_value > threshold;
    return r;
}

// ---------------------------------------------------------------- chi-square

inline double chi2_sf(double x, double dof) {
    if (dof <= 0) return 1.0;
    if (x <= 0) return 1.0;
    boost::math::chi_squared_distribution<double> d(dof);
    return boost::math::cdf(boost::math::complement(d, x));
}

// Adjacent bins are merged until every expected count is >= min_expected.
inline TestReport chi_square_counts(const std::vector<double>& observed, const std::vector<double>& expected,
                                    int fitted_params = 0, double threshold = 0.01, double min_expected = 5.0,
                                    std::string name = "chi2") {
    if (observed.size() != expected.size()) throw DataError("chi_square_counts: size mismatch");
    double etot = std::accumulate(expected.begin(), expected.end(), 0.0);
    if (!(etot > 0)) throw DataError("chi_square_counts: all-zero expectation");
    std::vector<double> o, e;
    double co = 0, ce = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        co += observed[i];
        ce += expected[i];
        if (ce >= min_expected) {
            o.push_back(co);
            e.push_back(ce);
            co = ce = 0;
        }
    }
    if (ce > 0 || co > 0) {
        if (e.empty()) {
            o.push_back(co);
            e.push_back(ce);
        } else {
            o.back() += co;
            e.back() += ce;
        }
    }
    double stat = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) stat += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
    double dof = static_cast<double>(o.size()) - 1.0 - fitted_params;
    TestReport r;
    r.name = std::move(name);
    r.statistic_name = "chi2";
    r.statistic = stat;
    r.p_value = dof > 0 ? chi2_sf(stat, dof) : (stat == 0.0 ? 1.0 : 0.0);
    r.threshold = threshold;
    r.extra["dof"] = dof;
    r.extra["bins"] = static_cast<double>(o.size());
    r.pass = r.p_value > threshold;
    return r;
}

// Independence in a contingency table (rows x cols); sparse rows/cols are dropped.
inline TestReport chi_square_independence(const std::vector<std::vector<double>>& table, double threshold = 0.01,
                                          std::string name = "chi2-independence") {
    std::size_t R = table.size(), C = R ? table[0].size() : 0;
    std::vector<double> rs(R, 0.0), cs(C, 0.0);
    double tot = 0.0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            rs[i] += table[i][j];
            cs[j] += table[i][j];
            tot += table[i][j];
        }
    if (!(tot > 0)) throw DataError("chi_square_independence: empty table");
    double stat = 0.0;
    std::size_t rr = 0, cc = 0;
    for (double v : rs) rr += v > 0;
    for (double v : cs) cc += v > 0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            if (rs[i] == 0 || cs[j] == 0) continue;
            double e = rs[i] * cs[j] / tot;
            stat += (table[i][j] - e) * (table[i][j] - e) / e;
        }
    double dof = (static_cast<double>(rr) - 1.0) * (static_cast<double>(cc) - 1.0);
    TestReport r;
    r.name = std::move(name);
    r.statistic_name = "chi2";
    r.statistic = stat;
    r.p_value = chi2_sf(stat, dof);
    r.threshold = threshold;
    r.extra["dof"] = dof;
    r.pass = r.p_value > threshold;
    return r;
}

// ---------------------------------------------------------------- helpers

inline double mean_of(const std::vector<double>& v) { return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

inline double se_of_mean(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DataError("spearman: need two equal-length series of length >= 2");
    auto rx = ranks(x), ry = ranks(y);
    return boost::math::statistics::correlation_coefficient(rx, ry);
}

inline double lag1_autocorrelation(const std::vector<double>& v) {
    if (v.size() < 3) return 0.0;
    std::vector<double> a(v.begin(), v.end() - 1), b(v.begin() + 1, v.end());
    return boost::math::statistics::correlation_coefficient(a, b);
}

// Total variation between two probability vectors.
inline double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw DataError("tv_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

// ---------------------------------------------------------------- convergence

struct ConvergenceRow {
    double n;
    double distance;
    double se;
};

// distances along increasing n must trend down: Spearman rho(n, distance) < 0
inline TestReport convergence_table(const std::string& functional, const std::vector<double>& n_list,
                                    const std::function<ConvergenceRow(double)>& eval, std::vector<ConvergenceRow>* rows_out = nullptr) {
    TestReport r;
    r.name = "convergence:" + functional;
    r.statistic_name = "spearman_rho";
    std::vector<ConvergenceRow> rows;
    for (double n : n_list) rows.push_back(eval(n));
    if (rows_out) *rows_out = rows;
    for (const auto& row : rows) r.extra["distance_n" + std::to_string(static_cast<long long>(row.n))] = row.distance;
    if (rows.size() < 2) {
        r.pass = true;
        r.statistic = 0.0;
        r.notes.push_back("warning: single n, trend test is vacuous");
        return r;
    }
    std::vector<double> ns, ds;
    for (const auto& row : rows) {
        ns.push_back(row.n);
        ds.push_back(row.distance);
    }
    r.statistic = spearman(ns, ds);
    r.threshold = 0.0;
    r.pass = r.statistic < 0.0;
    return r;
}

inline double scale_sup_error(const LevyModel& pre, const LevyModel& lim, double xmax = 5.0, std::size_t points = 501) {
    double e = 0.0;
    for (double x : num::linspace(0.0, xmax, points)) e = std::max(e, std::abs(scale_function(pre, x) - scale_function(lim, x)));
    return e;
}

// ---------------------------------------------------------------- nu-init cross-check

struct NuInitCheckConfig {
    LevyModel model;  // pre-limit, rescaled
    double tau = 1.0, eps = 0.1;
    std::size_t samples = 100000;
    std::size_t bins = 50;
    double threshold = 0.02;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    bool exact_upsilon = true;  // false: full excursions filtered on depth >= eps
};

struct NuInitCheck {
    TestReport report;
    std::vector<double> edges;
    std::vector<double> mc[2], formula[2];
};

// bin masses of nu_init on [eps, tau) for each mark
inline void nu_init_bin_masses(const AtomicDensity& nu, const std::vector<double>& edges, std::vector<double> out[2]) {
    for (int q = 0; q < 2; ++q) {
        out[q].assign(edges.size() - 1, 0.0);
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) out[q][b] = nu.density_mass(q, edges[b], edges[b + 1]);
    }
    for (const auto& a : nu.atoms) {
        if (a.at_infinity()) continue;
        auto it = std::upper_bound(edges.begin(), edges.end(), a.location);
        std::size_t b = std::min<std::size_t>(edges.size() - 2, static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - edges.begin() - 1)));
        out[a.mark][b] += a.weight;
    }
}

inline NuInitCheck cross_check_nu_init(const NuInitCheckConfig& cfg) {
    NuInitCheck out;
    out.edges = num::linspace(cfg.eps, cfg.tau, cfg.bins + 1);
    std::vector<Upsilon> ups(cfg.samples);
    if (cfg.exact_upsilon) {
        parallel_for(cfg.samples, cfg.threads, [&](std::size_t i) {
            Rng rng(cfg.seed, "upsilon", i);
            ups[i] = sample_upsilon(cfg.model, cfg.tau, cfg.eps, rng);
        });
    } else {
        Rng rng(cfg.seed, "upsilon-full", 0);
        std::size_t k = 0;
        while (k < cfg.samples) {
            auto e = sample_excursion_below_tau(cfg.model, cfg.tau, rng);
            if (auto u = upsilon_of(e, cfg.tau, cfg.eps)) ups[k++] = *u;
        }
    }
    for (int q = 0; q < 2; ++q) out.mc[q].assign(cfg.bins, 0.0);
    for (const auto& u : ups) {
        std::size_t b = std::min<std::size_t>(cfg.bins - 1, static_cast<std::size_t>((u.depth - cfg.eps) / (cfg.tau - cfg.eps) * static_cast<double>(cfg.bins)));
        out.mc[u.marked ? 1 : 0][b] += 1.0 / static_cast<double>(cfg.samples);
    }
    auto nu = nu_init(cfg.model, cfg.eps, cfg.tau);
    nu_init_bin_masses(nu, out.edges, out.formula);
    std::vector<double> p, q;
    for (int m = 0; m < 2; ++m) {
        p.insert(p.end(), out.mc[m].begin(), out.mc[m].end());
        q.insert(q.end(), out.formula[m].begin(), out.formula[m].end());
    }
    auto& r = out.report;
    r.name = "nu_init_cross_check";
    r.statistic_name = "TV";
    r.statistic = tv_distance(p, q);
    r.threshold = cfg.threshold;
    r.sample_sizes = {cfg.samples};
    r.seeds = {cfg.seed};
    r.pass = r.statistic < cfg.threshold;
    double m1 = 0, f1 = 0;
    for (std::size_t b = 0; b < cfg.bins; ++b) {
        m1 += out.mc[1][b];
        f1 += out.formula[1][b];
    }
    r.extra["mc_mark1_mass"] = m1;
    r.extra["formula_mark1_mass"] = f1;
    r.extra["formula_total_mass"] = std::accumulate(q.begin(), q.end(), 0.0);
    return out;
}

// ---------------------------------------------------------------- replicate gate

struct SeedGate {
    std::vector<TestReport> runs;
    std::size_t required = 4;
    bool pass() const {
        std::size_t k = 0;
        for (const auto& r : runs) k += r.pass;
        return k >= required;
    }
    std::size_t passes() const {
        std::size_t k = 0;
        for (const auto& r : runs) k += r.pass;
        return k;
    }
};

}  // namespace sptree

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "genealogy.hpp"
#include "kernels.hpp"
#include "levy_core.hpp"
#include "limit_process.hpp"
#include "parallel.hpp"
#include "verify.hpp"

namespace sptree::acceptance {

struct Options {
    std::uint64_t base_seed = 1;
    std::size_t seeds = 5;
    std::size_t required = 4;
    unsigned threads = 0;  // 0: all cores
};

struct Outcome {
    int id = 0;
    std::string title;
    bool stochastic = true;
    std::vector<TestReport> runs;  // one per seed, or a single deterministic run
    std::size_t required = 1;
    std::size_t passes() const {
        std::size_t k = 0;
        for (const auto& r : runs) k += r.pass;
        return k;
    }
    bool pass() const { return passes() >= required; }
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream o;
    o.precision(6);
    o << v;
    return o.str();
}

inline std::vector<std::uint64_t> seed_list(const Options& o) {
    std::vector<std::uint64_t> s;
    for (std::size_t k = 0; k < o.seeds; ++k) s.push_back(o.base_seed + k);
    return s;
}

inline Outcome gate(int id, std::string title, const Options& o, const std::function<TestReport(std::uint64_t)>& run) {
    Outcome out;
    out.id = id;
    out.title = std::move(title);
    out.required = std::min(o.required, o.seeds);
    for (auto s : seed_list(o)) {
        auto r = run(s);
        r.seeds = {s};
        out.runs.push_back(std::move(r));
    }
    return out;
}

inline Outcome single(int id, std::string title, TestReport r) {
    Outcome out;
    out.id = id;
    out.title = std::move(title);
    out.stochastic = false;
    out.runs.push_back(std::move(r));
    return out;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

// coalescence depths of `count` independent excursions below tau
inline std::vector<LineageMeasure> lineages(const LevyModel& m, double tau, std::size_t count, std::uint64_t seed,
                                            const std::string& stream, unsigned threads) {
    std::vector<LineageMeasure> out(count);
    parallel_for(count, threads, [&](std::size_t i) {
        Rng rng(seed, stream, i);
        out[i] = extract_lineage_measure(sample_excursion_below_tau(m, tau, rng), tau);
    });
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------- 1

inline Outcome criterion1(const Options&) {
    TestReport r;
    r.name = "C1.scale_function_oracle";
    r.statistic_name = "max_rel_err";
    r.threshold = 1e-6;
    auto grid = num::linspace(0.1, 5.0, 50);
    double worst = 0.0;
    auto track = [&](const std::string& key, const LevyModel& m, const std::function<double(double)>& exact) {
        double e = 0.0;
        for (double x : grid) e = std::max(e, detail::rel_err(scale_function(m, x, ScaleMethod::Talbot), exact(x)));
        r.extra[key] = e;
        worst = std::max(worst, e);
    };
    track("brownian", brownian_model(), [](double x) { return 2 * x; });
    track("stable_1.5", stable_limit_model(1.5), [](double x) { return std::pow(x, 0.5) / std::tgamma(1.5); });
    bool registry_ok = true;
    for (double n : {10.0, 100.0, 1000.0}) {
        auto m = example1_model(n);
        track("example1_n" + std::to_string(static_cast<int>(n)), m, [n](double x) { return 2 / n + 2 * x; });
        double dn = n * n / 2;
        double w0 = scale_function(m, 0.0);
        double e0 = detail::rel_err(w0, n / dn);
        r.extra["W0_rel_err_n" + std::to_string(static_cast<int>(n))] = e0;
        registry_ok = registry_ok && resolve_scale_method(m, ScaleMethod::Auto) == ScaleMethod::ClosedForm && e0 <= 4e-16;
    }
    r.statistic = worst;
    r.pass = worst <= 1e-6 && registry_ok;
    if (!registry_ok) r.notes.push_back("W_n(0) registry value differs from n/d_n");
    return detail::single(1, "scale-function oracle (Talbot vs closed forms)", r);
}

// ---------------------------------------------------------------- 2

inline Outcome criterion2(const Options& o) {
    const double n = 10, tau = 1.0;
    const std::size_t N = 10000;
    auto m = example1_model(n);
    const double p = population_count_parameter(m, tau);  // 1/11
    return detail::gate(2, "population count Geometric(1/11), chi2", o, [&](std::uint64_t seed) {
        std::vector<std::int64_t> xs(N);
        parallel_for(N, o.threads, [&](std::size_t i) {
            Rng rng(seed, "C2", i);
            xs[i] = simulate_population_count(m, tau, rng);
        });
        const std::size_t K = 150;
        std::vector<double> obs(K, 0.0), exp(K, 0.0);
        for (auto k : xs) obs[std::min<std::size_t>(K, static_cast<std::size_t>(k)) - 1] += 1.0;
        for (std::size_t k = 1; k < K; ++k) exp[k - 1] = N * std::pow(1 - p, static_cast<double>(k - 1)) * p;
        exp[K - 1] = N * std::pow(1 - p, static_cast<double>(K - 1));
        auto r = chi_square_counts(obs, exp, 0, 0.01, 5.0, "C2.population_count");
        r.sample_sizes = {N};
        r.extra["parameter"] = p;
        double mean = 0;
        for (auto k : xs) mean += static_cast<double>(k);
        r.extra["mean"] = mean / N;
        return r;
    });
}

// ---------------------------------------------------------------- 3

inline Outcome criterion3(const Options& o) {
    const double n = 100, dn = 5000, tau = 1.0, eps = 0.1;
    const std::int64_t lineages = 100000;
    auto m = example1_model(n);
    auto lim = brownian_model();
    const double pe = p_eps(lim, eps, tau);
    auto limit_cdf = [=](double h) { return std::clamp((1 / (2 * eps) - 1 / (2 * h)) / pe, 0.0, 1.0); };
    const double We = scale_function(m, eps), Wt = scale_function(m, tau);
    auto prelimit_cdf = [=, &m](double h) {
        return std::clamp((1 / We - 1 / scale_function(m, h)) / (1 / We - 1 / Wt), 0.0, 1.0);
    };
    return detail::gate(3, "depth law vs dh/(2h^2), KS at n=100", o, [&](std::uint64_t seed) {
        auto cpp = simulate_marked_cpp(m, RescalingScheme{n, dn}, tau, lineages + 1, seed, {o.threads, "C3"});
        std::vector<double> d;
        for (const auto& a : cpp.atoms)
            if (a.lineage.coalescence_depth > eps) d.push_back(a.lineage.coalescence_depth);
        auto r = ks_test(d, limit_cdf, 0.01, "C3.depth_law");
        r.sample_sizes = {static_cast<std::size_t>(lineages), d.size()};
        // same sample against the exact pre-limit law; separates sampler error from the O(1/n) shift
        auto pre = ks_test(d, prelimit_cdf, 0.01);
        r.extra["prelimit_law_p"] = pre.p_value;
        r.extra["prelimit_law_D"] = pre.statistic;
        return r;
    });
}

// ---------------------------------------------------------------- 4

inline Outcome criterion4(const Options& o) {
    const double n = 1000, beta = 1.0, tau = 1.0, eps = 0.1;
    const double dn = n * n / 2;
    const std::size_t N = 100000;
    auto m = example1_model(n, MutationFunction::constant(beta / n));
    auto lim = brownian_model(1.0, beta / 2);
    double oracle[3];
    for (int k = 0; k < 3; ++k) oracle[k] = pi1_B_brownian(lim, k, eps, tau);
    const std::vector<double> edges{eps, 0.15, 0.25, 0.5, tau};
    const int kmax = 4;  // counts >= kmax pooled
    return detail::gate(4, "mutation counts Poisson per depth bin; Pi_n(B_m) vs Pi_1(B_m)", o, [&](std::uint64_t seed) {
        auto L = detail::lineages(m, tau, N, seed, "C4", o.threads);
        std::vector<double> obs, exp;
        std::vector<double> ob((edges.size() - 1) * (kmax + 1), 0.0), ex(ob.size(), 0.0);
        std::size_t hits[3] = {0, 0, 0};
        for (const auto& l : L) {
            double h = l.coalescence_depth;
            if (h < eps) continue;
            std::size_t b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), h) - edges.begin()) - 1;
            b = std::min(b, edges.size() - 2);
            std::size_t k = l.mutation_count();
            ob[b * (kmax + 1) + std::min<std::size_t>(k, kmax)] += 1.0;
            // conditional law given the depth: Poisson(beta h)
            double below = 0.0;
            for (int j = 0; j < kmax; ++j) {
                double pj = num::poisson_pmf(j, beta * h);
                ex[b * (kmax + 1) + j] += pj;
                below += pj;
            }
            ex[b * (kmax + 1) + kmax] += std::max(0.0, 1.0 - below);
            std::size_t ke = l.mutations_at_least(eps);
            if (ke < 3) ++hits[ke];
        }
        // merge sparse cells within each depth bin only
        double stat = 0.0, dof = 0.0;
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
            std::vector<double> o1(ob.begin() + b * (kmax + 1), ob.begin() + (b + 1) * (kmax + 1));
            std::vector<double> e1(ex.begin() + b * (kmax + 1), ex.begin() + (b + 1) * (kmax + 1));
            auto t = chi_square_counts(o1, e1);
            stat += t.statistic;
            dof += t.extra["bins"] - 1.0;  // no parameters are fitted and the bin total is given
        }
        TestReport r;
        r.name = "C4.mutation_law";
        r.statistic_name = "chi2";
        r.statistic = stat;
        r.p_value = chi2_sf(stat, dof);
        r.threshold = 0.01;
        r.sample_sizes = {N};
        r.extra["dof"] = dof;
        bool pi_ok = true;
        for (int k = 0; k < 3; ++k) {
            double p = static_cast<double>(hits[k]) / static_cast<double>(N);
            double est = dn / n * p, se = dn / n * std::sqrt(p * (1 - p) / static_cast<double>(N));
            r.extra["Pi_n_B" + std::to_string(k)] = est;
            r.extra["Pi_n_B" + std::to_string(k) + "_se"] = se;
            r.extra["Pi_1_B" + std::to_string(k)] = oracle[k];
            pi_ok = pi_ok && std::abs(est - oracle[k]) <= 3 * se;
        }
        r.pass = r.p_value > 0.01 && pi_ok;
        if (!pi_ok) r.notes.push_back("Pi_n(B_m) outside 3 SE of the closed integral");
        return r;
    });
}

// ---------------------------------------------------------------- 5

inline Outcome criterion5(const Options& o) {
    const double n = 100;
    return detail::gate(5, "nu-init histogram vs formula, TV < 0.02 (B.1 and B.2)", o, [&](std::uint64_t seed) {
        TestReport r;
        r.name = "C5.nu_init";
        r.statistic_name = "max_TV";
        r.threshold = 0.02;
        r.pass = true;
        struct Case {
            const char* key;
            MutationFunction f;
        };
        for (const Case& c : {Case{"B1", MutationFunction::constant(1.0 / n)}, Case{"B2", MutationFunction::linear_capped(1.0 / n)}}) {
            NuInitCheckConfig cfg{example1_model(n, c.f)};
            cfg.samples = 100000;
            cfg.bins = 50;
            cfg.seed = seed;
            cfg.threads = o.threads;
            auto chk = cross_check_nu_init(cfg);
            std::string k = c.key;
            r.extra[k + "_TV"] = chk.report.statistic;
            r.extra[k + "_mc_mark1"] = chk.report.extra["mc_mark1_mass"];
            r.extra[k + "_formula_mark1"] = chk.report.extra["formula_mark1_mass"];
            r.statistic = std::max(r.statistic, chk.report.statistic);
            // both mark channels must be populated
            bool channels = chk.report.extra["mc_mark1_mass"] > 0 && chk.report.extra["formula_mark1_mass"] > 0;
            r.pass = r.pass && chk.report.pass && channels;
        }
        r.sample_sizes = {100000, 100000};
        return r;
    });
}

// ---------------------------------------------------------------- 6

inline Outcome criterion6(const Options&) {
    const double alpha = 1.5, tau = 1.0;
    auto m = stable_limit_model(alpha);
    TestReport r;
    r.name = "C6.mu_K_oracle";
    r.statistic_name = "max_rel_err";
    r.threshold = 1e-5;
    double worst = 0.0, atom_err = 0.0;
    for (int i = 1; i <= 10; ++i) {
        double a = 0.09 * i;
        for (auto w : {MuKWeighting::Defective, MuKWeighting::Stated}) {
            auto k = mu_K(m, tau, a, false, w);
            for (int j = 1; j <= 10; ++j) {
                double u = (tau - a) * j / 11.0;
                worst = std::max(worst, detail::rel_err(k(u), mu_K_stable_closed_form(alpha, tau, a, u, w)));
            }
            double atom = k.atoms.empty() ? 0.0 : k.atoms[0].weight;
            atom_err = std::max(atom_err, std::abs(atom - std::tgamma(alpha) / std::pow(a, alpha - 1)));
        }
    }
    r.statistic = worst;
    r.extra["atom_abs_err"] = atom_err;
    r.extra["stated_density_a0.5_u0.2"] = mu_K(m, tau, 0.5, false, MuKWeighting::Stated)(0.2);
    r.pass = worst <= 1e-5 && atom_err <= 1e-10;
    return detail::single(6, "mu^K quadrature vs stable closed form; killing atom 1/W(a)", r);
}

// ---------------------------------------------------------------- 7

inline Outcome criterion7(const Options& o) {
    const double tau = 1.0, eps = 0.1;
    auto m = brownian_model(1.0, 0.5);
    HKSampler hk(m, tau);
    ChainSampler cs(m, eps, tau);
    const double pe = p_eps(m, eps, tau);
    const std::size_t N = 10000;
    return detail::gate(7, "H^K kill depth vs chain absorption; limit CPP windows", o, [&](std::uint64_t seed) {
        std::vector<double> kill(N), absorb(N);
        parallel_for(N, o.threads, [&](std::size_t i) {
            Rng rng(seed, "C7.hk", i);
            for (;;) {
                auto p = hk.sample(eps, rng);
                if (p.killed) {
                    kill[i] = p.kill_depth;
                    break;
                }
            }
            Rng rc(seed, "C7.chain", i);
            absorb[i] = cs.sample(rc).absorption_depth();
        });
        auto ks = ks_two_sample(kill, absorb, 0.01, "C7.kill_vs_absorb");
        const std::size_t C = 6;  // counts >= C pooled
        std::vector<std::vector<double>> table(C + 1, std::vector<double>(C + 1, 0.0));
        std::vector<double> w0(C + 1, 0.0), w1(C + 1, 0.0);
        double s = 0, s2 = 0;
        Rng rng(seed, "C7.cpp");
        for (std::size_t i = 0; i < N; ++i) {
            auto cpp = sample_limit_cpp(m, tau, eps, rng);
            std::size_t a = 0, b = 0;
            for (const auto& at : cpp.atoms) (at.position < 0.5 ? a : b) += 1;
            double k = static_cast<double>(cpp.atoms.size());
            s += k;
            s2 += k * k;
            a = std::min(a, C);
            b = std::min(b, C);
            table[a][b] += 1;
            w0[a] += 1;
            w1[b] += 1;
        }
        std::vector<double> ex(C + 1, 0.0);
        double below = 0.0;
        for (std::size_t k = 0; k < C; ++k) {
            ex[k] = N * num::poisson_pmf(static_cast<int>(k), pe / 2);
            below += ex[k];
        }
        ex[C] = N - below;
        auto g0 = chi_square_counts(w0, ex, 0, 0.01, 5.0, "window0");
        auto g1 = chi_square_counts(w1, ex, 0, 0.01, 5.0, "window1");
        auto ind = chi_square_independence(table);
        double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
        TestReport r = ks;
        r.name = "C7.limit_sampler";
        r.sample_sizes = {N, N, N};
        r.extra["window0_p"] = g0.p_value;
        r.extra["window1_p"] = g1.p_value;
        r.extra["independence_p"] = ind.p_value;
        r.extra["mean_count"] = mean;
        r.extra["mean_count_se"] = se;
        r.extra["p_eps"] = pe;
        bool mean_ok = std::abs(mean - pe) <= 3 * se && std::abs(pe - 4.5) < 1e-12;
        r.pass = ks.pass && g0.pass && g1.pass && ind.pass && mean_ok;
        return r;
    });
}

// ---------------------------------------------------------------- 8

inline Outcome criterion8(const Options& o) {
    const double beta = 1.0, tau = 1.0, eps = 0.1;
    const std::vector<double> ns{25, 50, 100, 200};
    const std::size_t N = 200000;
    const double oracle = pi1_B_brownian(brownian_model(1.0, beta / 2), 0, eps, tau);
    return detail::gate(8, "convergence trend of Pi_n(B_0) and sup|W_n - W|", o, [&](std::uint64_t seed) {
        auto pi_rep = convergence_table("Pi_B0", ns, [&](double n) {
            auto m = example1_model(n, MutationFunction::constant(beta / n));
            auto L = detail::lineages(m, tau, N, seed, "C8.n" + std::to_string(static_cast<int>(n)), o.threads);
            std::size_t hit = 0;
            for (const auto& l : L) hit += l.coalescence_depth >= eps && l.mutations_at_least(eps) == 0;
            double p = static_cast<double>(hit) / static_cast<double>(N);
            double scale = n / 2;  // d_n / n
            return ConvergenceRow{n, std::abs(scale * p - oracle), scale * std::sqrt(p * (1 - p) / static_cast<double>(N))};
        });
        std::vector<ConvergenceRow> wrows;
        auto w_rep = convergence_table("scale_sup", ns, [&](double n) {
            return ConvergenceRow{n, scale_sup_error(example1_model(n), brownian_model()), 0.0};
        }, &wrows);
        double exact_err = 0.0;
        bool strictly = true;
        for (std::size_t i = 0; i < wrows.size(); ++i) {
            exact_err = std::max(exact_err, std::abs(wrows[i].distance - 2 / wrows[i].n));
            if (i && !(wrows[i].distance < wrows[i - 1].distance)) strictly = false;
        }
        TestReport r = pi_rep;
        r.name = "C8.convergence";
        r.sample_sizes = {N, N, N, N};
        r.extra["Pi_1_B0"] = oracle;
        r.extra["scale_sup_spearman"] = w_rep.statistic;
        r.extra["scale_sup_max_err_vs_2_over_n"] = exact_err;
        for (const auto& [k, v] : w_rep.extra) r.extra["scale_" + k] = v;
        r.pass = pi_rep.pass && w_rep.pass && strictly && exact_err <= 1e-12;
        return r;
    });
}

// ---------------------------------------------------------------- 9

inline Outcome criterion9(const Options& o) {
    const double tau = 1.0, eps = 0.1;
    // deterministic normalisations, computed once
    double nu_err = 0.0, g_err = 0.0, u_err = 0.0;
    for (const auto& m : {example1_model(100, MutationFunction::constant(0.01)), example1_model(100, MutationFunction::linear_capped(0.01)),
                          stable_limit_model(1.5, 0.0, 0.5), stable_limit_model(1.5, 1.0, 0.0)})
        nu_err = std::max(nu_err, std::abs(nu_init(m, eps, tau).total_mass() - 1.0));
    for (const auto& m : {example1_model(10, MutationFunction::constant(0.2)), example1_model(10, MutationFunction::linear_capped(0.5)),
                          stable_limit_model(1.5, 0.0, 0.5)})
        for (double a : {0.0, 0.3}) g_err = std::max(g_err, std::abs(g_x(m, 0.4, a).total_mass() - 1.0));
    for (const auto& m : {example1_model(10, MutationFunction::constant(0.1)), stable_limit_model(1.5), stable_limit_model(1.5, 0.0, 0.5),
                          brownian_model(1.0, 0.5)}) {
        const double l = 1.3;
        auto R = resolvent_U_star(m, l);
        for (double r : {0.5, 1.0, 2.0}) u_err = std::max(u_err, std::abs(R.transform(r) - 1.0 / (l + psi_star(m, r)).real()));
    }
    const bool det_ok = nu_err <= 1e-6 && g_err <= 1e-6 && u_err <= 1e-6;
    const double n = 200;
    auto proxy = example1_model(n, MutationFunction::constant(1.0 / n));
    return detail::gate(9, "kernel normalisations (nu-init, nu^M + nu^D, g^x, U_*)", o, [&](std::uint64_t seed) {
        auto pi = estimate_pi(proxy, 0.3, tau, 5000, seed, 40, o.threads);
        auto c = make_jump_law_context(proxy, 0.3, tau, &pi);
        auto pm = nu_partition_mass(c);
        TestReport r;
        r.name = "C9.normalisations";
        r.statistic_name = "partition_sum";
        r.statistic = pm.sum();
        r.threshold = 3 * pm.se;
        r.sample_sizes = {5000};
        r.extra["nu_M"] = pm.nu_M;
        r.extra["nu_D"] = pm.nu_D;
        r.extra["partition_se"] = pm.se;
        r.extra["nu_init_max_err"] = nu_err;
        r.extra["g_x_max_err"] = g_err;
        r.extra["U_star_max_err"] = u_err;
        r.pass = det_ok && std::abs(pm.sum() - 1.0) <= 3 * pm.se;
        return r;
    });
}

inline Outcome run_criterion(int id, const Options& o) {
    switch (id) {
        case 1: return criterion1(o);
        case 2: return criterion2(o);
        case 3: return criterion3(o);
        case 4: return criterion4(o);
        case 5: return criterion5(o);
        case 6: return criterion6(o);
        case 7: return criterion7(o);
        case 8: return criterion8(o);
        case 9: return criterion9(o);
        default: throw DomainError("criterion must be 1..9");
    }
}

// "PASS C3 ..." plus indented per-run detail lines
inline std::string summary_line(const Outcome& oc) {
    std::ostringstream s;
    s << (oc.pass() ? "PASS" : "FAIL") << " C" << oc.id << " " << oc.title;
    if (oc.stochastic) s << " [" << oc.passes() << "/" << oc.runs.size() << " seeds, need " << oc.required << "]";
    return s.str();
}

inline std::string detail_lines(const Outcome& oc) {
    std::ostringstream s;
    for (const auto& r : oc.runs) {
        s << "    ";
        if (!r.seeds.empty()) s << "seed " << r.seeds[0] << ": ";
        s << r.statistic_name << "=" << detail::fmt(r.statistic);
        if (!std::isnan(r.p_value)) s << " p=" << detail::fmt(r.p_value);
        s << (r.pass ? " ok" : " fail");
        for (const auto& [k, v] : r.extra) s << " " << k << "=" << detail::fmt(v);
        for (const auto& n : r.notes) s << " (" << n << ")";
        s << "\n";
    }
    return s.str();
}

}  // namespace sptree::acceptance

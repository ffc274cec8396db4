// sptree: scale functions, genealogy simulation, limit objects and verification from one config.
// Exit codes: 0 ok, 1 numeric failure or failed verification, 2 usage or configuration error.
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sptree/sptree.hpp"

using namespace sptree;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool force = false;
    bool prelimit = false;
};

struct Run {
    ExperimentConfig cfg;
    fs::path dir;
    std::string command;
    Provenance prov(std::vector<std::string> streams) const { return {cfg.seed, std::move(streams), command}; }
    bool wants(const std::string& f) const { return std::find(cfg.formats.begin(), cfg.formats.end(), f) != cfg.formats.end(); }
};

Run open_run(const Common& c, const std::string& command) {
    Run r;
    r.cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
    if (c.out) r.cfg.output_dir = *c.out;
    if (c.seed) r.cfg.seed = *c.seed;
    if (c.threads) r.cfg.threads = *c.threads;
    validate(r.cfg);
    r.dir = prepare_output_dir(r.cfg.output_dir, c.force);
    r.command = command;
    write_snapshot(r.dir, r.cfg);
    return r;
}

std::string n_tag(double n) {
    std::ostringstream o;
    o << n;
    return o.str();
}

std::vector<double> n_values(const ExperimentConfig& c) {
    return c.rescaling.n_list.empty() ? std::vector<double>{c.rescaling.n} : c.rescaling.n_list;
}

const char* method_name(ScaleMethod m) {
    switch (m) {
        case ScaleMethod::ClosedForm: return "closed_form";
        case ScaleMethod::Talbot: return "talbot";
        case ScaleMethod::Renewal: return "renewal";
        default: return "auto";
    }
}

ScaleMethod parse_method(const std::string& s) {
    if (s == "closed_form") return ScaleMethod::ClosedForm;
    if (s == "talbot") return ScaleMethod::Talbot;
    if (s == "renewal") return ScaleMethod::Renewal;
    return ScaleMethod::Auto;
}

// the model a kernel or scale command works on
LevyModel chosen_model(const ExperimentConfig& c, bool prelimit) {
    if (prelimit || c.model.family == "tabulated") return prelimit_model(c, c.rescaling.n);
    return limit_model(c);
}

// midpoints of `points` equal cells of [lo, hi)
std::vector<double> cell_midpoints(double lo, double hi, std::size_t points) {
    std::vector<double> v;
    for (std::size_t i = 0; i < points; ++i) v.push_back(lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(points));
    return v;
}

// ---------------------------------------------------------------- scale-fn

int cmd_scale_fn(const Common& c, const std::string& command) {
    auto run = open_run(c, command);
    const auto& s = run.cfg.scale;
    auto m = chosen_model(run.cfg, c.prelimit);
    auto method = resolve_scale_method(m, parse_method(s.method));
    CsvWriter w(run.dir / "scale_fn.csv", {"x", "W", "method"}, run.prov({}), "sptree.scale_fn/1");
    if (s.points > 0) {
        auto grid = s.points == 1 ? std::vector<double>{s.x_min} : num::linspace(s.x_min, s.x_max, s.points);
        for (double x : grid) {
            double v = scale_function(m, x, method, s.nodes);
            if (!std::isfinite(v)) throw NumericError("W(" + std::to_string(x) + ") is not finite");
            w.row(x, v, method_name(method));
        }
    }
    std::cout << "model " << m.label() << ", method " << method_name(method) << ", " << s.points << " points -> "
              << (run.dir / "scale_fn.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Common& c, const std::string& command) {
    auto run = open_run(c, command);
    const auto& g = run.cfg.genealogy;
    json summary;
    summary["schema"] = "sptree.simulate_summary/1";
    summary["runs"] = json::array();
    std::printf("%8s %10s %8s %10s %12s %12s %10s\n", "n", "d_n", "atoms", "deep", "fraction", "p_n_eps", "mean_mut");
    for (double n : n_values(run.cfg)) {
        double dn = config_dn(run.cfg, n);
        auto m = prelimit_model(run.cfg, n);
        std::int64_t I_n = g.I_n > 0 ? g.I_n : default_I_n(n, dn);
        std::string stream = "lineage.n" + n_tag(n);
        auto cpp = simulate_marked_cpp(m, RescalingScheme{n, dn}, g.tau, I_n, run.cfg.seed, {run.cfg.threads, stream});
        cpp.regime = run.cfg.model.regime;
        auto prov = run.prov({stream + "[i], i = 1.." + std::to_string(I_n - 1)});
        std::string base = "cpp_n" + n_tag(n);
        if (run.wants("csv")) write_cpp_csv(run.dir / (base + ".csv"), cpp, prov);
        if (run.wants("json")) write_json(run.dir / (base + ".json"), cpp_json(cpp, prov));
        std::size_t deep = 0;
        double muts = 0;
        for (const auto& a : cpp.atoms) {
            deep += a.lineage.coalescence_depth >= g.eps;
            muts += static_cast<double>(a.lineage.mutation_count());
        }
        double k = static_cast<double>(cpp.atoms.size());
        double frac = k > 0 ? static_cast<double>(deep) / k : 0.0;
        double pne = p_depth_at_least(m, g.tau, g.eps);
        double mean_mut = k > 0 ? muts / k : 0.0;
        summary["runs"].push_back({{"n", n},
                                   {"d_n", dn},
                                   {"I_n", I_n},
                                   {"atoms", cpp.atoms.size()},
                                   {"depth_at_least_eps", deep},
                                   {"depth_fraction", frac},
                                   {"depth_fraction_se", k > 0 ? std::sqrt(pne * (1 - pne) / k) : 0.0},
                                   {"p_n_eps", pne},
                                   {"mean_mutation_count", mean_mut},
                                   {"warnings", cpp.warnings}});
        std::printf("%8g %10g %8zu %10zu %12.6f %12.6f %10.4f\n", n, dn, cpp.atoms.size(), deep, frac, pne, mean_mut);
        for (const auto& wmsg : cpp.warnings) std::cerr << "warning: " << wmsg << "\n";
    }
    write_json(run.dir / "summary.json", summary);
    return 0;
}

// ---------------------------------------------------------------- limit

int cmd_limit(const Common& c, const std::string& command) {
    auto run = open_run(c, command);
    const auto& g = run.cfg.genealogy;
    auto m = limit_model(run.cfg);
    LimitCppOptions opt;
    opt.window = g.window;
    opt.survival_conditioned = g.survival_conditioned;
    opt.first_lineage = g.first_lineage;
    std::unique_ptr<ChainSampler> chain;
    if (!is_brownian_limit(m)) chain = std::make_unique<ChainSampler>(m, g.eps, g.tau, opt.chain);
    const std::size_t R = g.replicas;
    std::vector<MarkedCPP> cpps(R);
    parallel_for(R, run.cfg.threads, [&](std::size_t i) {
        Rng rng(run.cfg.seed, "limit", i);
        cpps[i] = sample_limit_cpp(m, g.tau, g.eps, rng, opt, chain.get());
        cpps[i].seed = run.cfg.seed;
    });
    auto prov = run.prov({"limit[i], i = 0.." + std::to_string(R ? R - 1 : 0)});
    if (run.wants("csv")) {
        CsvWriter w(run.dir / "limit_cpp.csv", {"replica", "position", "coalescence_depth", "mutation_count", "mutation_depths"}, prov,
                    kCppSchema);
        for (std::size_t i = 0; i < R; ++i)
            for (const auto& a : cpps[i].atoms) {
                std::ostringstream md;
                md.precision(17);
                for (std::size_t k = 0; k < a.lineage.mutation_depths.size(); ++k) md << (k ? ";" : "") << a.lineage.mutation_depths[k];
                w.row(i, a.position, a.lineage.coalescence_depth, a.lineage.mutation_count(), md.str());
            }
    }
    if (run.wants("json")) {
        json j;
        j["schema"] = "sptree.limit_cpp_set/1";
        j["replicas"] = json::array();
        for (const auto& cpp : cpps) j["replicas"].push_back(cpp_json(cpp, prov));
        write_json(run.dir / "limit_cpp.json", j);
    }

    // Pi(B_{m,eps}) table; rows sum to p_eps
    const double pe = p_eps(m, g.eps, g.tau);
    std::vector<std::pair<double, double>> rows;  // value, se
    std::string source;
    if (is_brownian_limit(m)) {
        source = "closed_integral";
        double acc = 0.0;
        for (int k = 0; k < 200 && acc < pe * (1 - 1e-12); ++k) {
            rows.push_back({pi1_B_brownian(m, k, g.eps, g.tau), 0.0});
            acc += rows.back().first;
        }
    } else {
        source = "chain_monte_carlo";
        std::vector<std::size_t> K(R);
        parallel_for(R, run.cfg.threads, [&](std::size_t i) {
            Rng rng(run.cfg.seed, "pi_table", i);
            K[i] = chain->sample(rng).K();
        });
        std::size_t kmax = R ? *std::max_element(K.begin(), K.end()) : 0;
        std::vector<double> cnt(kmax + 1, 0.0);
        for (auto k : K) cnt[k] += 1;
        for (double v : cnt) {
            double p = v / static_cast<double>(R);
            rows.push_back({pe * p, pe * std::sqrt(p * (1 - p) / static_cast<double>(R))});
        }
    }
    {
        CsvWriter w(run.dir / "pi_table.csv", {"m", "Pi_B_m_eps", "se", "source"}, run.prov({"pi_table[i]"}), "sptree.pi_table/1");
        double sum = 0.0;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            w.row(k, rows[k].first, rows[k].second, source);
            sum += rows[k].first;
        }
        w.row("sum", sum, 0.0, source);
    }
    double s = 0, s2 = 0;
    for (const auto& cpp : cpps) {
        double k = static_cast<double>(cpp.atoms.size());
        s += k;
        s2 += k * k;
    }
    double mean = R ? s / static_cast<double>(R) : 0.0;
    double se = R > 1 ? std::sqrt(std::max(0.0, s2 / static_cast<double>(R) - mean * mean) / static_cast<double>(R)) : 0.0;
    json summary = {{"schema", "sptree.limit_summary/1"},
                    {"model", m.label()},
                    {"replicas", R},
                    {"p_eps", pe},
                    {"expected_count", pe * (g.survival_conditioned ? scale_function(m, g.tau) : g.window)},
                    {"mean_count", mean},
                    {"mean_count_se", se},
                    {"pi_table_source", source}};
    write_json(run.dir / "summary.json", summary);
    std::cout << "limit " << m.label() << ": p_eps = " << pe << ", mean count " << mean << " +- " << se << " over " << R
              << " replicas\n";
    return 0;
}

// ---------------------------------------------------------------- kernels

void write_atomic(const fs::path& path, const AtomicDensity& k, double lo, double hi, std::size_t points, const Provenance& prov,
                  const std::string& name) {
    CsvWriter w(path, {"kind", "u", "mark", "value"}, prov, "sptree.kernel/1");
    for (const auto& a : k.atoms) w.row("atom", a.location, a.mark, a.weight);
    if (!k.density) return;
    for (double u : cell_midpoints(lo, hi, points))
        for (int q = 0; q < k.marks; ++q) w.row("density", u, q, k(u, q));
    std::cout << name << ": total mass " << k.total_mass() << "\n";
}

int cmd_kernels(const Common& c, const std::string& command) {
    auto run = open_run(c, command);
    const auto& kc = run.cfg.kernels;
    const double tau = run.cfg.genealogy.tau, eps = run.cfg.genealogy.eps;
    auto m = chosen_model(run.cfg, c.prelimit);
    auto prov = run.prov({});
    fs::path out = run.dir / ("kernel_" + kc.kernel + ".csv");
    if (kc.kernel == "nu_init") {
        write_atomic(out, nu_init(m, eps, tau), eps, tau, kc.points, prov, "nu_init");
    } else if (kc.kernel == "mu_K") {
        auto wt = kc.weighting == "defective" ? MuKWeighting::Defective : MuKWeighting::Stated;
        auto k = mu_K(m, tau, kc.a, !m.mutation().is_zero(), wt);
        CsvWriter w(out, {"kind", "u", "mark", "value"}, prov, "sptree.kernel/1");
        for (const auto& a : k.atoms) w.row("atom", a.location, a.mark, a.weight);
        for (double u : cell_midpoints(0.0, tau - kc.a, kc.points))
            for (int q = 0; q < k.marks; ++q) w.row("density", u, q, k(u, q));
    } else if (kc.kernel == "g_x") {
        write_atomic(out, g_x(m, kc.x, kc.a), 0.0, tau, kc.points, prov, "g_x");
    } else if (kc.kernel == "ladder") {
        auto L = ladder_measures(m);
        CsvWriter w(out, {"kind", "u", "mark", "value"}, prov, "sptree.kernel/1");
        w.row("drift", 0.0, 0, L.drift);
        w.row("kill_rate", 0.0, 0, L.kill_rate);
        w.row("mark_rate", 0.0, 1, L.lambda_rate);
        for (double u : cell_midpoints(0.0, tau, kc.points))
            for (int q = 0; q < 2; ++q) w.row("density", u, q, L.mu(u, q));
    } else if (kc.kernel == "U_star") {
        auto R = resolvent_U_star(m, kc.l);
        CsvWriter w(out, {"kind", "u", "mark", "value"}, prov, "sptree.kernel/1");
        w.row("atom", 0.0, 0, R.atom);
        for (double z : cell_midpoints(0.0, tau, kc.points)) w.row("density", z, 0, R.density(z));
    } else if (kc.kernel == "pi") {
        auto proxy = prelimit_model(run.cfg, kc.pi_proxy_n);
        auto pi = estimate_pi(proxy, kc.x, tau, kc.pi_samples, run.cfg.seed, std::max<std::size_t>(1, kc.points), run.cfg.threads);
        CsvWriter w(out, {"lo", "hi", "mass", "se"}, run.prov({"pi[i], i = 0.." + std::to_string(kc.pi_samples - 1)}), "sptree.pi/1");
        for (std::size_t b = 0; b < pi.mass.size(); ++b) w.row(pi.edges[b], pi.edges[b + 1], pi.mass[b], pi.se[b]);
        std::cout << "pi: total " << pi.total_mass() << " +- " << pi.total_se() << ", overflow " << pi.overflow_mass() << "\n";
    } else {
        throw ConfigError("kernels.kernel must be one of nu_init, mu_K, g_x, ladder, U_star, pi");
    }
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- verify

std::vector<TestReport> calibration_suite(const ExperimentConfig& c) {
    std::vector<TestReport> out;
    const double thr = c.verify.threshold;
    for (std::size_t k = 0; k < c.verify.seeds; ++k) {
        std::uint64_t seed = c.seed + k;
        std::vector<double> u(10000), e(10000), pc(20, 0.0), pe(20, 0.0);
        Rng ru(seed, "calib.uniform"), re(seed, "calib.exp"), rp(seed, "calib.poisson");
        for (auto& x : u) x = ru.uniform();
        for (auto& x : e) x = re.exponential(2.0);
        for (int i = 0; i < 10000; ++i) pc[std::min<long>(19, rp.poisson(3.0))] += 1;
        double below = 0;
        for (int i = 0; i < 19; ++i) below += pe[i] = 10000 * num::poisson_pmf(i, 3.0);
        pe[19] = 10000 - below;
        auto a = ks_test(u, [](double x) { return std::clamp(x, 0.0, 1.0); }, thr, "calibration.ks_uniform");
        auto b = ks_test(e, [](double x) { return x > 0 ? -std::expm1(-2 * x) : 0.0; }, thr, "calibration.ks_exponential");
        auto p = chi_square_counts(pc, pe, 0, thr, 5.0, "calibration.chi2_poisson");
        for (auto* r : {&a, &b, &p}) {
            r->seeds = {seed};
            out.push_back(*r);
        }
    }
    auto conv = convergence_table("scale_sup", {10, 20, 40, 80}, [](double n) {
        return ConvergenceRow{n, scale_sup_error(example1_model(n), brownian_model()), 0.0};
    });
    out.push_back(conv);
    return out;
}

int cmd_verify(const Common& c, const std::string& command, std::vector<int> criteria) {
    auto run = open_run(c, command);
    const auto& v = run.cfg.verify;
    json j;
    j["schema"] = kReportSchema;
    j["suite"] = v.suite;
    j["master_seed"] = run.cfg.seed;
    j["reports"] = json::array();
    bool all = true;
    if (v.suite == "calibration") {
        // per-test gate: `required` of `seeds` runs must pass
        std::map<std::string, std::vector<TestReport>> by_name;
        for (auto& r : calibration_suite(run.cfg)) by_name[r.name].push_back(r);
        std::printf("%-32s %8s %s\n", "test", "passes", "result");
        for (const auto& [name, runs] : by_name) {
            std::size_t k = 0;
            for (const auto& r : runs) {
                k += r.pass;
                j["reports"].push_back(report_json(r));
            }
            bool ok = runs.size() == 1 ? runs[0].pass : k >= std::min(v.required, runs.size());
            all = all && ok;
            std::printf("%-32s %4zu/%-3zu %s\n", name.c_str(), k, runs.size(), ok ? "PASS" : "FAIL");
        }
    } else if (v.suite == "acceptance") {
        acceptance::Options o{run.cfg.seed, v.seeds, v.required, run.cfg.threads};
        if (criteria.empty())
            for (int i = 1; i <= 9; ++i) criteria.push_back(i);
        for (int id : criteria) {
            auto oc = acceptance::run_criterion(id, o);
            for (const auto& r : oc.runs) j["reports"].push_back(report_json(r));
            std::cout << acceptance::summary_line(oc) << "\n" << acceptance::detail_lines(oc);
            std::cout.flush();
            all = all && oc.pass();
        }
    } else {
        throw ConfigError("verify.suite must be calibration or acceptance");
    }
    j["pass"] = all;
    write_json(run.dir / "report.json", j);
    std::cout << (all ? "all tests passed" : "some tests failed") << "; report " << (run.dir / "report.json").string() << "\n";
    return all ? 0 : 1;
}

void add_common(CLI::App* sub, Common& c, bool with_prelimit) {
    sub->add_option("--config,-c", c.config_path, "JSON config file (defaults apply when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--out,-o", c.out, "output directory (overrides output.directory)");
    sub->add_option("--seed", c.seed, "master seed (overrides rng.seed)");
    sub->add_option("--threads,-j", c.threads, "worker threads, 0 = all cores (overrides threads)");
    sub->add_flag("--force,-f", c.force, "write into a non-empty output directory");
    if (with_prelimit) sub->add_flag("--prelimit", c.prelimit, "use the rescaled pre-limit model at rescaling.n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sptree: genealogies of spectrally positive Levy trees"};
    app.require_subcommand(1);
    Common c;
    std::vector<int> criteria;
    auto* scale = app.add_subcommand("scale-fn", "tabulate the scale function W on the configured grid");
    auto* sim = app.add_subcommand("simulate", "simulate pre-limit marked comb point processes");
    auto* lim = app.add_subcommand("limit", "sample limit marked point processes and the Pi(B_m) table");
    auto* ker = app.add_subcommand("kernels", "evaluate one transition kernel on a grid");
    auto* ver = app.add_subcommand("verify", "run the calibration or acceptance suite");
    add_common(scale, c, true);
    add_common(sim, c, false);
    add_common(lim, c, false);
    add_common(ker, c, true);
    add_common(ver, c, false);
    ver->add_option("--criterion", criteria, "acceptance criteria to run (default all)")->check(CLI::Range(1, 9));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::string command;
    for (int i = 0; i < argc; ++i) command += (i ? " " : "") + std::string(argv[i]);
    try {
        if (*scale) return cmd_scale_fn(c, command);
        if (*sim) return cmd_simulate(c, command);
        if (*lim) return cmd_limit(c, command);
        if (*ker) return cmd_kernels(c, command);
        if (*ver) return cmd_verify(c, command, criteria);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "invalid parameters: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

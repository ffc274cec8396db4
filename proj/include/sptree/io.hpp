#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genealogy.hpp"
#include "levy_core.hpp"
#include "verify.hpp"

namespace sptree {

using json = nlohmann::json;

inline constexpr const char* kConfigSchema = "sptree.config/1";
inline constexpr const char* kCppSchema = "sptree.marked_cpp/1";
inline constexpr const char* kReportSchema = "sptree.report/1";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- config

struct ModelConfig {
    std::string family = "exponential";  // exponential | stable | brownian | tabulated
    double alpha = 1.5;
    double b = 1.0;
    double drift = -1.0;                            // tabulated only
    std::vector<std::pair<double, double>> points;  // tabulated only
    std::string regime = "B1";                      // B1 | B2 | none
    double beta = 0.0;
    double kappa = 0.0;
    bool operator==(const ModelConfig&) const = default;
};

struct RescalingConfig {
    double n = 100;
    std::vector<double> n_list;
    std::string d_n = "n2_over_2";  // n2_over_2 | n_pow_alpha
    bool operator==(const RescalingConfig&) const = default;
};

struct GenealogyConfig {
    double tau = 1.0;
    double eps = 0.1;
    std::int64_t I_n = 0;  // 0: round(d_n/n)
    std::size_t replicas = 1000;
    double window = 1.0;
    bool survival_conditioned = false;
    bool first_lineage = false;
    bool operator==(const GenealogyConfig&) const = default;
};

struct ScaleConfig {
    double x_min = 0.0, x_max = 5.0;
    std::size_t points = 51;
    int nodes = 32;
    std::string method = "auto";  // auto | closed_form | talbot | renewal
    bool operator==(const ScaleConfig&) const = default;
};

struct KernelConfig {
    std::string kernel = "nu_init";  // nu_init | mu_K | g_x | ladder | U_star | pi
    double x = 0.3, a = 0.5, l = 1.0;
    std::size_t points = 101;
    std::size_t pi_samples = 4000;
    double pi_proxy_n = 400;
    std::string weighting = "stated";
    bool operator==(const KernelConfig&) const = default;
};

struct VerifyConfig {
    std::string suite = "calibration";  // calibration | acceptance
    double threshold = 0.01;
    std::size_t seeds = 5;
    std::size_t required = 4;
    bool operator==(const VerifyConfig&) const = default;
};

struct ExperimentConfig {
    ModelConfig model;
    RescalingConfig rescaling;
    GenealogyConfig genealogy;
    ScaleConfig scale;
    KernelConfig kernels;
    VerifyConfig verify;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::vector<std::string> formats{"csv", "json"};
    unsigned threads = 1;
    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {
template <class T>
void get_opt(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}
inline const json& section(const json& j, const char* key) {
    static const json empty = json::object();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_object()) throw ConfigError(std::string("section '") + key + "' must be an object");
    return j.at(key);
}
}  // namespace detail

inline void validate(const ExperimentConfig& c) {
    const auto& m = c.model;
    if (m.family != "exponential" && m.family != "stable" && m.family != "brownian" && m.family != "tabulated")
        throw ConfigError("model.family must be one of exponential, stable, brownian, tabulated");
    if (m.regime != "B1" && m.regime != "B2" && m.regime != "none") throw ConfigError("model.regime must be B1, B2 or none");
    if (m.family == "stable" && !(m.alpha > 1 && m.alpha < 2)) throw ConfigError("model.alpha must lie in (1,2)");
    if (m.beta < 0 || m.kappa < 0) throw ConfigError("beta and kappa must be >= 0");
    if (m.family == "tabulated" && m.points.size() < 2) throw ConfigError("tabulated model needs at least two points");
    if (c.rescaling.d_n != "n2_over_2" && c.rescaling.d_n != "n_pow_alpha") throw ConfigError("unknown d_n rule: " + c.rescaling.d_n);
    if (!(c.rescaling.n >= 1)) throw ConfigError("rescaling.n must be >= 1");
    for (double n : c.rescaling.n_list)
        if (!(n >= 1)) throw ConfigError("rescaling.n_list entries must be >= 1");
    if (!(c.genealogy.tau > 0)) throw ConfigError("genealogy.tau must be positive");
    if (!(c.genealogy.eps > 0 && c.genealogy.eps < c.genealogy.tau)) throw ConfigError("genealogy.eps must lie in (0, tau)");
    if (c.genealogy.I_n < 0) throw ConfigError("genealogy.I_n must be >= 0");
    static const std::vector<std::string> methods{"auto", "closed_form", "talbot", "renewal"};
    if (std::find(methods.begin(), methods.end(), c.scale.method) == methods.end()) throw ConfigError("scale.method unknown");
    if (c.scale.nodes < 4) throw ConfigError("scale.nodes must be >= 4");
}

inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("schema") && j.at("schema") != kConfigSchema)
        throw ConfigError("unsupported config schema: " + j.at("schema").dump());
    ExperimentConfig c;
    try {
        const auto& m = detail::section(j, "model");
        detail::get_opt(m, "family", c.model.family);
        detail::get_opt(m, "alpha", c.model.alpha);
        detail::get_opt(m, "b", c.model.b);
        detail::get_opt(m, "drift", c.model.drift);
        detail::get_opt(m, "points", c.model.points);
        detail::get_opt(m, "regime", c.model.regime);
        detail::get_opt(m, "beta", c.model.beta);
        detail::get_opt(m, "kappa", c.model.kappa);
        const auto& r = detail::section(j, "rescaling");
        detail::get_opt(r, "n", c.rescaling.n);
        detail::get_opt(r, "n_list", c.rescaling.n_list);
        detail::get_opt(r, "d_n", c.rescaling.d_n);
        const auto& g = detail::section(j, "genealogy");
        detail::get_opt(g, "tau", c.genealogy.tau);
        detail::get_opt(g, "eps", c.genealogy.eps);
        detail::get_opt(g, "I_n", c.genealogy.I_n);
        detail::get_opt(g, "replicas", c.genealogy.replicas);
        detail::get_opt(g, "window", c.genealogy.window);
        detail::get_opt(g, "survival_conditioned", c.genealogy.survival_conditioned);
        detail::get_opt(g, "first_lineage", c.genealogy.first_lineage);
        const auto& s = detail::section(j, "scale");
        detail::get_opt(s, "x_min", c.scale.x_min);
        detail::get_opt(s, "x_max", c.scale.x_max);
        detail::get_opt(s, "points", c.scale.points);
        detail::get_opt(s, "nodes", c.scale.nodes);
        detail::get_opt(s, "method", c.scale.method);
        const auto& k = detail::section(j, "kernels");
        detail::get_opt(k, "kernel", c.kernels.kernel);
        detail::get_opt(k, "x", c.kernels.x);
        detail::get_opt(k, "a", c.kernels.a);
        detail::get_opt(k, "l", c.kernels.l);
        detail::get_opt(k, "points", c.kernels.points);
        detail::get_opt(k, "pi_samples", c.kernels.pi_samples);
        detail::get_opt(k, "pi_proxy_n", c.kernels.pi_proxy_n);
        detail::get_opt(k, "weighting", c.kernels.weighting);
        const auto& v = detail::section(j, "verify");
        detail::get_opt(v, "suite", c.verify.suite);
        detail::get_opt(v, "threshold", c.verify.threshold);
        detail::get_opt(v, "seeds", c.verify.seeds);
        detail::get_opt(v, "required", c.verify.required);
        const auto& rng = detail::section(j, "rng");
        detail::get_opt(rng, "seed", c.seed);
        const auto& o = detail::section(j, "output");
        detail::get_opt(o, "directory", c.output_dir);
        detail::get_opt(o, "formats", c.formats);
        detail::get_opt(j, "threads", c.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    validate(c);
    return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline json serialize_config(const ExperimentConfig& c) {
    json j;
    j["schema"] = kConfigSchema;
    j["model"] = {{"family", c.model.family}, {"alpha", c.model.alpha}, {"b", c.model.b},   {"drift", c.model.drift},
                  {"points", c.model.points}, {"regime", c.model.regime}, {"beta", c.model.beta}, {"kappa", c.model.kappa}};
    j["rescaling"] = {{"n", c.rescaling.n}, {"n_list", c.rescaling.n_list}, {"d_n", c.rescaling.d_n}};
    j["genealogy"] = {{"tau", c.genealogy.tau},
                      {"eps", c.genealogy.eps},
                      {"I_n", c.genealogy.I_n},
                      {"replicas", c.genealogy.replicas},
                      {"window", c.genealogy.window},
                      {"survival_conditioned", c.genealogy.survival_conditioned},
                      {"first_lineage", c.genealogy.first_lineage}};
    j["scale"] = {{"x_min", c.scale.x_min}, {"x_max", c.scale.x_max}, {"points", c.scale.points}, {"nodes", c.scale.nodes}, {"method", c.scale.method}};
    j["kernels"] = {{"kernel", c.kernels.kernel}, {"x", c.kernels.x}, {"a", c.kernels.a}, {"l", c.kernels.l}, {"points", c.kernels.points},
                    {"pi_samples", c.kernels.pi_samples}, {"pi_proxy_n", c.kernels.pi_proxy_n}, {"weighting", c.kernels.weighting}};
    j["verify"] = {{"suite", c.verify.suite}, {"threshold", c.verify.threshold}, {"seeds", c.verify.seeds}, {"required", c.verify.required}};
    j["rng"] = {{"seed", c.seed}};
    j["output"] = {{"directory", c.output_dir}, {"formats", c.formats}};
    j["threads"] = c.threads;
    return j;
}

// ---------------------------------------------------------------- models from config

inline double config_dn(const ExperimentConfig& c, double n) { return dn_rule(c.rescaling.d_n, n, c.model.alpha); }

inline MutationFunction base_mutation(const ExperimentConfig& c, double n) {
    const auto& m = c.model;
    if (m.regime == "B1" && m.beta > 0) {
        // (d_n/n) theta_n -> theta
        double th = m.family == "stable" ? m.beta * n / config_dn(c, n) : m.beta / n;
        return MutationFunction::constant(std::min(1.0, th));
    }
    if (m.regime == "B2" && m.kappa > 0) return MutationFunction::linear_capped(m.kappa / n);
    return MutationFunction::zero();
}

inline LevyModel prelimit_model(const ExperimentConfig& c, double n) {
    const auto& m = c.model;
    auto f = base_mutation(c, n);
    double dn = config_dn(c, n);
    if (m.family == "exponential") return rescale(exponential_base_model(f), RescalingScheme{n, dn});
    if (m.family == "stable") return rescale(stable_base_model(m.alpha, f), RescalingScheme{n, dn});
    if (m.family == "tabulated") {
        ModelSpec s;
        s.drift = m.drift;
        s.jumps = JumpMeasure::tabulated(m.points);
        s.mutation = f;
        s.label = "tabulated";
        return rescale(LevyModel(s), RescalingScheme{n, dn});
    }
    throw ConfigError("family '" + m.family + "' has no pre-limit model");
}

inline LevyModel limit_model(const ExperimentConfig& c) {
    const auto& m = c.model;
    double beta = m.regime == "B1" ? m.beta : 0.0;
    double kappa = m.regime == "B2" ? m.kappa : 0.0;
    if (m.family == "exponential" || m.family == "brownian") {
        // exponential family: theta = beta/2, Gaussian coefficient 1
        double theta = m.family == "exponential" ? beta / 2.0 : beta / 2.0 * m.b * m.b;
        return brownian_model(m.family == "exponential" ? 1.0 : m.b, theta, kappa);
    }
    if (m.family == "stable") return stable_limit_model(m.alpha, beta, kappa);
    throw ConfigError("family '" + m.family + "' has no registered limit model");
}

// ---------------------------------------------------------------- output

inline std::filesystem::path prepare_output_dir(const std::string& dir, bool force) {
    namespace fs = std::filesystem;
    fs::path p(dir);
    if (fs::exists(p)) {
        if (!fs::is_directory(p)) throw ConfigError("output path exists and is not a directory: " + dir);
        if (!fs::is_empty(p) && !force) throw ConfigError("output directory is not empty (use --force to overwrite): " + dir);
    } else {
        fs::create_directories(p);
    }
    return p;
}

struct Provenance {
    std::uint64_t master_seed = 0;
    std::vector<std::string> streams;
    std::string command;
};

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n;") == std::string::npos) return s;
    std::string o = "\"";
    for (char ch : s) {
        if (ch == '"') o += '"';
        o += ch;
    }
    return o + "\"";
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns, const Provenance& prov,
              const std::string& schema)
        : out_(path) {
        if (!out_) throw ConfigError("cannot open " + path.string());
        out_ << "# schema=" << schema << "\r\n";
        out_ << "# command=" << prov.command << "\r\n";
        out_ << "# master_seed=" << prov.master_seed << "\r\n";
        for (const auto& s : prov.streams) out_ << "# stream=" << s << "\r\n";
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << csv_escape(columns[i]);
        out_ << "\r\n";
        out_ << std::setprecision(17);
    }
    template <class... T>
    void row(const T&... v) {
        std::size_t i = 0;
        ((out_ << (i++ ? "," : "") << cell(v)), ...);
        out_ << "\r\n";
    }

private:
    static std::string cell(const std::string& s) { return csv_escape(s); }
    static std::string cell(const char* s) { return csv_escape(s); }
    template <class T>
    static std::string cell(const T& v) {
        std::ostringstream o;
        o << std::setprecision(17) << v;
        return o.str();
    }
    std::ofstream out_;
};

inline json lineage_json(const LineageMeasure& L) {
    return {{"coalescence_depth", L.coalescence_depth}, {"mutation_depths", L.mutation_depths}, {"coalescence_is_mutation", L.coalescence_is_mutation}};
}

inline json cpp_json(const MarkedCPP& cpp, const Provenance& prov) {
    json j;
    j["schema"] = kCppSchema;
    j["metadata"] = {{"n", cpp.n},       {"d_n", cpp.d_n},       {"tau", cpp.tau},          {"I_n", cpp.I_n},
                     {"seed", cpp.seed}, {"regime", cpp.regime}, {"master_seed", prov.master_seed}, {"streams", prov.streams}};
    j["warnings"] = cpp.warnings;
    json atoms = json::array();
    for (const auto& a : cpp.atoms) {
        json e = lineage_json(a.lineage);
        e["position"] = a.position;
        atoms.push_back(e);
    }
    j["atoms"] = atoms;
    if (cpp.first_lineage) j["first_lineage"] = lineage_json(*cpp.first_lineage);
    return j;
}

inline MarkedCPP cpp_from_json(const json& j) {
    if (j.value("schema", "") != kCppSchema) throw ConfigError("not a marked CPP document");
    MarkedCPP c;
    const auto& m = j.at("metadata");
    c.n = m.at("n");
    c.d_n = m.at("d_n");
    c.tau = m.at("tau");
    c.I_n = m.at("I_n");
    c.seed = m.at("seed");
    c.regime = m.value("regime", "");
    for (const auto& a : j.at("atoms")) {
        LineageMeasure L;
        L.coalescence_depth = a.at("coalescence_depth");
        L.mutation_depths = a.at("mutation_depths").get<std::vector<double>>();
        L.coalescence_is_mutation = a.at("coalescence_is_mutation");
        c.atoms.push_back({a.at("position").get<double>(), L});
    }
    return c;
}

inline void write_cpp_csv(const std::filesystem::path& path, const MarkedCPP& cpp, const Provenance& prov) {
    CsvWriter w(path, {"position", "coalescence_depth", "mutation_count", "mutation_depths", "flag"}, prov, kCppSchema);
    for (const auto& a : cpp.atoms) {
        std::ostringstream md;
        md << std::setprecision(17);
        for (std::size_t i = 0; i < a.lineage.mutation_depths.size(); ++i) md << (i ? ";" : "") << a.lineage.mutation_depths[i];
        w.row(a.position, a.lineage.coalescence_depth, a.lineage.mutation_depths.size(), md.str(), a.lineage.coalescence_is_mutation ? 1 : 0);
    }
}

inline json report_json(const TestReport& r) {
    json j;
    j["name"] = r.name;
    j["statistic_name"] = r.statistic_name;
    j["statistic"] = r.statistic;
    j["p_value"] = std::isnan(r.p_value) ? json(nullptr) : json(r.p_value);
    j["threshold"] = r.threshold;
    j["sample_sizes"] = r.sample_sizes;
    j["seeds"] = r.seeds;
    j["pass"] = r.pass;
    j["artifacts"] = r.artifacts;
    j["notes"] = r.notes;
    j["extra"] = r.extra;
    return j;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path.string());
    out << j.dump(2) << "\n";
}

inline void write_snapshot(const std::filesystem::path& dir, const ExperimentConfig& c) {
    write_json(dir / "config.resolved.json", serialize_config(c));
}

}  // namespace sptree

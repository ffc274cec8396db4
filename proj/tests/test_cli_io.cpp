#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "sptree/io.hpp"
#include "sptree/kernels.hpp"

using namespace sptree;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sptree_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int cli(const std::string& args) {
    std::string cmd = std::string(SPTREE_CLI) + " " + args + " > /dev/null 2>&1";
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

// data rows of a CSV (comment lines and header dropped), split on commas
std::vector<std::vector<std::string>> rows(const fs::path& p) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(slurp(p));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        out.push_back(cells);
    }
    return out;
}

}  // namespace

TEST(Config, RoundTrip) {
    ExperimentConfig c;
    EXPECT_EQ(parse_config(serialize_config(c)), c);
    c.model.family = "tabulated";
    c.model.points = {{0.5, 1.0}, {1.5, 0.25}};
    c.model.regime = "B2";
    c.model.kappa = 0.7;
    c.rescaling.n_list = {25, 50, 100};
    c.rescaling.d_n = "n_pow_alpha";
    c.genealogy.I_n = 17;
    c.genealogy.first_lineage = true;
    c.scale.method = "renewal";
    c.kernels.kernel = "pi";
    c.verify.suite = "acceptance";
    c.seed = 123456789012345ULL;
    c.formats = {"json"};
    c.threads = 3;
    auto j = serialize_config(c);
    EXPECT_EQ(j.at("schema"), kConfigSchema);
    EXPECT_EQ(parse_config(j), c);
    EXPECT_EQ(parse_config_text(j.dump()), c);
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_config_text("{\"model\": "), ConfigError);
    EXPECT_THROW(parse_config_text("[1, 2]"), ConfigError);
    EXPECT_THROW(parse_config_text(R"({"genealogy": {"eps": 1.0, "tau": 1.0}})"), ConfigError);
    EXPECT_THROW(parse_config_text(R"({"rescaling": {"d_n": "n_cubed"}})"), ConfigError);
    EXPECT_THROW(parse_config_text(R"({"model": {"alpha": "big"}})"), ConfigError);
    EXPECT_THROW(parse_config_text(R"({"model": {"family": "stable", "alpha": 2.5}})"), ConfigError);
    EXPECT_THROW(parse_config_text(R"({"schema": "other/9"})"), ConfigError);
    EXPECT_NO_THROW(parse_config_text("{}"));
}

TEST(Config, ModelsFromConfig) {
    auto c = parse_config_text(R"({"model": {"family": "exponential", "regime": "B1", "beta": 1}, "rescaling": {"n": 100}})");
    auto m = prelimit_model(c, 100);
    EXPECT_NEAR(scale_function(m, 0.0), 0.02, 1e-15);
    EXPECT_NEAR(m.mark_prob(1.0), 0.01, 1e-15);
    auto lim = limit_model(c);
    EXPECT_NEAR(brownian_beta_eff(lim), 1.0, 1e-15);
}

TEST(Csv, Rfc4180Escaping) {
    EXPECT_EQ(csv_escape("plain"), "plain");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    auto p = scratch("csv") / "t.csv";
    fs::create_directories(p.parent_path());
    {
        CsvWriter w(p, {"a", "b"}, Provenance{7, {"s[0]"}, "cmd"}, "x/1");
        w.row(1.5, "u,v");
    }
    auto text = slurp(p);
    EXPECT_NE(text.find("# master_seed=7\r\n"), std::string::npos);
    EXPECT_NE(text.find("a,b\r\n1.5,\"u,v\"\r\n"), std::string::npos);
}

TEST(CppJson, RoundTrip) {
    MarkedCPP c;
    c.n = 10;
    c.d_n = 50;
    c.tau = 1;
    c.I_n = 3;
    c.seed = 9;
    c.regime = "B1";
    LineageMeasure L{0.4, {0.1, 0.4}, true};
    c.atoms = {{0.2, L}, {0.4, LineageMeasure{0.05, {}, false}}};
    auto back = cpp_from_json(cpp_json(c, {}));
    EXPECT_EQ(back.atoms, c.atoms);
    EXPECT_EQ(back.I_n, 3);
    EXPECT_EQ(back.seed, 9u);
    EXPECT_THROW(cpp_from_json(json{{"schema", "nope"}}), ConfigError);
}

TEST(Cli, MalformedConfigExitsTwo) {
    auto d = scratch("bad");
    fs::create_directories(d);
    put(d / "bad.json", "{\"model\": {");
    EXPECT_EQ(cli("scale-fn -c " + (d / "bad.json").string() + " -o " + (d / "out").string()), 2);
    put(d / "eps.json", R"({"genealogy": {"eps": 2}})");
    EXPECT_EQ(cli("simulate -c " + (d / "eps.json").string() + " -o " + (d / "out2").string()), 2);
    EXPECT_EQ(cli("no-such-command"), 2);
    EXPECT_EQ(cli("scale-fn --bogus-flag"), 2);
}

TEST(Cli, OverwriteNeedsForce) {
    auto d = scratch("force");
    EXPECT_EQ(cli("scale-fn -o " + d.string()), 0);
    EXPECT_EQ(cli("scale-fn -o " + d.string()), 2);
    EXPECT_EQ(cli("scale-fn --force -o " + d.string()), 0);
    EXPECT_TRUE(fs::exists(d / "config.resolved.json"));
}

TEST(Cli, ResolvedSnapshotMatchesOverrides) {
    auto d = scratch("snap");
    fs::create_directories(d);
    put(d / "c.json", R"({"rescaling": {"n": 40}, "rng": {"seed": 5}})");
    EXPECT_EQ(cli("scale-fn -c " + (d / "c.json").string() + " --seed 11 -o " + (d / "out").string()), 0);
    auto snap = load_config((d / "out" / "config.resolved.json").string());
    EXPECT_EQ(snap.seed, 11u);
    EXPECT_EQ(snap.rescaling.n, 40);
    EXPECT_EQ(snap.output_dir, (d / "out").string());
}

TEST(Cli, BrownianGridIsTwoX) {
    auto d = scratch("brown");
    fs::create_directories(d);
    put(d / "c.json", R"({"model": {"family": "brownian"}, "scale": {"x_min": 0, "x_max": 5, "points": 11}})");
    ASSERT_EQ(cli("scale-fn -c " + (d / "c.json").string() + " -o " + (d / "out").string()), 0);
    auto r = rows(d / "out" / "scale_fn.csv");
    ASSERT_EQ(r.size(), 11u);
    for (const auto& row : r) {
        EXPECT_NEAR(std::stod(row[1]), 2 * std::stod(row[0]), 1e-14);
        EXPECT_EQ(row[2], "closed_form");
    }
}

TEST(Cli, StableGridTalbot) {
    auto d = scratch("stable");
    fs::create_directories(d);
    put(d / "c.json", R"({"model": {"family": "stable", "alpha": 1.5}, "scale": {"x_min": 0.1, "x_max": 5, "points": 6, "method": "talbot"}})");
    ASSERT_EQ(cli("scale-fn -c " + (d / "c.json").string() + " -o " + (d / "out").string()), 0);
    for (const auto& row : rows(d / "out" / "scale_fn.csv")) {
        double x = std::stod(row[0]);
        EXPECT_NEAR(std::stod(row[1]), std::sqrt(x) / std::tgamma(1.5), 1e-9);
        EXPECT_EQ(row[2], "talbot");
    }
}

TEST(Cli, EmptyGridGivesHeaderOnly) {
    auto d = scratch("empty");
    fs::create_directories(d);
    put(d / "c.json", R"({"scale": {"points": 0}})");
    ASSERT_EQ(cli("scale-fn -c " + (d / "c.json").string() + " -o " + (d / "out").string()), 0);
    auto text = slurp(d / "out" / "scale_fn.csv");
    EXPECT_NE(text.find("x,W,method\r\n"), std::string::npos);
    EXPECT_TRUE(rows(d / "out" / "scale_fn.csv").empty());
}

TEST(Cli, FixedSeedGivesIdenticalFiles) {
    auto d = scratch("seed");
    fs::create_directories(d);
    put(d / "c.json", R"({"model": {"regime": "B1", "beta": 1}, "rescaling": {"n": 20}, "genealogy": {"I_n": 200}, "rng": {"seed": 3}})");
    ASSERT_EQ(cli("simulate -c " + (d / "c.json").string() + " -o " + (d / "a").string()), 0);
    ASSERT_EQ(cli("simulate -c " + (d / "c.json").string() + " --threads 4 -o " + (d / "b").string()), 0);
    EXPECT_EQ(slurp(d / "a" / "cpp_n20.json"), slurp(d / "b" / "cpp_n20.json"));
    EXPECT_EQ(rows(d / "a" / "cpp_n20.csv"), rows(d / "b" / "cpp_n20.csv"));
    EXPECT_EQ(rows(d / "a" / "cpp_n20.csv").size(), 199u);
    ASSERT_EQ(cli("simulate -c " + (d / "c.json").string() + " --seed 4 -o " + (d / "c").string()), 0);
    EXPECT_NE(rows(d / "a" / "cpp_n20.csv"), rows(d / "c" / "cpp_n20.csv"));
}

TEST(Cli, SingleLineageGivesEmptyAtoms) {
    auto d = scratch("in1");
    fs::create_directories(d);
    put(d / "c.json", R"({"genealogy": {"I_n": 1}})");
    ASSERT_EQ(cli("simulate -c " + (d / "c.json").string() + " -o " + (d / "out").string()), 0);
    EXPECT_TRUE(rows(d / "out" / "cpp_n100.csv").empty());
    auto j = json::parse(slurp(d / "out" / "cpp_n100.json"));
    EXPECT_EQ(j.at("schema"), kCppSchema);
    EXPECT_TRUE(j.at("atoms").empty());
}

TEST(Cli, SimulateSummaryTracksDepthProbability) {
    auto d = scratch("frac");
    fs::create_directories(d);
    put(d / "c.json", R"({"rescaling": {"n": 10}, "genealogy": {"I_n": 20001}, "output": {"formats": ["json"]}})");
    ASSERT_EQ(cli("simulate -c " + (d / "c.json").string() + " -o " + (d / "out").string()), 0);
    auto s = json::parse(slurp(d / "out" / "summary.json")).at("runs").at(0);
    double p = s.at("p_n_eps"), f = s.at("depth_fraction"), se = s.at("depth_fraction_se");
    EXPECT_NEAR(p, 0.45, 1e-12);
    EXPECT_NEAR(f, p, 3 * se);
    EXPECT_FALSE(fs::exists(d / "out" / "cpp_n10.csv"));
}

TEST(Cli, LimitTableSumsToPEps) {
    auto d = scratch("limit");
    fs::create_directories(d);
    put(d / "c.json", R"({"model": {"family": "brownian", "regime": "B1", "beta": 0}, "genealogy": {"replicas": 300}})");
    ASSERT_EQ(cli("limit -c " + (d / "c.json").string() + " -o " + (d / "out").string()), 0);
    auto r = rows(d / "out" / "limit_cpp.csv");
    ASSERT_FALSE(r.empty());
    for (const auto& row : r) EXPECT_EQ(row[3], "0");
    auto t = rows(d / "out" / "pi_table.csv");
    ASSERT_EQ(t.size(), 2u);  // m = 0 and the sum row
    EXPECT_NEAR(std::stod(t.back()[1]), 4.5, 1e-9);

    put(d / "b.json", R"({"model": {"family": "brownian", "regime": "B1", "beta": 1}, "genealogy": {"replicas": 50}})");
    ASSERT_EQ(cli("limit -c " + (d / "b.json").string() + " -o " + (d / "out2").string()), 0);
    auto t2 = rows(d / "out2" / "pi_table.csv");
    ASSERT_GT(t2.size(), 3u);
    EXPECT_EQ(t2.back()[0], "sum");
    EXPECT_NEAR(std::stod(t2.back()[1]), 4.5, 1e-9);
    EXPECT_NEAR(std::stod(t2[0][1]), 3.91062, 1e-5);
}

TEST(Cli, KernelsWriteTables) {
    auto d = scratch("kern");
    fs::create_directories(d);
    put(d / "c.json", R"({"model": {"family": "stable", "alpha": 1.5, "regime": "B2", "kappa": 0.5}, "kernels": {"kernel": "nu_init", "points": 4}})");
    ASSERT_EQ(cli("kernels -c " + (d / "c.json").string() + " -o " + (d / "out").string()), 0);
    auto r = rows(d / "out" / "kernel_nu_init.csv");
    EXPECT_EQ(r.size(), 8u);  // 4 points x 2 marks, no atoms for a stable limit
    put(d / "u.json", R"({"model": {"family": "brownian"}, "kernels": {"kernel": "U_star", "l": 0.7, "points": 3}})");
    ASSERT_EQ(cli("kernels -c " + (d / "u.json").string() + " -o " + (d / "out2").string()), 0);
    auto u = rows(d / "out2" / "kernel_U_star.csv");
    ASSERT_EQ(u.size(), 4u);
    double z = std::stod(u[1][1]);
    EXPECT_NEAR(std::stod(u[1][3]), 2 * std::exp(-1.4 * z), 1e-12);
    put(d / "x.json", R"({"kernels": {"kernel": "nope"}})");
    EXPECT_EQ(cli("kernels -c " + (d / "x.json").string() + " -o " + (d / "out3").string()), 2);
}

TEST(Cli, CalibrationSuitePasses) {
    auto d = scratch("verify");
    EXPECT_EQ(cli("verify -o " + d.string()), 0);
    auto j = json::parse(slurp(d / "report.json"));
    EXPECT_EQ(j.at("schema"), kReportSchema);
    EXPECT_TRUE(j.at("pass").get<bool>());
    EXPECT_GE(j.at("reports").size(), 16u);
}

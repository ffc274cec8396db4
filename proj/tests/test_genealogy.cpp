#include <gtest/gtest.h>

#include <sptree/genealogy.hpp>
#include <sptree/verify.hpp>

using namespace sptree;

namespace {
MarkedExcursion hand_path(bool first_marked, double first_jump, double second_level, bool second_marked) {
    MarkedExcursion e;
    e.start_level = 1.0;
    e.segments.push_back({0.7, first_jump, first_marked, 0.3});
    e.segments.push_back({0.3 + first_jump - second_level, 0.6, second_marked, second_level});
    e.end_reason = EndReason::CrossedTau;
    e.end_level = second_level + 0.6;
    return e;
}
}  // namespace

TEST(Lineage, MarkedCoalescence) {
    auto L = extract_lineage_measure(hand_path(true, 0.4, 0.5, false), 1.0);
    EXPECT_DOUBLE_EQ(L.coalescence_depth, 0.7);
    ASSERT_EQ(L.mutation_depths.size(), 1u);
    EXPECT_DOUBLE_EQ(L.mutation_depths[0], 0.7);
    EXPECT_TRUE(L.coalescence_is_mutation);
    EXPECT_TRUE(L.valid(1.0));
}

TEST(Lineage, UnmarkedCoalescence) {
    auto L = extract_lineage_measure(hand_path(false, 0.5, 0.6, true), 1.0);
    EXPECT_NEAR(L.coalescence_depth, 0.7, 1e-15);
    ASSERT_EQ(L.mutation_depths.size(), 1u);
    EXPECT_NEAR(L.mutation_depths[0], 0.4, 1e-15);
    EXPECT_FALSE(L.coalescence_is_mutation);
}

TEST(Lineage, RequiresCrossing) {
    auto e = hand_path(false, 0.5, 0.6, true);
    e.end_reason = EndReason::HitZero;
    EXPECT_THROW(extract_lineage_measure(e, 1.0), ContractError);
}

TEST(Lineage, NoMutationFunctionNoMutations) {
    auto m = example1_model(10);
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) EXPECT_TRUE(extract_lineage_measure(sample_excursion_below_tau(m, 1.0, rng), 1.0).mutation_depths.empty());
}

TEST(Lineage, SampledMeasuresAreValid) {
    auto m = example1_model(10, MutationFunction::constant(0.3));
    Rng rng(4);
    for (int i = 0; i < 3000; ++i) {
        auto L = extract_lineage_measure(sample_excursion_below_tau(m, 1.0, rng), 1.0);
        EXPECT_TRUE(L.valid(1.0));
    }
}

TEST(Restrict, Examples) {
    LineageMeasure L{0.7, {0.4}, false};
    auto a = restrict_to_epsilon(L, 0.5);
    ASSERT_TRUE(a);
    EXPECT_DOUBLE_EQ(a->coalescence_depth, 0.7);
    EXPECT_TRUE(a->mutation_depths.empty());
    EXPECT_EQ(*restrict_to_epsilon(L, 0.1), L);
    EXPECT_FALSE(restrict_to_epsilon(L, 0.8));
    EXPECT_EQ(L.mutations_at_least(0.4), 1u);
    EXPECT_EQ(L.mutations_at_least(0.41), 0u);
}

TEST(MarkedCpp, Positions) {
    auto m = example1_model(10);
    auto cpp = simulate_marked_cpp(m, {10, 50}, 1.0, 5, 1);
    ASSERT_EQ(cpp.atoms.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(cpp.atoms[i].position, 0.2 * (i + 1), 1e-14);
    EXPECT_TRUE(cpp.warnings.empty());
    EXPECT_TRUE(simulate_marked_cpp(m, {10, 50}, 1.0, 1, 1).atoms.empty());
    EXPECT_THROW(simulate_marked_cpp(m, {10, 50}, 1.0, 0, 1), DomainError);
    EXPECT_EQ(default_I_n(10, 50), 5);
}

TEST(MarkedCpp, PositionsBeyondUnitIntervalWarn) {
    auto cpp = simulate_marked_cpp(example1_model(10), {10, 50}, 1.0, 8, 1);
    EXPECT_FALSE(cpp.warnings.empty());
}

TEST(MarkedCpp, DeterministicAcrossThreadCounts) {
    auto m = example1_model(10, MutationFunction::constant(0.2));
    auto a = simulate_marked_cpp(m, {10, 50}, 1.0, 400, 77, {1});
    auto b = simulate_marked_cpp(m, {10, 50}, 1.0, 400, 77, {4});
    ASSERT_EQ(a.atoms.size(), b.atoms.size());
    for (std::size_t i = 0; i < a.atoms.size(); ++i) EXPECT_EQ(a.atoms[i], b.atoms[i]);
    auto c = simulate_marked_cpp(m, {10, 50}, 1.0, 400, 78, {1});
    EXPECT_NE(a.atoms[0].lineage.coalescence_depth, c.atoms[0].lineage.coalescence_depth);
}

TEST(MarkedCpp, DepthFraction) {
    auto m = example1_model(10);
    const int N = 100000;
    auto cpp = simulate_marked_cpp(m, {10, 50}, 1.0, N + 1, 5);
    int hit = 0;
    for (const auto& a : cpp.atoms) hit += a.lineage.coalescence_depth >= 0.5;
    double p = p_depth_at_least(m, 1.0, 0.5);
    EXPECT_NEAR(p, 1.0 / 12.0, 1e-12);
    EXPECT_NEAR(hit / double(N), p, 3 * std::sqrt(p * (1 - p) / N));
}

TEST(PopulationCount, Geometric) {
    auto m = example1_model(10);
    EXPECT_NEAR(population_count_parameter(m, 1.0), 1.0 / 11.0, 1e-14);
    const int N = 10000;
    double s = 0, s2 = 0;
    Rng rng(8, "xi");
    for (int i = 0; i < N; ++i) {
        double k = static_cast<double>(simulate_population_count(m, 1.0, rng));
        ASSERT_GE(k, 1.0);
        s += k;
        s2 += k * k;
    }
    double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    EXPECT_NEAR(mean, 11.0, 3 * se);
}

TEST(PopulationCount, RescaledCountApproachesExponential) {
    // (n/d_n) Xi -> Exponential(1/W(tau)) = Exponential(1/2)
    std::vector<double> D;
    for (double n : {20.0, 80.0}) {
        auto m = example1_model(n);
        std::vector<double> v;
        Rng rng(12, "xi-limit", static_cast<std::uint64_t>(n));
        for (int i = 0; i < 10000; ++i) v.push_back(static_cast<double>(simulate_population_count(m, 1.0, rng)) * n / (n * n / 2));
        D.push_back(ks_test(v, [](double x) { return 1 - std::exp(-x / 2); }).statistic);
    }
    EXPECT_LT(D[1], D[0]);
}

TEST(Upsilon, ExactSamplerMatchesFullExcursions) {
    auto m = example1_model(20, MutationFunction::constant(0.2));
    const double tau = 1.0, eps = 0.2;
    std::vector<double> a, b;
    double ma = 0, mb = 0;
    Rng r1(3, "full"), r2(3, "exact");
    while (a.size() < 3000) {
        auto u = upsilon_of(sample_excursion_below_tau(m, tau, r1), tau, eps);
        if (u) {
            a.push_back(u->depth);
            ma += u->marked;
        }
    }
    while (b.size() < 3000) {
        auto u = sample_upsilon(m, tau, eps, r2);
        b.push_back(u.depth);
        mb += u.marked;
    }
    EXPECT_GT(ks_two_sample(a, b).p_value, 1e-3);
    double p = (ma + mb) / 6000;
    EXPECT_NEAR(ma / 3000, mb / 3000, 4 * std::sqrt(2 * p * (1 - p) / 3000));
    for (double d : b) {
        EXPECT_GE(d, eps);
        EXPECT_LT(d, tau);
    }
}

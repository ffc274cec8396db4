#include <gtest/gtest.h>

#include <sptree/path_sim.hpp>

using namespace sptree;

namespace {
PathStopRule exit_rule(double tau) {
    return PathStopRule::first_of({PathStopRule::hit_level(0.0), PathStopRule::cross_above(tau)});
}

MarkedExcursion hand_path(bool first_marked, double first_jump, double second_level, bool second_marked) {
    MarkedExcursion e;
    e.start_level = 1.0;
    e.drift = -1.0;
    e.segments.push_back({0.7, first_jump, first_marked, 0.3});
    double top = 0.3 + first_jump;
    e.segments.push_back({top - second_level, 0.6, second_marked, second_level});
    e.end_reason = EndReason::CrossedTau;
    e.end_level = second_level + 0.6;
    return e;
}
}  // namespace

TEST(SamplePath, PureDescent) {
    ModelSpec s;
    s.drift = -1.0;
    LevyModel m(s);
    Rng rng(1);
    auto e = sample_path(m, 3.0, PathStopRule::hit_level(0.0), rng);
    EXPECT_EQ(e.end_reason, EndReason::HitZero);
    EXPECT_DOUBLE_EQ(e.lifetime(), 3.0);
    EXPECT_DOUBLE_EQ(e.infimum(), 0.0);
    EXPECT_EQ(e.jump_count(), 0u);
}

TEST(SamplePath, RejectsNonSamplableModels) {
    Rng rng(1);
    EXPECT_THROW(sample_path(brownian_model(), 1.0, PathStopRule::hit_level(0.0), rng), ContractError);
    ModelSpec s;
    EXPECT_ANY_THROW(sample_path(LevyModel(s), 1.0, PathStopRule::hit_level(0.0), rng));
}

TEST(SamplePath, SameSeedSameSkeleton) {
    auto m = example1_model(10, MutationFunction::constant(0.3));
    Rng a(99, "x", 1), b(99, "x", 1);
    auto e1 = sample_path(m, 1.0, exit_rule(1.0), a);
    auto e2 = sample_path(m, 1.0, exit_rule(1.0), b);
    EXPECT_EQ(skeleton_string(e1), skeleton_string(e2));
}

TEST(SamplePath, JumpCountOnWindowIsPoisson) {
    // n = 10, d_n = 50: jump rate 50
    auto m = example1_model(10);
    PathStopRule horizon;
    horizon.max_jumps = 400;
    const int N = 10000;
    double s = 0, s2 = 0;
    for (int i = 0; i < N; ++i) {
        Rng rng(5, "window", i);
        auto e = sample_path(m, 0.0, horizon, rng);
        ASSERT_GT(e.lifetime(), 1.0);
        double k = static_cast<double>(e.jumps_before(1.0));
        s += k;
        s2 += k * k;
    }
    double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    EXPECT_NEAR(mean, 50.0, 3 * se);
}

TEST(Excursion, AcceptanceRate) {
    auto m = example1_model(10);
    EXPECT_NEAR(excursion_acceptance(m, 1.0), 10.0 / 11.0, 1e-12);
    const int N = 10000;
    int acc = 0;
    Rng rng(11, "acc");
    for (int i = 0; i < N; ++i) acc += sample_path(m, 1.0, exit_rule(1.0), rng).end_reason == EndReason::CrossedTau;
    double p = 10.0 / 11.0;
    EXPECT_NEAR(acc / double(N), p, 3 * std::sqrt(p * (1 - p) / N));
}

TEST(Excursion, ConditionedExcursionStaysPositive) {
    auto m = example1_model(10, MutationFunction::constant(0.2));
    Rng rng(3);
    std::size_t rej = 0;
    for (int i = 0; i < 2000; ++i) {
        auto e = sample_excursion_below_tau(m, 1.0, rng, &rej);
        EXPECT_EQ(e.end_reason, EndReason::CrossedTau);
        EXPECT_GT(e.infimum(), 0.0);
        EXPECT_GT(e.end_level, 1.0);
    }
    EXPECT_GT(rej, 0u);
}

TEST(Excursion, DepthProbability) {
    // p_{n,eps} at n = 10, d_n = 50, eps = 0.5
    auto m = example1_model(10);
    const double W0 = 0.2, We = 1.2, Wt = 2.2;
    const double p = W0 * (1 / We - 1 / Wt) / (1 - W0 / Wt);
    EXPECT_NEAR(p, 0.083333333, 1e-8);
    const int N = 100000;
    int hit = 0;
    Rng rng(17, "depth");
    for (int i = 0; i < N; ++i) hit += 1.0 - sample_excursion_below_tau(m, 1.0, rng).infimum() >= 0.5;
    EXPECT_NEAR(hit / double(N), p, 3 * std::sqrt(p * (1 - p) / N));
}

TEST(Excursion, TinyAcceptanceIsAConfigError) {
    // W(0)/W(tau) -> 1 when tau is tiny relative to 1/n
    auto m = example1_model(1.0, MutationFunction::zero(), 1.0);
    EXPECT_THROW({
        Rng rng(1);
        sample_excursion_below_tau(m, 1e-7, rng);
    }, DomainError);
}

TEST(FutureInfimum, HandComputedChain) {
    auto e = hand_path(true, 0.4, 0.5, false);
    auto fi = future_infimum(e);
    ASSERT_EQ(fi.size(), 2u);
    EXPECT_DOUBLE_EQ(fi[0].level, 0.3);
    EXPECT_TRUE(fi[0].marked);
    EXPECT_DOUBLE_EQ(fi[1].level, 0.5);
    EXPECT_FALSE(fi[1].marked);
    EXPECT_LT(fi[0].time, fi[1].time);
}

TEST(FutureInfimum, LevelsIncreaseAndMatchReversedRecords) {
    auto m = example1_model(20, MutationFunction::constant(0.1));
    Rng rng(23);
    for (int i = 0; i < 500; ++i) {
        auto e = sample_excursion_below_tau(m, 1.0, rng);
        auto fi = future_infimum(e);
        ASSERT_FALSE(fi.empty());
        for (std::size_t k = 1; k < fi.size(); ++k) EXPECT_GT(fi[k].level, fi[k - 1].level);
        // depth path of the reversed excursion: its start and records are the chain depths
        auto r = reversed_depth_path(e, 1.0);
        std::vector<double> depths{r.start_level};
        for (const auto& rec : ladder_records(r)) depths.push_back(rec.level);
        ASSERT_EQ(depths.size(), fi.size());
        for (std::size_t k = 0; k < fi.size(); ++k) EXPECT_NEAR(depths[k], 1.0 - fi[fi.size() - 1 - k].level, 1e-12);
    }
}

TEST(LadderRecords, PureDriftHasNone) {
    ModelSpec s;
    s.drift = -1.0;
    Rng rng(1);
    auto e = sample_path(LevyModel(s), 0.0, PathStopRule::hit_level(-1.0), rng);
    EXPECT_TRUE(ladder_records(e).empty());
}

TEST(LadderRecords, IncreasingAndMarkedAtRateTheta) {
    const double theta = 0.1;
    auto m = example1_model(10, MutationFunction::constant(theta));
    auto rule = PathStopRule::first_of({PathStopRule::hit_level(-1.0), PathStopRule::cross_above(2.0)});
    Rng rng(31);
    std::size_t total = 0, marked = 0;
    while (total < 100000) {
        auto e = sample_path(m, 0.0, rule, rng);
        auto rec = ladder_records(e);
        for (std::size_t k = 0; k < rec.size(); ++k) {
            if (k) {
                EXPECT_GT(rec[k].level, rec[k - 1].level);
            }
            EXPECT_NEAR(rec[k].increment + rec[k].undershoot, rec[k].jump, 1e-12);
            marked += rec[k].marked;
        }
        total += rec.size();
    }
    double p = marked / double(total);
    EXPECT_NEAR(p, theta, 3 * std::sqrt(theta * (1 - theta) / double(total)));
}

TEST(Skeleton, DumpHasOneLinePerSegment) {
    auto e = hand_path(true, 0.4, 0.5, false);
    auto s = skeleton_string(e);
    EXPECT_NE(s.find("end_reason=CrossedTau"), std::string::npos);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}

#include <gtest/gtest.h>

#include <sptree/limit_process.hpp>
#include <sptree/verify.hpp>

using namespace sptree;

TEST(AssembleSigma, Examples) {
    auto h = [](double t) { return t / 2; };
    auto L = assemble_sigma(h, {0.4, 1.0}, 1.2);
    EXPECT_DOUBLE_EQ(L.coalescence_depth, 0.6);
    ASSERT_EQ(L.mutation_depths.size(), 2u);
    EXPECT_DOUBLE_EQ(L.mutation_depths[0], 0.2);
    EXPECT_DOUBLE_EQ(L.mutation_depths[1], 0.5);
    EXPECT_FALSE(L.coalescence_is_mutation);

    auto E = assemble_sigma(h, {}, 1.0);
    EXPECT_TRUE(E.mutation_depths.empty());
    EXPECT_DOUBLE_EQ(E.coalescence_depth, 0.5);

    auto B = assemble_sigma(h, {0.3, 1.0}, 1.0);
    EXPECT_TRUE(B.coalescence_is_mutation);
    EXPECT_DOUBLE_EQ(B.mutation_depths.back(), B.coalescence_depth);

    // mutations after l are outside the lineage
    EXPECT_EQ(assemble_sigma(h, {0.3, 2.0}, 1.0).mutation_depths.size(), 1u);
    EXPECT_THROW(assemble_sigma(h, {1.0, 0.3}, 2.0), ContractError);
    EXPECT_THROW(assemble_sigma(h, {}, -1.0), DomainError);
}

TEST(HK, BrownianKillDepthLaw) {
    auto m = brownian_model();
    const double eps = 0.1, tau = 1.0, h = 0.2;
    HKSampler s(m, tau);
    const int N = 100000;
    int killed = 0, below = 0;
    Rng rng(7, "hk");
    for (int i = 0; i < N; ++i) {
        auto p = s.sample(eps, rng);
        if (!p.killed) continue;
        ++killed;
        EXPECT_GT(p.kill_depth, eps);
        EXPECT_LT(p.kill_depth, tau);
        below += p.kill_depth <= h;
    }
    double want = (1 / (2 * eps) - 1 / (2 * h)) / p_eps(m, eps, tau);
    EXPECT_NEAR(want, 0.555556, 1e-6);
    double got = below / double(killed);
    EXPECT_NEAR(got, want, 3 * std::sqrt(want * (1 - want) / killed));
    // not killed before tau with probability eps / tau
    EXPECT_NEAR(1 - killed / double(N), 0.1, 3 * std::sqrt(0.09 / N));
}

TEST(HK, StableJumpSizes) {
    const double tau = 1.0, a = 0.5, lo = 0.15, hi = 0.25;
    auto m = stable_limit_model(1.5);
    HKSampler s(m, tau);
    double in = num::integrate([&](double u) { return mu_K_stable_closed_form(1.5, tau, a, u, MuKWeighting::Defective); }, lo, hi, 1e-12);
    double p = in / s.jump_rate(a);
    const int N = 100000;
    int hit = 0;
    Rng rng(3);
    for (int i = 0; i < N; ++i) {
        double u = s.sample_jump(a, rng);
        hit += u >= lo && u < hi;
    }
    EXPECT_NEAR(hit / double(N), p, 3 * std::sqrt(p * (1 - p) / N));
}

TEST(HK, JumpsRespectSupport) {
    HKOptions opt;
    opt.weighting = MuKWeighting::Stated;
    opt.delta = 1e-2;
    auto m = stable_limit_model(1.5, 0.0, 0.5);
    HKSampler s(m, 1.0, opt);
    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
        auto p = s.sample(0.2, rng);
        for (const auto& e : p.events)
            if (e.kind == HKEventKind::Jump) {
                EXPECT_LT(e.depth_after - e.depth_before, 1.0 - e.depth_before);
                EXPECT_GT(e.depth_after, e.depth_before);
            }
    }
}

TEST(HK, InfiniteMassWithoutCutoffFails) {
    HKOptions opt;
    opt.delta = 0.0;
    EXPECT_THROW(HKSampler(stable_limit_model(1.5), 1.0, opt), NumericError);
    EXPECT_THROW(HKSampler(brownian_model(), 1.0).sample(1.0, *std::make_unique<Rng>(1)), DomainError);
}

TEST(Chain, BrownianNoMutations) {
    auto m = brownian_model();
    ChainSampler cs(m, 0.1, 1.0);
    EXPECT_EQ(cs.kind(), ChainKind::Brownian);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        auto h = cs.sample(rng);
        ASSERT_EQ(h.states.size(), 1u);
        EXPECT_EQ(h.K(), 0u);
        EXPECT_EQ(h.states[0].mark, 0);
        EXPECT_GE(h.absorption_depth(), 0.1);
        EXPECT_LT(h.absorption_depth(), 1.0);
    }
    EXPECT_NEAR(pi1_B(m, 0, 0.1, 1.0).value, p_eps(m, 0.1, 1.0), 1e-10);
    EXPECT_EQ(pi1_B(m, 1, 0.1, 1.0).value, 0.0);
}

TEST(Chain, BrownianKDistribution) {
    // beta = 1 mark per unit depth
    auto m = brownian_model(1.0, 0.5);
    ASSERT_DOUBLE_EQ(brownian_beta_eff(m), 1.0);
    const double eps = 0.1, tau = 1.0, pe = p_eps(m, eps, tau);
    ChainSampler cs(m, eps, tau);
    const int N = 100000;
    std::vector<int> count(4, 0);
    Rng rng(13, "K");
    for (int i = 0; i < N; ++i) {
        auto h = cs.sample(rng);
        for (std::size_t k = 1; k < h.states.size(); ++k) EXPECT_GT(h.states[k].depth, h.states[k - 1].depth);
        if (h.K() < 4) ++count[h.K()];
    }
    double total = 0;
    for (int k = 0; k < 4; ++k) {
        double want = pi1_B_brownian(m, k, eps, tau) / pe;
        total += want;
        EXPECT_NEAR(count[k] / double(N), want, 3 * std::sqrt(want * (1 - want) / N) + 1e-4) << "K=" << k;
    }
    EXPECT_LT(total, 1.0);
    // independent quadrature of the m = 0 integral, depth counted from eps
    double direct = num::integrate([](double h) { return std::exp(-(h - 0.1)) / (2 * h * h); }, 0.1, 1.0, 1e-12);
    EXPECT_NEAR(pi1_B_brownian(m, 0, eps, tau), direct, 1e-9);
}

TEST(Chain, ChainAndKilledSubordinatorAgree) {
    auto m = brownian_model();
    ChainSampler cs(m, 0.1, 1.0);
    HKSampler hk(m, 1.0);
    std::vector<double> a, b;
    Rng r1(1, "chain"), r2(1, "hk");
    while (a.size() < 10000) a.push_back(cs.sample(r1).absorption_depth());
    while (b.size() < 10000) {
        auto p = hk.sample(0.1, r2);
        if (p.killed) b.push_back(p.kill_depth);
    }
    EXPECT_GT(ks_two_sample(a, b).p_value, 0.01);
}

TEST(Chain, StableChainIsIncreasing) {
    auto m = stable_limit_model(1.5, 0.5);
    ChainOptions opt;
    opt.hk.delta = 1e-2;
    ChainSampler cs(m, 0.2, 1.0, opt);
    EXPECT_EQ(cs.kind(), ChainKind::General);
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        auto h = cs.sample(rng);
        ASSERT_FALSE(h.states.empty());
        EXPECT_EQ(h.states.back().mark, 0);
        for (std::size_t k = 1; k < h.states.size(); ++k) EXPECT_GT(h.states[k].depth, h.states[k - 1].depth);
        EXPECT_GE(h.states.front().depth, 0.2);
        EXPECT_LT(h.absorption_depth(), 1.0);
    }
}

TEST(Pi1, DivergenceOfAtLeastOne) {
    auto m = brownian_model(1.0, 0.5);
    std::vector<double> r1, r2;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        r1.push_back(pi1_at_least_full_lineage(m, 1, eps, 1.0) / std::log(1 / eps));
        r2.push_back(pi1_at_least_full_lineage(m, 2, eps, 1.0));
    }
    EXPECT_NEAR(r1[2] / r1[1], 1.0, 0.05);
    EXPECT_NEAR(r1[1] / r1[0], 1.0, 0.15);
    EXPECT_NEAR(r1[2], 0.5, 0.1);
    EXPECT_LT(r2[2] - r2[1], r2[1] - r2[0]);
    EXPECT_NEAR(r2[2], r2[1], 5e-3 * r2[2]);
}

TEST(LimitCpp, MeanCountAndUniformPositions) {
    auto m = brownian_model();
    const int N = 10000;
    double s = 0, s2 = 0;
    std::vector<double> pos;
    Rng rng(19, "cpp");
    for (int i = 0; i < N; ++i) {
        auto cpp = sample_limit_cpp(m, 1.0, 0.1, rng);
        double k = static_cast<double>(cpp.atoms.size());
        s += k;
        s2 += k * k;
        for (const auto& a : cpp.atoms) {
            EXPECT_TRUE(a.lineage.mutation_depths.empty());
            EXPECT_GE(a.lineage.coalescence_depth, 0.1);
            pos.push_back(a.position);
        }
    }
    double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    EXPECT_NEAR(mean, 4.5, 3 * se);
    EXPECT_GT(ks_test(pos, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value, 0.01);
}

TEST(LimitCpp, FirstLineageAndConditioning) {
    auto m = brownian_model(1.0, 0.5);
    LimitCppOptions opt;
    opt.first_lineage = true;
    opt.survival_conditioned = true;
    Rng rng(4);
    auto cpp = sample_limit_cpp(m, 1.0, 0.1, rng, opt);
    ASSERT_TRUE(cpp.first_lineage);
    EXPECT_DOUBLE_EQ(cpp.first_lineage->coalescence_depth, 1.0);
    EXPECT_EQ(cpp.regime, "B1");
    EXPECT_THROW(sample_limit_cpp(m, 1.0, 0.0, rng), DomainError);
}

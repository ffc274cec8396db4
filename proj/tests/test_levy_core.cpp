#include <gtest/gtest.h>

#include <sptree/levy_core.hpp>

using namespace sptree;

TEST(LaplaceExponent, ReferenceValues) {
    EXPECT_NEAR(laplace_exponent(brownian_model(), 2.0), 2.0, 1e-14);
    EXPECT_NEAR(laplace_exponent(example1_model(10), 1.0), 5.0 / 11.0, 1e-12);
    EXPECT_NEAR(laplace_exponent(stable_limit_model(1.5), 4.0), 8.0, 1e-12);
    EXPECT_THROW(laplace_exponent(brownian_model(), -1.0), DomainError);
}

TEST(LaplaceExponent, ConvexWithZeroAtOrigin) {
    for (const auto& m : {brownian_model(), example1_model(10), stable_limit_model(1.5), stable_base_model(1.5)}) {
        EXPECT_NEAR(m.psi(0.0), 0.0, 1e-12);
        for (double l : {0.5, 1.0, 2.0, 5.0}) {
            double h = 0.1;
            EXPECT_GE(m.psi(l + h) - 2 * m.psi(l) + m.psi(l - h), -1e-10) << m.label() << " at " << l;
        }
    }
}

TEST(LaplaceExponent, ComplexAgreesOnRealAxis) {
    for (const auto& m : {example1_model(10), stable_limit_model(1.3), stable_base_model(1.5)})
        for (double l : {0.3, 2.0}) EXPECT_NEAR(m.psi(cplx(l, 0.0)).real(), m.psi(l), 1e-8 * std::max(1.0, m.psi(l)));
}

TEST(Eta, RootsOfExamples) {
    EXPECT_EQ(largest_root_eta(brownian_model()), 0.0);
    EXPECT_EQ(largest_root_eta(stable_limit_model(1.5)), 0.0);
    ModelSpec s;
    s.drift = -1.0;
    s.jumps = JumpMeasure::exponential(2.0, 1.0);
    EXPECT_NEAR(largest_root_eta(LevyModel(s)), 1.0, 1e-10);
    // subcritical: no positive root
    s.jumps = JumpMeasure::exponential(0.5, 1.0);
    EXPECT_EQ(largest_root_eta(LevyModel(s)), 0.0);
}

TEST(InversePhi, ReferenceValuesAndIdentity) {
    EXPECT_NEAR(inverse_phi(brownian_model(), 2.0), 2.0, 1e-12);
    EXPECT_NEAR(inverse_phi(stable_limit_model(1.5), 8.0), 4.0, 1e-12);
    ModelSpec s;
    s.drift = -1.0;
    s.jumps = JumpMeasure::exponential(2.0, 1.0);
    LevyModel sup(s);
    for (const auto& m : {brownian_model(), example1_model(10), stable_limit_model(1.5), sup})
        for (double l : {1.5, 3.0, 7.0})
            if (l >= m.eta()) { EXPECT_NEAR(inverse_phi(m, laplace_exponent(m, l)), l, 1e-9 * l); }
}

TEST(ScaleFunction, ClosedFormRegistry) {
    EXPECT_NEAR(scale_function(brownian_model(), 1.0), 2.0, 1e-15);
    EXPECT_NEAR(scale_function(stable_limit_model(1.5), 1.0), 1.128379167, 1e-9);
    EXPECT_NEAR(scale_function(example1_model(10), 1.0), 2.2, 1e-14);
    // W(0) = n/d_n
    for (double n : {10.0, 25.0, 400.0}) EXPECT_DOUBLE_EQ(scale_function(example1_model(n), 0.0), n / (n * n / 2));
    EXPECT_EQ(scale_function(brownian_model(), -0.5), 0.0);
}

TEST(ScaleFunction, TalbotMatchesClosedForms) {
    for (double x : {0.1, 0.5, 1.0, 2.5, 5.0}) {
        EXPECT_NEAR(scale_function(brownian_model(), x, ScaleMethod::Talbot) / (2 * x), 1.0, 1e-6);
        EXPECT_NEAR(scale_function(stable_limit_model(1.5), x, ScaleMethod::Talbot) / (std::sqrt(x) / std::tgamma(1.5)), 1.0, 1e-6);
        EXPECT_NEAR(scale_function(example1_model(10), x, ScaleMethod::Talbot) / (0.2 + 2 * x), 1.0, 1e-6);
    }
}

TEST(ScaleFunction, SupercriticalUsesEtaShift) {
    // drift -1, Lambda = 2 e^{-r}: psi = l - 2l/(l+1) = l(l-1)/(l+1); 1/psi = 2/(l-1) - 1/l
    ModelSpec s;
    s.drift = -1.0;
    s.jumps = JumpMeasure::exponential(2.0, 1.0);
    LevyModel m(s);
    for (double x : {0.2, 1.0, 3.0}) EXPECT_NEAR(scale_function(m, x) / (2 * std::exp(x) - 1), 1.0, 1e-7);
}

TEST(ScaleFunction, RenewalAgreesWithClosedForm) {
    auto m = example1_model(10);
    // trapezoid grid: about 1e-3 relative at n = 10
    for (double x : {0.3, 1.0, 4.0}) EXPECT_NEAR(scale_function(m, x, ScaleMethod::Renewal) / (0.2 + 2 * x), 1.0, 2e-3);
}

TEST(ScaleFunction, TruncatedStableUsesRenewal) {
    auto m = rescale(stable_base_model(1.5), {10.0, std::pow(10.0, 1.5)});
    EXPECT_EQ(resolve_scale_method(m, ScaleMethod::Auto), ScaleMethod::Renewal);
    EXPECT_THROW(scale_function(m, 1.0, ScaleMethod::Talbot), NumericError);
    // increasing, and W(0) = n/d_n
    EXPECT_NEAR(scale_function(m, 0.0), 10.0 / std::pow(10.0, 1.5), 1e-12);
    double prev = 0;
    for (double x : {0.1, 0.5, 1.0, 2.0}) {
        double w = scale_function(m, x);
        EXPECT_GT(w, prev);
        prev = w;
    }
}

TEST(ScaleFunction, TwoSidedExitIsAProbability) {
    for (const auto& m : {brownian_model(), example1_model(10), stable_limit_model(1.7)})
        for (double x : {0.1, 0.5, 0.9}) {
            double p = scale_function(m, 1.0 - x) / scale_function(m, 1.0);
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
        }
}

TEST(ScaleFunction, Derivative) {
    EXPECT_NEAR(scale_derivative(brownian_model(), 0.7), 2.0, 1e-14);
    auto st = stable_limit_model(1.5);
    EXPECT_NEAR(scale_derivative(st, 0.5), 0.5 * std::pow(0.5, -0.5) / std::tgamma(1.5), 1e-12);
    ModelSpec s;
    s.drift = -1.0;
    s.jumps = JumpMeasure::exponential(2.0, 1.0);
    EXPECT_NEAR(scale_derivative(LevyModel(s), 1.0), 2 * std::exp(1.0), 1e-5);
}

TEST(ScaleFunction, DefectIsExact) {
    auto st = stable_limit_model(1.5);
    EXPECT_NEAR(scale_defect(st, 0.5, 1e-12) / (0.5 * 1e-12 / 0.5), 1.0, 1e-6);
    EXPECT_NEAR(scale_defect(st, 0.5, 0.2), 1 - std::sqrt(0.3 / 0.5), 1e-14);
    EXPECT_NEAR(scale_defect(example1_model(10), 1.0, 0.5), 1.0 / 2.2, 1e-14);
}

TEST(Rescale, ExponentialExample) {
    auto m = example1_model(10);
    EXPECT_DOUBLE_EQ(m.drift(), -5.0);
    EXPECT_NEAR(m.jumps().density(0.3), 500 * std::exp(-3.0), 1e-10);
    EXPECT_NEAR(m.jump_mass(), 50.0, 1e-12);
}

TEST(Rescale, IdentityScheme) {
    auto b = exponential_base_model();
    auto r = rescale(b, {1.0, 1.0});
    EXPECT_EQ(r.drift(), b.drift());
    for (double x : {0.1, 1.0}) EXPECT_DOUBLE_EQ(r.jumps().density(x), b.jumps().density(x));
}

TEST(Rescale, StableBaseTail) {
    const double a = 1.5, n = 10;
    auto r = rescale(stable_base_model(a), {n, std::pow(n, a)});
    for (double x : {0.2, 1.0, 3.0}) EXPECT_NEAR(r.jumps().tail(x), std::pow(x, -a) / (a * std::abs(std::tgamma(-a))), 1e-12);
    EXPECT_THROW(rescale(brownian_model(), {n, n}), ContractError);
}

TEST(Rescale, MutationKeepsBaseArgument) {
    auto r = example1_model(10, MutationFunction::linear_capped(0.1));
    // f_n(n r) with slope 0.1 on base sizes
    EXPECT_NEAR(r.mark_prob(0.5), 0.5, 1e-14);
    EXPECT_NEAR(r.mark_prob(5.0), 1.0, 0);
}

TEST(Model, Validation) {
    EXPECT_THROW(JumpMeasure::stable(2.5, 0.0), DomainError);
    EXPECT_THROW(MutationFunction::constant(1.5), DomainError);
    EXPECT_THROW(JumpMeasure::tabulated({{0.1, 1.0}}), DomainError);
    EXPECT_THROW(dn_rule("n_cubed", 2.0), DomainError);
    EXPECT_DOUBLE_EQ(dn_rule("n2_over_2", 10.0), 50.0);
    EXPECT_NEAR(dn_rule("n_pow_alpha", 4.0, 1.5), 8.0, 1e-14);
}

TEST(Model, TabulatedMeasureMoments) {
    auto j = JumpMeasure::tabulated({{0.0, 1.0}, {1.0, 1.0}, {2.0, 0.0}});
    EXPECT_NEAR(j.total_mass(), 1.5, 1e-14);
    EXPECT_NEAR(j.tail(1.0), 0.5, 1e-14);
    EXPECT_NEAR(j.first_moment(), 0.5 + (2.0 / 3.0), 1e-12);
    ModelSpec s;
    s.drift = -j.first_moment();
    s.jumps = j;
    LevyModel m(s);
    EXPECT_EQ(m.eta(), 0.0);
    EXPECT_NEAR(scale_function(m, 0.0), 1.0 / j.first_moment(), 1e-14);
    // critical: W increases to infinity, Talbot agrees with renewal
    EXPECT_NEAR(scale_function(m, 1.0, ScaleMethod::Talbot) / scale_function(m, 1.0, ScaleMethod::Renewal), 1.0, 2e-3);
}

TEST(Model, KillRate) {
    EXPECT_EQ(example1_model(10).kill_rate(), 0.0);
    ModelSpec s;
    s.drift = -2.0;
    s.jumps = JumpMeasure::exponential(1.0, 1.0);
    EXPECT_NEAR(LevyModel(s).kill_rate(), 1.0, 1e-14);
    // subcritical: W(inf) = 1/kill
    EXPECT_NEAR(scale_function(LevyModel(s), 40.0), 1.0, 1e-6);
}

#include <gtest/gtest.h>

#include "support.hpp"

using namespace certirl;
using namespace testing_support;

TEST(Fgst, ZeroRadiusIsIdentity) {
    const auto net = random_net(1, {.min_actions = 2});
    Rng rng(1);
    const Observation s0 = oracle::random_center(rng, net.input_dim);
    EXPECT_EQ(fgst_perturb(net, s0, Vector::Zero(net.input_dim)), s0);
}

TEST(Fgst, LandsOnPerimeterWhereGradientIsNonzero) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto net = random_net(seed, {.min_actions = 2});
        Rng rng(seed);
        const Observation s0 = oracle::random_center(rng, net.input_dim);
        Vector eps(net.input_dim);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.uniform(0.01, 0.3);
        const Observation s = fgst_perturb(net, s0, eps);
        Vector y = Vector::Zero(net.output_dim());
        y(static_cast<Eigen::Index>(argmin_first(forward(net, s0)))) = 1.0;
        const Vector g = input_gradient(net, s0, y);
        EXPECT_TRUE(EpsBall(s0, eps).contains(s));
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            if (g(i) != 0.0) EXPECT_NEAR(std::abs(s(i) - s0(i)), eps(i), 1e-12 * (1 + std::abs(s0(i))));
            else EXPECT_EQ(s(i), s0(i));
        }
    }
}

TEST(Fgst, MaskedDimensionsUntouched) {
    const auto net = random_net(2, {.min_input = 4, .max_input = 4, .min_actions = 2});
    const Observation s0 = vec({0.1, -0.2, 0.3, 0.05});
    const Observation s = fgst_perturb(net, s0, vec({0, 0.1, 0, 0.1}));
    EXPECT_EQ(s(0), s0(0));
    EXPECT_EQ(s(2), s0(2));
}

TEST(Fgst, FlipsLinearTwoActionDecision) {
    const auto net = load_network(fixture("identity.json"));
    const Observation s0 = vec({1, 0});
    ASSERT_EQ(argmin_first(forward(net, s0)), 1u);
    const Observation s = fgst_perturb(net, s0, vec({0.6, 0.6}));
    // moves toward making action 1 look best
    EXPECT_DOUBLE_EQ(s(0), 0.4);
    EXPECT_DOUBLE_EQ(s(1), 0.6);
    EXPECT_EQ(argmax_first(forward(net, s)), 1u);
    // too small to flip
    EXPECT_EQ(argmax_first(forward(net, fgst_perturb(net, s0, vec({0.2, 0.2})))), 0u);
}

TEST(Fgst, Errors) {
    const auto net = load_network(fixture("identity.json"));
    EXPECT_THROW(fgst_perturb(net, vec({1, 0}), vec({0.1})), ValidationError);
    EXPECT_THROW(fgst_perturb(net, vec({1, 0}), vec({-0.1, 0.1})), ContractViolation);
}

TEST(UniformNoise, ZeroSigmaAndSupport) {
    Rng rng(3);
    const Observation s0 = vec({1, -2, 3});
    EXPECT_EQ(uniform_noise_perturb(s0, Vector::Zero(3), rng), s0);
    const Vector sigma = vec({0.1, 0.5, 0});
    for (int i = 0; i < 10000; ++i) {
        const Observation s = uniform_noise_perturb(s0, sigma, rng);
        EXPECT_TRUE(((s - s0).cwiseAbs().array() <= sigma.array()).all());
        EXPECT_EQ(s(2), s0(2));
    }
    EXPECT_THROW(uniform_noise_perturb(s0, vec({-1, 0, 0}), rng), ContractViolation);
}

TEST(UniformNoise, MeanWithinThreeStandardErrors) {
    Rng rng(11);
    const Observation s0 = vec({0.5, -1.0});
    const Vector sigma = vec({0.2, 1.0});
    const int n = 100000;
    Vector sum = Vector::Zero(2);
    for (int i = 0; i < n; ++i) sum += uniform_noise_perturb(s0, sigma, rng);
    const Vector mean = sum / n;
    for (Eigen::Index i = 0; i < 2; ++i) {
        const double se = sigma(i) / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
        EXPECT_LE(std::abs(mean(i) - s0(i)), 3 * se);
    }
}

TEST(Apply, Dispatch) {
    const auto net = random_net(6, {.min_actions = 2});
    Rng r(1);
    const Observation s0 = oracle::random_center(r, net.input_dim);
    const Vector eps = Vector::Constant(net.input_dim, 0.1);
    Rng a(5), b(5);
    EXPECT_EQ(apply({PerturbationKind::none, eps, eps}, net, s0, a), s0);
    EXPECT_EQ(apply({PerturbationKind::fgst, eps, eps}, net, s0, a), fgst_perturb(net, s0, eps));
    EXPECT_EQ(apply({PerturbationKind::uniform_noise, eps, eps}, net, s0, a), uniform_noise_perturb(s0, eps, b));
    EXPECT_EQ(parse_perturbation_kind("noise"), PerturbationKind::uniform_noise);
    EXPECT_THROW(parse_perturbation_kind("pgd"), ValidationError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dpg/error.hpp"
#include "dpg/shaping.hpp"

using namespace dpg;

namespace {

PolicyDistribution random_policy(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double z = 0.0;
    for (double& x : p) z += (x = rng.uniform(0.01, 1.0));
    for (double& x : p) x /= z;
    return PolicyDistribution(p);
}

}  // namespace

TEST(Mix, ExamplesByHand) {
    const PolicyDistribution p({0.5, 0.3, 0.2});
    const auto m = mix(p, AdviceVector({0.0, 1.0, 1.0}));
    EXPECT_DOUBLE_EQ(m[0], 0.0);
    EXPECT_DOUBLE_EQ(m[1], 0.6);
    EXPECT_DOUBLE_EQ(m[2], 0.4);

    const auto q = mix(PolicyDistribution({0.25, 0.75}), AdviceVector({0.6, 0.4}));
    EXPECT_NEAR(q[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(q[1], 2.0 / 3.0, 1e-15);

    const auto d = mix(p, AdviceVector::directive(3, 2));
    EXPECT_EQ(d[2], 1.0);
    EXPECT_EQ(d[0], 0.0);
}

TEST(Mix, AgreesWithBruteForce) {
    Rng rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.index(6);
        const auto p = random_policy(rng, n);
        std::vector<double> a(n);
        for (double& x : a) x = rng.uniform(0.0, 3.0);
        const auto m = mix(p, AdviceVector(a));
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) z += p[i] * a[i];
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(m[i], p[i] * a[i] / z, 1e-12);
    }
}

TEST(Mix, NeutralIdentityAndScaleInvariance) {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.index(5);
        const auto p = random_policy(rng, n);
        const auto same = mix(p, AdviceVector::neutral(n));
        std::vector<double> a(n);
        for (double& x : a) x = rng.uniform(0.1, 2.0);
        std::vector<double> a8 = a;
        for (double& x : a8) x *= 8.0;  // power of two: scaling is exact
        const auto m1 = mix(p, AdviceVector(a));
        const auto m8 = mix(p, AdviceVector(a8));
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(same[i], p[i], 1e-15);
            EXPECT_EQ(m1[i], m8[i]);
        }
    }
}

TEST(Mix, DisjointSupportThrows) {
    const PolicyDistribution p({1.0, 0.0});
    EXPECT_THROW(mix(p, AdviceVector::directive(2, 1)), ContractError);
    EXPECT_THROW(mix(p, AdviceVector::neutral(3)), ContractError);
}

TEST(AdviceVector, Validation) {
    EXPECT_THROW(AdviceVector({0.0, 0.0}), ContractError);
    EXPECT_THROW(AdviceVector({-1.0, 2.0}), ContractError);
    EXPECT_THROW(AdviceVector({std::nan(""), 1.0}), ContractError);
    EXPECT_TRUE(AdviceVector::directive(4, 2).is_directive());
    EXPECT_EQ(AdviceVector::directive(4, 2).directed_action(), 2u);
    EXPECT_TRUE(AdviceVector({3.0, 3.0}).is_uniform());
    EXPECT_FALSE(AdviceVector::neutral(3).is_directive());
}

TEST(DiscountedReturns, Examples) {
    const auto r = discounted_returns(std::vector<double>{1.0, 1.0, 1.0}, 0.5);
    EXPECT_DOUBLE_EQ(r[0], 1.75);
    EXPECT_DOUBLE_EQ(r[1], 1.5);
    EXPECT_DOUBLE_EQ(r[2], 1.0);
    EXPECT_EQ(discounted_returns(std::vector<double>{0.0, 0.0, 1.0}, 0.5), (std::vector<double>{0.25, 0.5, 1.0}));
    EXPECT_EQ(discounted_returns(std::vector<double>{-1.0, -1.0, 100.0}, 1.0), (std::vector<double>{98.0, 99.0, 100.0}));
    EXPECT_THROW(discounted_returns(std::vector<double>{}, 0.9), ContractError);
}

TEST(DiscountedReturns, MatchesDoubleLoop) {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.index(60);
        std::vector<double> rewards(n);
        for (double& x : rewards) x = rng.uniform(-5.0, 5.0);
        const double gamma = rng.uniform(0.5, 1.0);
        const auto fast = discounted_returns(rewards, gamma);
        for (std::size_t t = 0; t < n; ++t) {
            double expected = 0.0;
            for (std::size_t tau = t; tau < n; ++tau) expected += std::pow(gamma, static_cast<double>(tau - t)) * rewards[tau];
            EXPECT_NEAR(fast[t], expected, 1e-10 * (1.0 + std::abs(expected)));
        }
    }
}

TEST(Sample, FrequenciesMatchProbabilities) {
    Rng rng(12);
    const PolicyDistribution p({0.1, 0.0, 0.6, 0.3});
    std::vector<int> counts(4, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[sample(p, rng)];
    EXPECT_EQ(counts[1], 0);
    // Pearson chi-square over the three supported categories, df = 2; 13.8 is the 0.999 quantile.
    double chi2 = 0.0;
    for (std::size_t i : {0u, 2u, 3u}) {
        const double expected = n * p[i];
        chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
    }
    EXPECT_LT(chi2, 13.8);
}

TEST(Sample, DirectiveAlwaysPicksAdvisedAction) {
    Rng rng(1);
    const PolicyDistribution p({0.0, 0.0, 1.0});
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample(p, rng), 2u);
}

TEST(TrajectoryLoss, EqualsSumOfStepTerms) {
    Rng rng(30);
    const Mlp net = Mlp::random(3, 5, 3, OutputHead::sigmoid, rng);
    Trajectory traj;
    for (int t = 0; t < 6; ++t) {
        std::vector<double> s = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const AdviceVector advice = t == 2 ? AdviceVector::directive(3, 1) : AdviceVector({1.0, 0.5, 2.0});
        traj.steps.push_back({s, advice, t == 2 ? 1u : rng.index(3), rng.uniform(-1.0, 1.0)});
    }
    const double gamma = 0.9;
    const auto returns = discounted_returns(traj.rewards(), gamma);

    double expected_loss = 0.0;
    std::vector<double> expected_grad(net.parameter_count(), 0.0);
    for (std::size_t t = 0; t < traj.size(); ++t) {
        const auto& st = traj.steps[t];
        const auto fwd = policy_forward(net, st.state, st.advice);
        expected_loss -= returns[t] * std::log(fwd.policy[st.action]);
        const auto g = policy_backward(net, fwd.cache, st.action, returns[t]);
        for (std::size_t i = 0; i < g.size(); ++i) expected_grad[i] += g[i];
    }

    const auto lg = trajectory_loss(traj, net, gamma);
    EXPECT_NEAR(lg.loss, expected_loss, 1e-12);
    for (std::size_t i = 0; i < expected_grad.size(); ++i) EXPECT_NEAR(lg.gradient[i], expected_grad[i], 1e-12);
}

TEST(TrajectoryLoss, AllDirectiveTrajectoryHasZeroGradient) {
    Rng rng(31);
    const Mlp net = Mlp::random(2, 4, 3, OutputHead::sigmoid, rng);
    Trajectory traj;
    for (int t = 0; t < 10; ++t) {
        const std::size_t a = rng.index(3);
        traj.steps.push_back({{rng.uniform(), rng.uniform()}, AdviceVector::directive(3, a), a, -1.0});
    }
    const auto lg = trajectory_loss(traj, net, 0.99);
    EXPECT_EQ(lg.loss, 0.0);
    for (double g : lg.gradient) EXPECT_EQ(g, 0.0);
}

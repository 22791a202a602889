#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "dpg/error.hpp"
#include "dpg/nn.hpp"

using namespace dpg;

namespace {

// 2 inputs, 2 hidden, 3 outputs with hand-picked parameters.
Mlp small_net() {
    Mlp net(2, 2, 3, OutputHead::sigmoid);
    const std::vector<double> p = {
        0.5, -0.3,   // W1 row 0
        0.2, 0.8,    // W1 row 1
        0.1, -0.1,   // b1
        1.0, -1.0,   // W2 row 0
        0.5, 0.5,    // W2 row 1
        -0.7, 0.3,   // W2 row 2
        0.0, 0.2, -0.2,  // b2
    };
    std::copy(p.begin(), p.end(), net.parameters().begin());
    return net;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST(Mlp, LayoutAndInit) {
    Rng rng(3);
    const Mlp net = Mlp::random(4, 5, 3, OutputHead::sigmoid, rng);
    EXPECT_EQ(net.parameter_count(), 4u * 5 + 5 + 5 * 3 + 3);
    const auto h = net.hidden_layer();
    const auto o = net.output_layer();
    for (double w : h.weights) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(4.0));
    for (double w : o.weights) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(5.0));
    for (double b : h.biases) EXPECT_EQ(b, 0.0);
    for (double b : o.biases) EXPECT_EQ(b, 0.0);
}

TEST(PolicyForward, MatchesHandComputation) {
    const Mlp net = small_net();
    const std::vector<double> s = {0.4, -1.2};
    const AdviceVector advice({1.0, 0.5, 2.0});

    const double h0 = std::tanh(0.5 * 0.4 - 0.3 * -1.2 + 0.1);
    const double h1 = std::tanh(0.2 * 0.4 + 0.8 * -1.2 - 0.1);
    const double o0 = sigmoid(1.0 * h0 - 1.0 * h1 + 0.0);
    const double o1 = sigmoid(0.5 * h0 + 0.5 * h1 + 0.2);
    const double o2 = sigmoid(-0.7 * h0 + 0.3 * h1 - 0.2);
    const double m0 = o0 * 1.0, m1 = o1 * 0.5, m2 = o2 * 2.0;
    const double z = m0 + m1 + m2;

    const auto out = policy_forward(net, s, advice);
    EXPECT_NEAR(out.policy[0], m0 / z, 1e-15);
    EXPECT_NEAR(out.policy[1], m1 / z, 1e-15);
    EXPECT_NEAR(out.policy[2], m2 / z, 1e-15);
    EXPECT_NEAR(policy_log_prob(out.cache, 2), std::log(m2 / z), 1e-14);
}

TEST(PolicyForward, NeutralAdviceIsNormalizedSigmoid) {
    const Mlp net = small_net();
    const std::vector<double> s = {0.1, 0.9};
    const auto out = policy_forward(net, s, AdviceVector::neutral(3));
    double z = 0.0;
    for (double o : out.cache.output) z += o;
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(out.policy[i], out.cache.output[i] / z);
}

TEST(PolicyForward, DirectiveGivesOneHot) {
    const Mlp net = small_net();
    const auto out = policy_forward(net, std::vector<double>{0.3, 0.3}, AdviceVector::directive(3, 1));
    EXPECT_EQ(out.policy[0], 0.0);
    EXPECT_EQ(out.policy[1], 1.0);
    EXPECT_EQ(out.policy[2], 0.0);
    EXPECT_THROW(policy_log_prob(out.cache, 0), ContractError);
}

TEST(PolicyForward, RejectsDimensionMismatch) {
    const Mlp net = small_net();
    EXPECT_THROW(policy_forward(net, std::vector<double>{1.0}, AdviceVector::neutral(3)), ContractError);
    EXPECT_THROW(policy_forward(net, std::vector<double>{1.0, 2.0}, AdviceVector::neutral(2)), ContractError);
}

TEST(PolicyForward, NormalizerFloorWhenSigmoidsVanish) {
    Mlp net(1, 1, 2, OutputHead::sigmoid);
    auto o = net.output_layer();
    o.biases[0] = -800.0;  // sigmoid underflows to 0
    o.biases[1] = -800.0;
    const auto out = policy_forward(net, std::vector<double>{0.0}, AdviceVector::neutral(2));
    EXPECT_TRUE(out.cache.normalizer_clamped);
    EXPECT_EQ(out.cache.normalizer, kNormalizerFloor);
}

TEST(PolicyBackward, MatchesFiniteDifferences) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Mlp net = Mlp::random(5, 7, 4, OutputHead::sigmoid, rng);
        for (double& p : net.parameters()) p += rng.uniform(-0.3, 0.3);
        const auto s = random_vector(rng, 5, -1.0, 1.0);
        const AdviceVector advice(random_vector(rng, 4, 0.1, 2.0));
        const std::size_t a = rng.index(4);
        const double scale = rng.uniform(-3.0, 3.0);

        const auto fwd = policy_forward(net, s, advice);
        const auto grad = policy_backward(net, fwd.cache, a, scale);

        Mlp probe = net;
        const LossFunction loss = [&](std::span<const double> params) {
            std::copy(params.begin(), params.end(), probe.parameters().begin());
            // Evaluated directly from the forward definition, not through the cache.
            const auto y = policy_forward(probe, s, advice).policy;
            return -scale * std::log(y[a]);
        };
        const auto numeric = finite_diff_grad(loss, net.parameters(), 1e-5);
        EXPECT_LT(relative_error(grad, numeric), 1e-6) << "trial " << trial;
    }
}

TEST(PolicyBackward, DirectiveAdviceGivesExactlyZero) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Mlp net = Mlp::random(3, 6, 5, OutputHead::sigmoid, rng);
        const auto s = random_vector(rng, 3, -2.0, 2.0);
        const std::size_t a = rng.index(5);
        const auto fwd = policy_forward(net, s, AdviceVector::directive(5, a));
        for (double g : policy_backward(net, fwd.cache, a, rng.uniform(-10.0, 10.0))) EXPECT_EQ(g, 0.0);
    }
}

TEST(PolicyBackward, UniformAdviceMatchesNeutral) {
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const Mlp net = Mlp::random(3, 4, 4, OutputHead::sigmoid, rng);
        const auto s = random_vector(rng, 3, -1.0, 1.0);
        const std::size_t a = rng.index(4);
        const double scale = rng.uniform(-2.0, 2.0);
        const auto reference = policy_backward(net, policy_forward(net, s, AdviceVector::neutral(4)).cache, a, scale);
        for (double c : {0.1, 1.0, 7.0, 1e3}) {
            const AdviceVector advice(std::vector<double>(4, c));
            const auto g = policy_backward(net, policy_forward(net, s, advice).cache, a, scale);
            for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], reference[i], 1e-12);
        }
    }
}

TEST(PolicyBackward, AccumulateAddsIntoBuffer) {
    const Mlp net = small_net();
    const auto fwd = policy_forward(net, std::vector<double>{0.2, 0.4}, AdviceVector::neutral(3));
    std::vector<double> grad(net.parameter_count(), 1.0);
    accumulate_policy_gradient(net, fwd.cache, 1, 2.0, grad);
    const auto direct = policy_backward(net, fwd.cache, 1, 2.0);
    for (std::size_t i = 0; i < grad.size(); ++i) EXPECT_DOUBLE_EQ(grad[i], 1.0 + direct[i]);
}

TEST(ValueNet, SparseAndDenseAgree) {
    Rng rng(2);
    const Mlp net = Mlp::random(10, 6, 3, OutputHead::linear, rng);
    std::vector<double> s(10, 0.0);
    s[3] = 1.0;
    s[7] = -0.5;
    const auto sparse = SparseState::from_dense(s);
    EXPECT_EQ(sparse.entries.size(), 2u);
    EXPECT_EQ(sparse.to_dense(), s);
    ValueCache a, b;
    value_forward(net, s, a);
    value_forward(net, sparse, b);
    EXPECT_EQ(a.output, b.output);
}

TEST(ValueNet, GradientMatchesFiniteDifferences) {
    Rng rng(4);
    Mlp net = Mlp::random(6, 5, 3, OutputHead::linear, rng);
    for (double& p : net.parameters()) p += rng.uniform(-0.2, 0.2);
    const auto s = random_vector(rng, 6, -1.0, 1.0);
    ValueCache cache;
    value_forward(net, s, cache);
    std::vector<double> grad(net.parameter_count(), 0.0);
    accumulate_value_gradient(net, cache, 2, 1.5, grad);

    Mlp probe = net;
    const LossFunction q2 = [&](std::span<const double> params) {
        std::copy(params.begin(), params.end(), probe.parameters().begin());
        return 1.5 * value_forward(probe, s)[2];
    };
    EXPECT_LT(relative_error(grad, finite_diff_grad(q2, net.parameters(), 1e-5)), 1e-7);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> params = {0.0, 1.0};
    const std::vector<double> grads = {1.0, -2.0};
    auto state = AdamState::for_parameters(2, 1e-3);
    adam_step(params, grads, state);
    // Bias correction makes the first step -alpha * g / (|g| + eps).
    EXPECT_NEAR(params[0], -1e-3 * 1.0 / (1.0 + 1e-8), 1e-18);
    EXPECT_NEAR(params[1], 1.0 + 1e-3 * 2.0 / (2.0 + 1e-8), 1e-15);
    EXPECT_EQ(state.step_count, 1u);
}

TEST(Adam, MatchesReferenceRecurrence) {
    std::vector<double> params = {0.3};
    auto state = AdamState::for_parameters(1, 0.01);
    double m = 0.0, v = 0.0, theta = 0.3;
    const std::vector<double> gs = {0.5, -0.2, 0.9, 0.0, 0.1};
    for (std::size_t t = 1; t <= gs.size(); ++t) {
        const double g = gs[t - 1];
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, static_cast<double>(t)));
        const double vh = v / (1.0 - std::pow(0.999, static_cast<double>(t)));
        theta -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        adam_step(params, std::vector<double>{g}, state);
        EXPECT_NEAR(params[0], theta, 1e-15);
    }
}

TEST(Adam, RejectsNonFiniteGradient) {
    std::vector<double> params = {0.0};
    auto state = AdamState::for_parameters(1, 1e-3);
    EXPECT_THROW(adam_step(params, std::vector<double>{std::nan("")}, state), NumericError);
}

TEST(Softmax, KnownValues) {
    const auto p = softmax(std::vector<double>{0.0, 10.0}, 1.0);
    EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(10.0)), 1e-18);
    EXPECT_NEAR(p[0], 4.5397868702434395e-05, 1e-15);
    const auto cold = softmax(std::vector<double>{1.0, 2.0, 3.0}, 0.1);
    EXPECT_NEAR(cold[2], 1.0 / (1.0 + std::exp(-10.0) + std::exp(-20.0)), 1e-15);
    const auto flat = softmax(std::vector<double>{5.0, 5.0, 5.0, 5.0}, 0.1);
    for (double x : flat.values()) EXPECT_DOUBLE_EQ(x, 0.25);
    // Shift invariance even for large magnitudes.
    const auto big = softmax(std::vector<double>{1000.0, 1001.0}, 1.0);
    EXPECT_NEAR(big[1], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(FiniteDiff, QuadraticIsExact) {
    const LossFunction f = [](std::span<const double> x) { return 3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + x[1]; };
    const auto g = finite_diff_grad(f, std::vector<double>{1.0, 2.0}, 1e-4);
    EXPECT_NEAR(g[0], 6.0 - 4.0, 1e-8);
    EXPECT_NEAR(g[1], -2.0 + 1.0, 1e-8);
}

TEST(RelativeError, Definition) {
    EXPECT_EQ(relative_error(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0}), 0.0);
    EXPECT_DOUBLE_EQ(relative_error(std::vector<double>{1.0}, std::vector<double>{-1.0}), 1.0);
    EXPECT_NEAR(relative_error(std::vector<double>{3.0, 4.0}, std::vector<double>{3.0, 4.0 + 1e-6}), 1e-7, 1e-12);
}

TEST(Snapshot, RoundTripIsBitExact) {
    Rng rng(8);
    const Mlp net = Mlp::random(7, 4, 3, OutputHead::linear, rng);
    std::stringstream buf;
    save_snapshot(net, buf);
    EXPECT_EQ(buf.str().substr(0, 8), "DPGMLP01");
    EXPECT_EQ(buf.str().size(), 8u + 3 * 8 + 1 + net.parameter_count() * 8);
    const Mlp back = load_snapshot(buf);
    EXPECT_EQ(back, net);
}

TEST(Snapshot, RejectsCorruptInput) {
    std::stringstream bad("NOTAMLP0");
    EXPECT_THROW(load_snapshot(bad), ConfigError);
    Rng rng(1);
    std::stringstream truncated;
    save_snapshot(Mlp::random(2, 2, 2, OutputHead::sigmoid, rng), truncated);
    std::stringstream cut(truncated.str().substr(0, 40));
    EXPECT_THROW(load_snapshot(cut), ConfigError);
}

#include "dpg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dpg/nn.hpp"
#include "dpg/policy.hpp"
#include "dpg/rng.hpp"

namespace dpg {

namespace {

struct Draw {
    Mlp net;
    std::vector<double> state;
    std::vector<double> advice;  // strictly positive
    std::size_t action;
    double scale;
};

Draw random_draw(Rng& rng) {
    const std::size_t in = 2 + rng.index(5);
    const std::size_t hidden = 3 + rng.index(6);
    const std::size_t out = 2 + rng.index(4);
    Mlp net = Mlp::random(in, hidden, out, OutputHead::sigmoid, rng);
    // Non-zero biases so that the bias gradients are exercised too.
    for (double& p : net.parameters()) p += rng.uniform(-0.2, 0.2);
    std::vector<double> state(in);
    for (double& s : state) s = rng.uniform(-1.0, 1.0);
    std::vector<double> advice(out);
    for (double& a : advice) a = rng.uniform(0.05, 1.0);
    return {std::move(net), std::move(state), std::move(advice), rng.index(out), rng.uniform(-2.0, 2.0)};
}

std::vector<double> analytic(const Mlp& net, const std::vector<double>& state, const AdviceVector& advice,
                             std::size_t action, double scale, bool flip) {
    const auto fwd = policy_forward(net, state, advice);
    auto g = policy_backward(net, fwd.cache, action, scale);
    if (flip) {
        for (double& v : g) v = -v;
    }
    return g;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

GradcheckReport check_finite_differences(const GradcheckOptions& options) {
    Rng rng(options.seed);
    GradcheckReport report;
    for (std::size_t t = 0; t < options.trials; ++t) {
        Draw d = random_draw(rng);
        const AdviceVector advice(d.advice);
        const auto grad = analytic(d.net, d.state, advice, d.action, d.scale, options.flip_sign);
        Mlp probe = d.net;
        const LossFunction loss = [&](std::span<const double> params) {
            std::copy(params.begin(), params.end(), probe.parameters().begin());
            const auto fwd = policy_forward(probe, d.state, advice);
            return -d.scale * policy_log_prob(fwd.cache, d.action);
        };
        const auto numeric = finite_diff_grad(loss, d.net.parameters(), options.step);
        report.worst_finite_diff = std::max(report.worst_finite_diff, relative_error(grad, numeric));
        ++report.trials;
    }
    return report;
}

GradcheckReport check_directive_zero(const GradcheckOptions& options) {
    Rng rng(options.seed + 1);
    GradcheckReport report;
    for (std::size_t t = 0; t < options.trials; ++t) {
        Draw d = random_draw(rng);
        const auto advice = AdviceVector::directive(d.net.output_dim(), d.action);
        const auto grad = analytic(d.net, d.state, advice, d.action, d.scale, options.flip_sign);
        report.worst_directive = std::max(report.worst_directive, max_abs(grad));
        ++report.trials;
    }
    return report;
}

GradcheckReport check_uniform_invariance(const GradcheckOptions& options) {
    Rng rng(options.seed + 2);
    GradcheckReport report;
    for (std::size_t t = 0; t < options.trials; ++t) {
        Draw d = random_draw(rng);
        const std::size_t n = d.net.output_dim();
        const auto reference = analytic(d.net, d.state, AdviceVector::neutral(n), d.action, d.scale, false);
        for (double c : {0.1, 1.0, 7.0}) {
            const auto grad = analytic(d.net, d.state, AdviceVector(std::vector<double>(n, c)), d.action, d.scale,
                                       options.flip_sign);
            for (std::size_t i = 0; i < grad.size(); ++i) {
                report.worst_uniform = std::max(report.worst_uniform, std::abs(grad[i] - reference[i]));
            }
        }
        ++report.trials;
    }
    return report;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
    const auto fd = check_finite_differences(options);
    const auto zero = check_directive_zero(options);
    const auto uniform = check_uniform_invariance(options);
    GradcheckReport report;
    report.trials = options.trials;
    report.worst_finite_diff = fd.worst_finite_diff;
    report.worst_directive = zero.worst_directive;
    report.worst_uniform = uniform.worst_uniform;
    return report;
}

}  // namespace dpg

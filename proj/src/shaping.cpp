#include "dpg/shaping.hpp"

#include <cmath>

#include "dpg/error.hpp"

namespace dpg {

PolicyDistribution mix(const PolicyDistribution& learned, const AdviceVector& advice) {
    require(learned.size() == advice.size(), "policy and advice lengths differ");
    std::vector<double> out(learned.size());
    double dot = 0.0;
    for (std::size_t a = 0; a < out.size(); ++a) {
        out[a] = learned[a] * advice[a];
        dot += out[a];
    }
    if (!(dot > 0.0)) throw ContractError("advice annihilates policy");
    for (double& p : out) p /= dot;
    return PolicyDistribution(std::move(out));
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
    require(!rewards.empty(), "no rewards to discount");
    require(gamma > 0.0 && gamma <= 1.0, "discount must lie in (0, 1]");
    std::vector<double> returns(rewards.size());
    double running = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        require(std::isfinite(rewards[t]), "reward is not finite");
        running = rewards[t] + gamma * running;
        returns[t] = running;
    }
    return returns;
}

std::vector<double> Trajectory::rewards() const {
    std::vector<double> r;
    r.reserve(steps.size());
    for (const auto& s : steps) r.push_back(s.reward);
    return r;
}

double accumulate_trajectory_gradient(const Trajectory& trajectory, const Mlp& net, double gamma,
                                      std::span<double> gradient) {
    require(!trajectory.empty(), "empty trajectory");
    const auto rewards = trajectory.rewards();
    const auto returns = discounted_returns(rewards, gamma);
    double loss = 0.0;
    for (std::size_t t = 0; t < trajectory.size(); ++t) {
        const auto& step = trajectory.steps[t];
        const auto fwd = policy_forward(net, step.state, step.advice);
        if (returns[t] != 0.0) loss -= returns[t] * policy_log_prob(fwd.cache, step.action);
        if (!gradient.empty()) accumulate_policy_gradient(net, fwd.cache, step.action, returns[t], gradient);
    }
    return loss;
}

LossAndGradient trajectory_loss(const Trajectory& trajectory, const Mlp& net, double gamma) {
    LossAndGradient out;
    out.gradient.assign(net.parameter_count(), 0.0);
    out.loss = accumulate_trajectory_gradient(trajectory, net, gamma, out.gradient);
    return out;
}

std::size_t sample(const PolicyDistribution& dist, Rng& rng) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t a = 0; a < dist.size(); ++a) {
        if (dist[a] <= 0.0) continue;
        cumulative += dist[a];
        last_positive = a;
        if (u < cumulative) return a;
    }
    return last_positive;  // u landed in the rounding gap above the final sum
}

}  // namespace dpg

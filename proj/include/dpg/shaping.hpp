#pragma once

// Policy-shaping algebra: the advice mixture, Monte-Carlo returns, the
// policy-gradient loss over the mixed policy, and categorical sampling.

#include <cstddef>
#include <span>
#include <vector>

#include "dpg/nn.hpp"
#include "dpg/policy.hpp"
#include "dpg/rng.hpp"

namespace dpg {

// learned ∘ advice / (learned · advice). Throws ContractError("advice annihilates policy")
// when the dot product is zero.
PolicyDistribution mix(const PolicyDistribution& learned, const AdviceVector& advice);

// R_t = r_t + gamma * R_{t+1}; i.e. sum over tau >= t of gamma^(tau - t) r_tau.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

struct TrajectoryStep {
    std::vector<double> state;
    AdviceVector advice;
    std::size_t action = 0;
    double reward = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;

    bool empty() const { return steps.empty(); }
    std::size_t size() const { return steps.size(); }
    std::vector<double> rewards() const;
};

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

// loss = -sum_t R_t log pi(a_t | s_t, advice_t), with the stored advice fed
// back through the mixture. Gradient is added into `gradient` when provided.
LossAndGradient trajectory_loss(const Trajectory& trajectory, const Mlp& net, double gamma);
double accumulate_trajectory_gradient(const Trajectory& trajectory, const Mlp& net, double gamma,
                                      std::span<double> gradient);

// Inverse-CDF draw.
std::size_t sample(const PolicyDistribution& dist, Rng& rng);

}  // namespace dpg

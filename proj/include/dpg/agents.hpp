#pragma once

// Learning agents: the advised policy-gradient actor, the Double DQN critic
// with its replay buffer, their Actor-Advisor composition, the override
// baseline and the reward-shaping teacher.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpg/environments.hpp"
#include "dpg/nn.hpp"
#include "dpg/policy.hpp"
#include "dpg/rng.hpp"
#include "dpg/shaping.hpp"

namespace dpg {

struct ActorConfig {
    std::size_t hidden = Mlp::kDefaultHidden;
    double learning_rate = 1e-4;
    std::size_t update_period = 16;  // episodes per gradient step
};

struct ActorStep {
    std::size_t action = 0;
    TrajectoryStep step;  // reward is filled in by the caller
};

struct ActorUpdate {
    double loss = 0.0;
    double gradient_norm = 0.0;
    std::size_t episodes = 0;
};

class DpgActor {
public:
    DpgActor(std::size_t observation_dim, std::size_t actions, Rng& init_rng, ActorConfig config = {});
    DpgActor(Mlp net, ActorConfig config = {});

    // Samples from the mixture of the learned policy and the advice, and
    // records the advice so that the update differentiates the same mixture.
    ActorStep act(std::span<const double> state, const AdviceVector& advice, Rng& rng) const;

    // "Advice + vanilla PG" baseline: a directive replaces the action outright,
    // otherwise the action is drawn from the unadvised policy. Either way the
    // step is recorded with neutral advice.
    ActorStep act_override(std::span<const double> state, const AdviceVector& advice, Rng& rng) const;

    // Queues the trajectory; every update_period episodes applies one Adam step
    // on the summed trajectory gradients and clears the queue.
    std::optional<ActorUpdate> finish_episode(Trajectory trajectory, double gamma);

    const Mlp& net() const { return net_; }
    Mlp& net() { return net_; }
    const AdamState& optimizer() const { return adam_; }
    const ActorConfig& config() const { return config_; }
    std::size_t pending_episodes() const { return pending_.size(); }
    std::size_t completed_episodes() const { return episodes_; }

private:
    ActorConfig config_;
    Mlp net_;
    AdamState adam_;
    std::vector<Trajectory> pending_;
    std::vector<double> gammas_;
    std::size_t episodes_ = 0;
};

// Mean entropy (nats) of the unadvised policy over the given states.
double policy_entropy(const Mlp& net, std::span<const std::vector<double>> states);

struct Experience {
    SparseState state;
    std::size_t action = 0;
    double reward = 0.0;
    SparseState next_state;
    bool done = false;  // no bootstrap from next_state
};

// Fixed-capacity ring; the oldest experience is overwritten first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 20000);

    void push(Experience experience);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t inserted() const { return inserted_; }
    const Experience& operator[](std::size_t i) const { return items_[i]; }

    // Uniform draw with replacement.
    std::size_t sample_index(Rng& rng) const;

private:
    std::size_t capacity_;
    std::vector<Experience> items_;
    std::size_t next_ = 0;
    std::uint64_t inserted_ = 0;
};

struct DqnConfig {
    std::size_t hidden = Mlp::kDefaultHidden;
    double gamma = 0.99;
    double learning_rate = 1e-3;
    std::size_t train_period = 16;   // environment steps between training iterations
    std::size_t batch_size = 512;
    std::size_t target_sync = 1000;  // environment steps between hard target copies
    std::size_t buffer_capacity = 20000;
};

struct CriticUpdate {
    double loss = 0.0;  // mean squared TD error of the batch
};

class DoubleDqn {
public:
    DoubleDqn(std::size_t observation_dim, std::size_t actions, Rng& init_rng, DqnConfig config = {});

    std::vector<double> q_values(std::span<const double> state) const;
    std::vector<double> target_q_values(std::span<const double> state) const;

    // r + gamma * (1 - done) * Q_target(s', argmax_a Q_online(s', a)).
    double target(const Experience& e) const;

    // Inserts the experience; trains on a uniform batch every train_period
    // global steps once the buffer holds a full batch; syncs the target net
    // every target_sync steps. global_step counts from 1.
    std::optional<CriticUpdate> observe(ReplayBuffer& buffer, Experience experience, std::uint64_t global_step,
                                        Rng& rng);

    CriticUpdate train_batch(const ReplayBuffer& buffer, Rng& rng);
    void sync_target() { target_ = online_; }

    // Softmax of the online Q-values at the given temperature, floored so that
    // every action keeps a strictly positive preference.
    AdviceVector advice(std::span<const double> state, double temperature) const;

    const Mlp& online() const { return online_; }
    const Mlp& target_net() const { return target_; }
    const DqnConfig& config() const { return config_; }
    std::uint64_t training_iterations() const { return iterations_; }

private:
    DqnConfig config_;
    Mlp online_;
    Mlp target_;
    AdamState adam_;
    std::uint64_t iterations_ = 0;
    std::vector<double> grad_;
};

// Whether the transition ends the return. A timeout is a truncation that the
// observation does not reveal, so the critic still bootstraps through it.
bool ends_value(const StepResult& result);

inline constexpr double kCriticAdviceFloor = 1e-300;

AdviceVector critic_advice(const DoubleDqn& dqn, std::span<const double> state, double temperature = 0.1);

// Book-keeping for one Actor-Advisor episode.
struct ActorAdvisorState {
    std::vector<double> observation;
    Trajectory trajectory;
    std::uint64_t global_step = 0;
    bool critic_enabled = true;
    double temperature = 0.1;
};

struct ActorAdvisorStep {
    std::size_t action = 0;
    StepResult result;
    std::optional<CriticUpdate> critic_update;
};

// critic advice -> actor samples from the mixture -> environment step ->
// experience to the critic -> step appended to the trajectory.
ActorAdvisorStep actor_advisor_step(const DpgActor& actor, DoubleDqn& dqn, ReplayBuffer& buffer, Environment& env,
                                    ActorAdvisorState& state, Rng& rng);

// Simulated human reward shaping: with probability L the teacher judges the
// chosen action, returning 0 if it matches the optimal one and penalty otherwise.
class RewardShapingTeacher {
public:
    explicit RewardShapingTeacher(double probability = 0.05, double penalty = -5.0,
                                  std::optional<std::size_t> budget = std::nullopt);

    std::optional<double> judge(std::size_t action, std::size_t optimal_action, Rng& rng);
    std::size_t interventions() const { return interventions_; }

private:
    double probability_;
    double penalty_;
    std::optional<std::size_t> budget_;
    std::size_t interventions_ = 0;
};

}  // namespace dpg

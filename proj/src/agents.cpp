#include "dpg/agents.hpp"

#include <algorithm>
#include <cmath>

#include "dpg/error.hpp"

namespace dpg {

DpgActor::DpgActor(std::size_t observation_dim, std::size_t actions, Rng& init_rng, ActorConfig config)
    : DpgActor(Mlp::random(observation_dim, config.hidden, actions, OutputHead::sigmoid, init_rng), config) {}

DpgActor::DpgActor(Mlp net, ActorConfig config)
    : config_(config),
      net_(std::move(net)),
      adam_(AdamState::for_parameters(net_.parameter_count(), config.learning_rate)) {
    require(net_.head() == OutputHead::sigmoid, "actor network needs a sigmoid head");
    require(config_.update_period >= 1, "update period must be at least one episode");
}

ActorStep DpgActor::act(std::span<const double> state, const AdviceVector& advice, Rng& rng) const {
    const auto fwd = policy_forward(net_, state, advice);
    const std::size_t action = sample(fwd.policy, rng);
    return {action, TrajectoryStep{std::vector<double>(state.begin(), state.end()), advice, action, 0.0}};
}

ActorStep DpgActor::act_override(std::span<const double> state, const AdviceVector& advice, Rng& rng) const {
    const auto neutral = AdviceVector::neutral(net_.output_dim());
    require(advice.size() == net_.output_dim(), "advice length does not match action count");
    std::size_t action = 0;
    if (const auto forced = advice.directed_action()) {
        action = *forced;
    } else {
        action = sample(policy_forward(net_, state, neutral).policy, rng);
    }
    return {action, TrajectoryStep{std::vector<double>(state.begin(), state.end()), neutral, action, 0.0}};
}

std::optional<ActorUpdate> DpgActor::finish_episode(Trajectory trajectory, double gamma) {
    ++episodes_;
    if (!trajectory.empty()) {
        pending_.push_back(std::move(trajectory));
        gammas_.push_back(gamma);
    }
    if (episodes_ % config_.update_period != 0) return std::nullopt;

    ActorUpdate update;
    update.episodes = pending_.size();
    std::vector<double> grad(net_.parameter_count(), 0.0);
    for (std::size_t i = 0; i < pending_.size(); ++i) {
        update.loss += accumulate_trajectory_gradient(pending_[i], net_, gammas_[i], grad);
    }
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    update.gradient_norm = std::sqrt(sq);
    adam_step(net_.parameters(), grad, adam_);
    pending_.clear();
    gammas_.clear();
    return update;
}

double policy_entropy(const Mlp& net, std::span<const std::vector<double>> states) {
    require(!states.empty(), "entropy needs at least one state");
    const auto neutral = AdviceVector::neutral(net.output_dim());
    double total = 0.0;
    for (const auto& s : states) total += policy_forward(net, s, neutral).policy.entropy();
    return total / static_cast<double>(states.size());
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    require(capacity >= 1, "replay buffer capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Experience experience) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(experience));
    } else {
        items_[next_] = std::move(experience);
    }
    next_ = (next_ + 1) % capacity_;
    ++inserted_;
}

std::size_t ReplayBuffer::sample_index(Rng& rng) const {
    require(!items_.empty(), "cannot sample from an empty replay buffer");
    return rng.index(items_.size());
}

DoubleDqn::DoubleDqn(std::size_t observation_dim, std::size_t actions, Rng& init_rng, DqnConfig config)
    : config_(config),
      online_(Mlp::random(observation_dim, config.hidden, actions, OutputHead::linear, init_rng)),
      target_(online_),
      adam_(AdamState::for_parameters(online_.parameter_count(), config.learning_rate)) {
    require(config_.gamma > 0.0 && config_.gamma <= 1.0, "critic discount must lie in (0, 1]");
    require(config_.train_period >= 1 && config_.batch_size >= 1 && config_.target_sync >= 1,
            "critic periods must be positive");
}

std::vector<double> DoubleDqn::q_values(std::span<const double> state) const { return value_forward(online_, state); }

std::vector<double> DoubleDqn::target_q_values(std::span<const double> state) const {
    return value_forward(target_, state);
}

double DoubleDqn::target(const Experience& e) const {
    if (e.done) return e.reward;
    ValueCache online_cache, target_cache;
    value_forward(online_, e.next_state, online_cache);
    value_forward(target_, e.next_state, target_cache);
    const auto best = static_cast<std::size_t>(
        std::max_element(online_cache.output.begin(), online_cache.output.end()) - online_cache.output.begin());
    return e.reward + config_.gamma * target_cache.output[best];
}

CriticUpdate DoubleDqn::train_batch(const ReplayBuffer& buffer, Rng& rng) {
    grad_.assign(online_.parameter_count(), 0.0);
    ValueCache cache;
    CriticUpdate update;
    const double inv_batch = 1.0 / static_cast<double>(config_.batch_size);
    for (std::size_t k = 0; k < config_.batch_size; ++k) {
        const Experience& e = buffer[buffer.sample_index(rng)];
        const double y = target(e);
        value_forward(online_, e.state, cache);
        const double err = cache.output[e.action] - y;
        update.loss += err * err * inv_batch;
        // d/dq of (1/B) * 0.5 * err^2
        accumulate_value_gradient(online_, cache, e.action, err * inv_batch, grad_);
    }
    adam_step(online_.parameters(), grad_, adam_);
    ++iterations_;
    return update;
}

std::optional<CriticUpdate> DoubleDqn::observe(ReplayBuffer& buffer, Experience experience,
                                               std::uint64_t global_step, Rng& rng) {
    buffer.push(std::move(experience));
    std::optional<CriticUpdate> update;
    if (global_step % config_.train_period == 0 && buffer.size() >= config_.batch_size) {
        update = train_batch(buffer, rng);
    }
    if (global_step % config_.target_sync == 0) sync_target();
    return update;
}

AdviceVector DoubleDqn::advice(std::span<const double> state, double temperature) const {
    const auto q = q_values(state);
    const auto dist = softmax(q, temperature);
    std::vector<double> prefs(dist.values().begin(), dist.values().end());
    for (double& p : prefs) p = std::max(p, kCriticAdviceFloor);
    return AdviceVector(std::move(prefs));
}

bool ends_value(const StepResult& result) { return result.done && result.cause != TerminalCause::timeout; }

AdviceVector critic_advice(const DoubleDqn& dqn, std::span<const double> state, double temperature) {
    return dqn.advice(state, temperature);
}

ActorAdvisorStep actor_advisor_step(const DpgActor& actor, DoubleDqn& dqn, ReplayBuffer& buffer, Environment& env,
                                    ActorAdvisorState& state, Rng& rng) {
    require(env.action_count() == actor.net().output_dim() && env.action_count() == dqn.online().output_dim(),
            "actor, critic and environment disagree on the action count");
    const AdviceVector advice = state.critic_enabled ? dqn.advice(state.observation, state.temperature)
                                                     : AdviceVector::neutral(env.action_count());
    auto chosen = actor.act(state.observation, advice, rng);

    ActorAdvisorStep out;
    out.action = chosen.action;
    out.result = env.step(chosen.action, rng);
    ++state.global_step;

    Experience e{SparseState::from_dense(state.observation), chosen.action, out.result.reward,
                 SparseState::from_dense(out.result.observation), ends_value(out.result)};
    out.critic_update = dqn.observe(buffer, std::move(e), state.global_step, rng);

    chosen.step.reward = out.result.reward;
    state.trajectory.steps.push_back(std::move(chosen.step));
    state.observation = out.result.observation;
    return out;
}

RewardShapingTeacher::RewardShapingTeacher(double probability, double penalty, std::optional<std::size_t> budget)
    : probability_(probability), penalty_(penalty), budget_(budget) {
    require(probability >= 0.0 && probability <= 1.0, "teacher probability must lie in [0, 1]");
}

std::optional<double> RewardShapingTeacher::judge(std::size_t action, std::size_t optimal_action, Rng& rng) {
    if (budget_ && interventions_ >= *budget_) return std::nullopt;
    if (!rng.bernoulli(probability_)) return std::nullopt;
    ++interventions_;
    return action == optimal_action ? 0.0 : penalty_;
}

}  // namespace dpg

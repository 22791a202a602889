#include "dpg/advisors.hpp"

#include <cmath>

#include "dpg/error.hpp"

namespace dpg {

AdviceVector neutral_advice(std::size_t actions) {
    require(actions >= 1, "advice needs at least one action");
    return AdviceVector::neutral(actions);
}

AdviceVector backup_advice(const TableState& s) {
    const double c = std::cos(s.theta);
    const double sn = std::sin(s.theta);
    const bool danger = (s.x < table::kEdgeMargin && c < 0.0) || (s.x > 1.0 - table::kEdgeMargin && c > 0.0) ||
                        (s.y < table::kEdgeMargin && sn < 0.0) || (s.y > 1.0 - table::kEdgeMargin && sn > 0.0);
    return danger ? AdviceVector::directive(3, table::left) : AdviceVector::neutral(3);
}

AdviceVector goal_heuristic_advice(const TableState& s) {
    const bool in_box = std::abs(s.x - table::kDockCenter) <= table::kDockHalfWidth &&
                        std::abs(s.y - table::kDockCenter) <= table::kDockHalfWidth;
    const bool misaligned = angular_distance(s.theta, table::kDockAngle) > table::kDockAngleTolerance;
    return in_box && misaligned ? AdviceVector::directive(3, table::left) : AdviceVector::neutral(3);
}

AdviceVector combined_table_advice(const TableState& s) {
    auto backup = backup_advice(s);
    if (backup.is_directive()) return backup;
    return goal_heuristic_advice(s);
}

AdviceVector TableAdvisor::advise(std::span<const double> observation, Rng&) {
    require(observation.size() == 3, "Table advisor expects (x, y, theta)");
    const TableState s{observation[0], observation[1], observation[2]};
    AdviceVector advice = [&] {
        switch (mode_) {
            case Mode::backup: return backup_advice(s);
            case Mode::heuristic: return goal_heuristic_advice(s);
            case Mode::combined: break;
        }
        return combined_table_advice(s);
    }();
    if (advice.is_directive()) record_intervention();
    return advice;
}

SimulatedHumanAdvisor::SimulatedHumanAdvisor(GridWorld world, std::vector<std::optional<std::size_t>> oracle,
                                             std::size_t actions, SimulatedHumanConfig config)
    : world_(std::move(world)), oracle_(std::move(oracle)), actions_(actions), config_(config) {
    require(oracle_.size() == world_.cell_count(), "oracle does not cover the grid");
    require(config_.availability >= 0.0 && config_.availability <= 1.0, "L must lie in [0, 1]");
    require(config_.p_right >= 0.0 && config_.p_right <= 1.0, "P(right) must lie in [0, 1]");
    require(config_.wrong_action < actions_, "wrong action index out of range");
}

AdviceVector SimulatedHumanAdvisor::advise(std::span<const double> observation, Rng& rng) {
    return advise_cell(cell_from_observation(world_, observation), rng);
}

AdviceVector SimulatedHumanAdvisor::advise_cell(Cell cell, Rng& rng) {
    if (exhausted()) return AdviceVector::neutral(actions_);
    const auto& right = oracle_[world_.index(cell)];
    if (!right) return AdviceVector::neutral(actions_);
    if (!rng.bernoulli(config_.availability)) return AdviceVector::neutral(actions_);
    record_intervention();
    const std::size_t advised = rng.bernoulli(config_.p_right) ? *right : config_.wrong_action;
    return AdviceVector::directive(actions_, advised);
}

AdviceVector transfer_advice(const Mlp& source, std::span<const double> state) {
    const auto fwd = policy_forward(source, state, AdviceVector::neutral(source.output_dim()));
    std::vector<double> prefs(fwd.policy.values().begin(), fwd.policy.values().end());
    for (double& p : prefs) p += 1.0;
    return AdviceVector(std::move(prefs));
}

AdviceVector TransferAdvisor::advise(std::span<const double> observation, Rng&) {
    return transfer_advice(source_, observation);
}

}  // namespace dpg

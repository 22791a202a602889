#pragma once

// Advice sources. Every advisor returns the all-ones vector whenever it does
// not intervene, so the mixed policy falls back to the learned one.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dpg/environments.hpp"
#include "dpg/nn.hpp"
#include "dpg/policy.hpp"
#include "dpg/rng.hpp"

namespace dpg {

class Advisor {
public:
    virtual ~Advisor() = default;

    virtual AdviceVector advise(std::span<const double> observation, Rng& rng) = 0;

    std::size_t interventions() const { return interventions_; }

protected:
    void record_intervention() { ++interventions_; }

private:
    std::size_t interventions_ = 0;
};

AdviceVector neutral_advice(std::size_t actions);

namespace table {
inline constexpr double kEdgeMargin = 0.05;
}

// Turn-left directive when within kEdgeMargin of an edge and heading towards it.
AdviceVector backup_advice(const TableState& s);
// Turn-left directive inside the docking box while misaligned.
AdviceVector goal_heuristic_advice(const TableState& s);
// Backup first, then the heuristic, else neutral.
AdviceVector combined_table_advice(const TableState& s);

class NeutralAdvisor final : public Advisor {
public:
    explicit NeutralAdvisor(std::size_t actions) : actions_(actions) {}
    AdviceVector advise(std::span<const double>, Rng&) override { return neutral_advice(actions_); }

private:
    std::size_t actions_;
};

class TableAdvisor final : public Advisor {
public:
    enum class Mode { backup, heuristic, combined };
    explicit TableAdvisor(Mode mode) : mode_(mode) {}
    AdviceVector advise(std::span<const double> observation, Rng& rng) override;

private:
    Mode mode_;
};

struct SimulatedHumanConfig {
    double availability = 0.0;          // L
    double p_right = 1.0;               // P(right)
    std::optional<std::size_t> budget;  // stop advising after this many interventions
    std::size_t wrong_action = 0;       // door-option towards the middle-left room
};

// Directive advice from a teacher who knows the optimal action (or option)
// for every cell, is present with probability L and right with probability
// p_right. Observations are one-hot grid cells.
class SimulatedHumanAdvisor final : public Advisor {
public:
    SimulatedHumanAdvisor(GridWorld world, std::vector<std::optional<std::size_t>> oracle, std::size_t actions,
                          SimulatedHumanConfig config);

    AdviceVector advise(std::span<const double> observation, Rng& rng) override;
    AdviceVector advise_cell(Cell cell, Rng& rng);

    bool exhausted() const { return config_.budget && interventions() >= *config_.budget; }
    const SimulatedHumanConfig& config() const { return config_; }

private:
    GridWorld world_;
    std::vector<std::optional<std::size_t>> oracle_;
    std::size_t actions_;
    SimulatedHumanConfig config_;
};

// pi_1(s) + 1, where pi_1 is a frozen previously trained policy evaluated
// with neutral advice. Components lie in [1, 2].
AdviceVector transfer_advice(const Mlp& source, std::span<const double> state);

class TransferAdvisor final : public Advisor {
public:
    explicit TransferAdvisor(Mlp source) : source_(std::move(source)) {}
    AdviceVector advise(std::span<const double> observation, Rng&) override;
    const Mlp& source() const { return source_; }

private:
    Mlp source_;
};

}  // namespace dpg

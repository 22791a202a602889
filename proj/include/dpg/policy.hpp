#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dpg {

// Per-action preference vector supplied by an advisor. Entries are
// non-negative and at least one is positive; the vector need not sum to one.
// All-ones is neutral, one-hot is a directive.
class AdviceVector {
public:
    explicit AdviceVector(std::vector<double> prefs);

    static AdviceVector neutral(std::size_t actions);
    static AdviceVector directive(std::size_t actions, std::size_t action);

    std::span<const double> values() const { return prefs_; }
    std::size_t size() const { return prefs_.size(); }
    double operator[](std::size_t i) const { return prefs_[i]; }

    // Exactly one strictly positive component.
    bool is_directive() const;
    std::optional<std::size_t> directed_action() const;
    // Every component equal (any positive constant).
    bool is_uniform() const;

    bool operator==(const AdviceVector&) const = default;

private:
    std::vector<double> prefs_;
};

// Normalized probability vector over a finite action set.
class PolicyDistribution {
public:
    static constexpr double kTolerance = 1e-9;

    explicit PolicyDistribution(std::vector<double> probs);

    static PolicyDistribution uniform(std::size_t actions);

    std::span<const double> values() const { return probs_; }
    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }

    // Shannon entropy in nats.
    double entropy() const;

private:
    std::vector<double> probs_;
};

}  // namespace dpg

#include "dpg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dpg/error.hpp"

namespace dpg {

AdviceVector::AdviceVector(std::vector<double> prefs) : prefs_(std::move(prefs)) {
    require(!prefs_.empty(), "advice vector is empty");
    bool any_positive = false;
    for (double p : prefs_) {
        require(std::isfinite(p) && p >= 0.0, "advice components must be finite and non-negative");
        any_positive = any_positive || p > 0.0;
    }
    require(any_positive, "advice has no positive component");
}

AdviceVector AdviceVector::neutral(std::size_t actions) {
    return AdviceVector(std::vector<double>(actions, 1.0));
}

AdviceVector AdviceVector::directive(std::size_t actions, std::size_t action) {
    require(action < actions, "directive action out of range");
    std::vector<double> prefs(actions, 0.0);
    prefs[action] = 1.0;
    return AdviceVector(std::move(prefs));
}

bool AdviceVector::is_directive() const { return directed_action().has_value(); }

std::optional<std::size_t> AdviceVector::directed_action() const {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < prefs_.size(); ++i) {
        if (prefs_[i] > 0.0) {
            if (found) return std::nullopt;
            found = i;
        }
    }
    return found;
}

bool AdviceVector::is_uniform() const {
    return std::all_of(prefs_.begin(), prefs_.end(), [&](double p) { return p == prefs_.front(); });
}

PolicyDistribution::PolicyDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    require(!probs_.empty(), "policy distribution is empty");
    double total = 0.0;
    for (double p : probs_) {
        require(std::isfinite(p) && p >= 0.0 && p <= 1.0 + kTolerance,
                "policy probability outside [0, 1]");
        total += p;
    }
    require(std::abs(total - 1.0) <= kTolerance,
            "policy distribution sums to " + std::to_string(total));
}

PolicyDistribution PolicyDistribution::uniform(std::size_t actions) {
    require(actions > 0, "empty action set");
    return PolicyDistribution(std::vector<double>(actions, 1.0 / static_cast<double>(actions)));
}

double PolicyDistribution::entropy() const {
    double h = 0.0;
    for (double p : probs_) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

}  // namespace dpg

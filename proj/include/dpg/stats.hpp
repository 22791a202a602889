#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dpg {

struct RankSumResult {
    double u = 0.0;        // Mann-Whitney U of the first sample
    double p_value = 1.0;  // two-sided
    bool exact = false;
};

// Wilcoxon rank-sum / Mann-Whitney U with midranks for ties. Exact
// enumeration when the pooled size is at most kExactLimit, otherwise the
// normal approximation with tie and continuity corrections.
inline constexpr std::size_t kExactLimit = 12;
RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b);

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;  // two-sided
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> xs);
// Sample variance (n - 1 denominator).
double variance(std::span<const double> xs);
double standard_error(std::span<const double> xs);

// Centered moving average; windows are truncated at the edges.
std::vector<double> moving_average(std::span<const double> series, std::size_t window);

}  // namespace dpg

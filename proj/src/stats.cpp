#include "dpg/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "dpg/error.hpp"

namespace dpg {

namespace {

// Midranks (1-based) of the pooled sample.
std::vector<double> midranks(std::span<const double> pooled) {
    std::vector<std::size_t> order(pooled.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
    std::vector<double> ranks(pooled.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double mean(std::span<const double> xs) {
    require(!xs.empty(), "mean of an empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    require(xs.size() >= 2, "variance needs at least two values");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

double standard_error(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    return std::sqrt(variance(xs) / static_cast<double>(xs.size()));
}

RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b) {
    require(!a.empty() && !b.empty(), "rank-sum test needs two non-empty samples");
    const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);

    const double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);
    const double offset = static_cast<double>(n1 * (n1 + 1)) / 2.0;
    RankSumResult res;
    res.u = r1 - offset;
    const double centre = static_cast<double>(n1 * n2) / 2.0;
    const double observed = std::abs(res.u - centre);

    if (n <= kExactLimit) {
        // Every assignment of n1 of the pooled ranks to the first sample is
        // equally likely under the null.
        res.exact = true;
        std::size_t extreme = 0, total = 0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != n1) continue;
            double rs = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (1u << i)) rs += ranks[i];
            }
            ++total;
            if (std::abs(rs - offset - centre) >= observed - 1e-9) ++extreme;
        }
        res.p_value = static_cast<double>(extreme) / static_cast<double>(total);
        return res;
    }

    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double nd = static_cast<double>(n);
    const double var = static_cast<double>(n1 * n2) / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
    if (var <= 0.0) {
        res.p_value = 1.0;
        return res;
    }
    const double z = std::max(0.0, observed - 0.5) / std::sqrt(var);
    res.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), z)));
    return res;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    require(a.size() >= 2 && b.size() >= 2, "Welch t-test needs at least two values per sample");
    const double ma = mean(a), mb = mean(b);
    const double va = variance(a) / static_cast<double>(a.size());
    const double vb = variance(b) / static_cast<double>(b.size());
    TTestResult res;
    if (va + vb == 0.0) {
        if (ma == mb) return res;
        res.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        res.df = static_cast<double>(a.size() + b.size() - 2);
        res.p_value = 0.0;
        return res;
    }
    res.t = (ma - mb) / std::sqrt(va + vb);
    res.df = (va + vb) * (va + vb) /
             (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
    const boost::math::students_t dist(res.df);
    res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.t)));
    res.p_value = std::min(1.0, res.p_value);
    return res;
}

std::vector<double> moving_average(std::span<const double> series, std::size_t window) {
    require(window >= 1, "moving-average window must be at least 1");
    const std::size_t before = (window - 1) / 2;
    const std::size_t after = window / 2;
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t lo = i >= before ? i - before : 0;
        const std::size_t hi = std::min(series.size() - 1, i + after);
        double s = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) s += series[k];
        out[i] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

}  // namespace dpg

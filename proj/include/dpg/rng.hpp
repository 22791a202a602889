#pragma once

#include <cstdint>
#include <random>

namespace dpg {

// Thin wrapper over mt19937_64 so that every draw is bit-reproducible across
// standard library implementations (std::uniform_*_distribution is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t next() { return engine_(); }

    // Independent child stream; used to give each component of a run its own sequence.
    Rng split() {
        std::seed_seq seq{static_cast<std::uint32_t>(engine_()), static_cast<std::uint32_t>(engine_()),
                          static_cast<std::uint32_t>(engine_()), static_cast<std::uint32_t>(engine_())};
        Rng child;
        child.engine_.seed(seq);
        return child;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dpg

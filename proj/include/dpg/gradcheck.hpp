#pragma once

// Randomized gradient verification of the advised policy network: analytic
// backprop against central differences, the zero gradient under directive
// advice, and the invariance of the gradient under uniform advice c * 1.

#include <cstddef>
#include <cstdint>

namespace dpg {

struct GradcheckOptions {
    std::uint64_t seed = 1;
    std::size_t trials = 100;
    double step = 1e-5;
    // Negates the analytic gradient; used as a negative control.
    bool flip_sign = false;
};

inline constexpr double kFiniteDiffTolerance = 1e-4;   // relative error
inline constexpr double kDirectiveTolerance = 1e-10;   // max |grad|
inline constexpr double kUniformTolerance = 1e-12;     // max |grad(c·1) - grad(1)|

struct GradcheckReport {
    std::size_t trials = 0;
    double worst_finite_diff = 0.0;
    double worst_directive = 0.0;
    double worst_uniform = 0.0;

    bool finite_diff_ok() const { return worst_finite_diff < kFiniteDiffTolerance; }
    bool directive_ok() const { return worst_directive <= kDirectiveTolerance; }
    bool uniform_ok() const { return worst_uniform <= kUniformTolerance; }
    bool passed() const { return finite_diff_ok() && directive_ok() && uniform_ok(); }
};

GradcheckReport check_finite_differences(const GradcheckOptions& options);
GradcheckReport check_directive_zero(const GradcheckOptions& options);
GradcheckReport check_uniform_invariance(const GradcheckOptions& options);
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace dpg

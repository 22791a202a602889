#pragma once

// Dense two-layer network used both as the advised policy (sigmoid head whose
// outputs are multiplied by the advice and renormalized) and as the Double DQN
// value function (linear head). Everything is plain loops over std::vector.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "dpg/policy.hpp"
#include "dpg/rng.hpp"

namespace dpg {

enum class OutputHead : std::uint8_t { sigmoid = 0, linear = 1 };

// Parameters of one dense layer, viewed inside the network's flat storage.
// weights are row-major out_dim x in_dim.
struct LayerParams {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::span<double> weights;
    std::span<double> biases;
};

struct ConstLayerParams {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::span<const double> weights;
    std::span<const double> biases;
};

// tanh hidden layer followed by a sigmoid or linear output layer.
// Parameters live in one flat vector laid out as W1, b1, W2, b2 so that the
// optimizer and the finite-difference oracle can treat them as a single span.
class Mlp {
public:
    static constexpr std::size_t kDefaultHidden = 100;

    Mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, OutputHead head);

    // Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
    static Mlp random(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                      OutputHead head, Rng& rng);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t hidden_dim() const { return hidden_dim_; }
    std::size_t output_dim() const { return output_dim_; }
    OutputHead head() const { return head_; }

    std::size_t parameter_count() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    LayerParams hidden_layer();
    LayerParams output_layer();
    ConstLayerParams hidden_layer() const;
    ConstLayerParams output_layer() const;

    bool operator==(const Mlp&) const = default;

private:
    std::size_t input_dim_;
    std::size_t hidden_dim_;
    std::size_t output_dim_;
    OutputHead head_;
    std::vector<double> params_;
};

// Everything policy_backward needs from a forward pass.
struct ForwardCache {
    std::vector<double> input;
    std::vector<double> hidden;          // tanh(W1 s + b1)
    std::vector<double> output;          // sigmoid(W2 h + b2)
    std::vector<double> advice;
    std::vector<double> mixed;           // output ∘ advice
    double normalizer = 0.0;             // 1ᵀ mixed (after clamping)
    bool normalizer_clamped = false;
    std::vector<double> probs;           // mixed / normalizer
};

struct PolicyOutput {
    PolicyDistribution policy;
    ForwardCache cache;
};

inline constexpr double kNormalizerFloor = 1e-12;

// y = (sigmoid(W2 tanh(W1 s + b1) + b2) ∘ advice) / sum.
PolicyOutput policy_forward(const Mlp& net, std::span<const double> state, const AdviceVector& advice);

// log y[action], computed as log(mixed[a]) - log(normalizer).
double policy_log_prob(const ForwardCache& cache, std::size_t action);

// Gradient of -scale * log y[action] with respect to every parameter of net.
std::vector<double> policy_backward(const Mlp& net, const ForwardCache& cache, std::size_t action,
                                    double scale);

// Same as policy_backward but adds into grad (length parameter_count()).
void accumulate_policy_gradient(const Mlp& net, const ForwardCache& cache, std::size_t action,
                                double scale, std::span<double> grad);

// Non-zero entries of a feature vector. Grid observations are one-hot, so the
// replay buffer stores them in this form.
struct SparseState {
    std::size_t dim = 0;
    std::vector<std::pair<std::uint32_t, double>> entries;

    static SparseState from_dense(std::span<const double> dense);
    std::vector<double> to_dense() const;
    bool operator==(const SparseState&) const = default;
};

// Linear-head evaluation. Workspace vectors are resized as needed and reused.
struct ValueCache {
    std::vector<std::pair<std::uint32_t, double>> input;  // non-zero inputs
    std::vector<double> hidden;
    std::vector<double> output;
};

void value_forward(const Mlp& net, std::span<const double> state, ValueCache& cache);
void value_forward(const Mlp& net, const SparseState& state, ValueCache& cache);
std::vector<double> value_forward(const Mlp& net, std::span<const double> state);

// Adds output_grad * d output[action] / d params into grad.
void accumulate_value_gradient(const Mlp& net, const ValueCache& cache, std::size_t action,
                               double output_grad, std::span<double> grad);

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
    double alpha = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_parameters(std::size_t count, double alpha);
};

// Bias-corrected Adam. Throws NumericError("divergent gradient") on non-finite input.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// exp((v - max v) / temperature), normalized.
PolicyDistribution softmax(std::span<const double> values, double temperature);

using LossFunction = std::function<double(std::span<const double>)>;

// Central differences (f(θ + h e_i) - f(θ - h e_i)) / 2h for every coordinate.
std::vector<double> finite_diff_grad(const LossFunction& loss, std::span<const double> params, double h);

// ||a - b|| / (||a|| + ||b||), zero when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

// Snapshot format: 8-byte magic "DPGMLP01", u64 input/hidden/output dims,
// u8 head, then W1, b1, W2, b2 row-major as little-endian IEEE-754 doubles.
void save_snapshot(const Mlp& net, std::ostream& out);
Mlp load_snapshot(std::istream& in);
void save_snapshot(const Mlp& net, const std::filesystem::path& path);
Mlp load_snapshot(const std::filesystem::path& path);

}  // namespace dpg

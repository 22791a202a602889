#include "dpg/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "dpg/error.hpp"

namespace dpg {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

using ActiveInputs = std::vector<std::pair<std::uint32_t, double>>;

void collect_active(std::span<const double> input, ActiveInputs& active) {
    active.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (input[i] != 0.0) active.emplace_back(static_cast<std::uint32_t>(i), input[i]);
    }
}

// h = tanh(W1 s + b1) over the non-zero inputs only, so one-hot grid
// observations cost O(hidden) instead of O(hidden * cells).
void hidden_forward(ConstLayerParams layer, const ActiveInputs& input, std::vector<double>& hidden) {
    hidden.assign(layer.biases.begin(), layer.biases.end());
    for (const auto& [i, s] : input) {
        for (std::size_t o = 0; o < layer.out_dim; ++o) {
            hidden[o] += layer.weights[o * layer.in_dim + i] * s;
        }
    }
    for (double& h : hidden) h = std::tanh(h);
}

void output_forward(ConstLayerParams layer, std::span<const double> hidden, std::vector<double>& out) {
    out.resize(layer.out_dim);
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
        double z = layer.biases[o];
        const double* row = layer.weights.data() + o * layer.in_dim;
        for (std::size_t i = 0; i < layer.in_dim; ++i) z += row[i] * hidden[i];
        out[o] = z;
    }
}

// Backpropagates d loss / d z2 (output pre-activations) into grad.
void backward_from_output(const Mlp& net, const ActiveInputs& input, std::span<const double> hidden,
                          std::span<const double> output_delta, std::span<double> grad) {
    const auto l1 = net.hidden_layer();
    const auto l2 = net.output_layer();
    const std::size_t w1 = 0;
    const std::size_t b1 = w1 + l1.weights.size();
    const std::size_t w2 = b1 + l1.biases.size();
    const std::size_t b2 = w2 + l2.weights.size();

    std::vector<double> hidden_delta(l1.out_dim, 0.0);
    for (std::size_t o = 0; o < l2.out_dim; ++o) {
        const double d = output_delta[o];
        if (d == 0.0) continue;
        grad[b2 + o] += d;
        const double* row = l2.weights.data() + o * l2.in_dim;
        double* grow = grad.data() + w2 + o * l2.in_dim;
        for (std::size_t i = 0; i < l2.in_dim; ++i) {
            grow[i] += d * hidden[i];
            hidden_delta[i] += d * row[i];
        }
    }
    for (std::size_t o = 0; o < l1.out_dim; ++o) {
        hidden_delta[o] *= 1.0 - hidden[o] * hidden[o];
        grad[b1 + o] += hidden_delta[o];
    }
    for (const auto& [i, s] : input) {
        for (std::size_t o = 0; o < l1.out_dim; ++o) {
            grad[w1 + o * l1.in_dim + i] += hidden_delta[o] * s;
        }
    }
}

void write_u64(std::ostream& out, std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
    return v;
}

constexpr char kMagic[8] = {'D', 'P', 'G', 'M', 'L', 'P', '0', '1'};

}  // namespace

Mlp::Mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, OutputHead head)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), output_dim_(output_dim), head_(head) {
    require(input_dim >= 1 && hidden_dim >= 1 && output_dim >= 1, "network dimensions must be positive");
    params_.assign(hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim, 0.0);
}

Mlp Mlp::random(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, OutputHead head,
                Rng& rng) {
    Mlp net(input_dim, hidden_dim, output_dim, head);
    const double r1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (double& w : net.hidden_layer().weights) w = rng.uniform(-r1, r1);
    for (double& w : net.output_layer().weights) w = rng.uniform(-r2, r2);
    return net;
}

LayerParams Mlp::hidden_layer() {
    std::span<double> all(params_);
    return {input_dim_, hidden_dim_, all.subspan(0, hidden_dim_ * input_dim_),
            all.subspan(hidden_dim_ * input_dim_, hidden_dim_)};
}

LayerParams Mlp::output_layer() {
    std::span<double> all(params_);
    const std::size_t off = hidden_dim_ * input_dim_ + hidden_dim_;
    return {hidden_dim_, output_dim_, all.subspan(off, output_dim_ * hidden_dim_),
            all.subspan(off + output_dim_ * hidden_dim_, output_dim_)};
}

ConstLayerParams Mlp::hidden_layer() const {
    std::span<const double> all(params_);
    return {input_dim_, hidden_dim_, all.subspan(0, hidden_dim_ * input_dim_),
            all.subspan(hidden_dim_ * input_dim_, hidden_dim_)};
}

ConstLayerParams Mlp::output_layer() const {
    std::span<const double> all(params_);
    const std::size_t off = hidden_dim_ * input_dim_ + hidden_dim_;
    return {hidden_dim_, output_dim_, all.subspan(off, output_dim_ * hidden_dim_),
            all.subspan(off + output_dim_ * hidden_dim_, output_dim_)};
}

PolicyOutput policy_forward(const Mlp& net, std::span<const double> state, const AdviceVector& advice) {
    require(net.head() == OutputHead::sigmoid, "policy_forward needs a sigmoid-head network");
    require(state.size() == net.input_dim(), "state has " + std::to_string(state.size()) +
                                                 " features, network expects " +
                                                 std::to_string(net.input_dim()));
    require(advice.size() == net.output_dim(), "advice length does not match action count");

    ForwardCache c;
    c.input.assign(state.begin(), state.end());
    ActiveInputs active;
    collect_active(state, active);
    hidden_forward(net.hidden_layer(), active, c.hidden);
    output_forward(net.output_layer(), c.hidden, c.output);
    for (double& z : c.output) z = sigmoid(z);

    c.advice.assign(advice.values().begin(), advice.values().end());
    c.mixed.resize(c.output.size());
    double total = 0.0;
    for (std::size_t a = 0; a < c.output.size(); ++a) {
        c.mixed[a] = c.output[a] * c.advice[a];
        total += c.mixed[a];
    }
    if (total < kNormalizerFloor) {
        total = kNormalizerFloor;
        c.normalizer_clamped = true;
    }
    c.normalizer = total;
    c.probs.resize(c.mixed.size());
    for (std::size_t a = 0; a < c.mixed.size(); ++a) c.probs[a] = c.mixed[a] / total;
    if (c.normalizer_clamped) {
        // Renormalize so the returned distribution is still a distribution.
        double s = 0.0;
        for (double p : c.probs) s += p;
        if (s > 0.0) {
            for (double& p : c.probs) p /= s;
        } else {
            c.probs.assign(c.probs.size(), 0.0);
            for (std::size_t a = 0; a < c.probs.size(); ++a) {
                if (c.advice[a] > 0.0) c.probs[a] = 1.0;
            }
            s = 0.0;
            for (double p : c.probs) s += p;
            for (double& p : c.probs) p /= s;
        }
    }
    PolicyDistribution dist(c.probs);
    return {std::move(dist), std::move(c)};
}

double policy_log_prob(const ForwardCache& cache, std::size_t action) {
    require(action < cache.mixed.size(), "action index out of range");
    if (!(cache.mixed[action] > 0.0)) throw ContractError("action has zero mixed probability");
    return std::log(cache.mixed[action]) - std::log(cache.normalizer);
}

void accumulate_policy_gradient(const Mlp& net, const ForwardCache& cache, std::size_t action, double scale,
                                std::span<double> grad) {
    require(grad.size() == net.parameter_count(), "gradient buffer has the wrong size");
    require(action < cache.mixed.size(), "action index out of range");
    if (!(cache.mixed[action] > 0.0)) throw ContractError("action has zero mixed probability");
    if (scale == 0.0) return;

    // loss = -scale * (log mixed[a] - log normalizer); mixed = output ∘ advice.
    const std::size_t n = cache.mixed.size();
    const double inv_norm = cache.normalizer_clamped ? 0.0 : 1.0 / cache.normalizer;
    const double inv_taken = 1.0 / cache.mixed[action];
    std::vector<double> delta(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double d_mixed = -scale * ((j == action ? inv_taken : 0.0) - inv_norm);
        const double d_out = d_mixed * cache.advice[j];
        const double s = cache.output[j];
        delta[j] = d_out * s * (1.0 - s);
    }
    ActiveInputs active;
    collect_active(cache.input, active);
    backward_from_output(net, active, cache.hidden, delta, grad);
}

std::vector<double> policy_backward(const Mlp& net, const ForwardCache& cache, std::size_t action,
                                    double scale) {
    std::vector<double> grad(net.parameter_count(), 0.0);
    accumulate_policy_gradient(net, cache, action, scale, grad);
    return grad;
}

SparseState SparseState::from_dense(std::span<const double> dense) {
    SparseState s;
    s.dim = dense.size();
    collect_active(dense, s.entries);
    return s;
}

std::vector<double> SparseState::to_dense() const {
    std::vector<double> dense(dim, 0.0);
    for (const auto& [i, v] : entries) dense[i] = v;
    return dense;
}

void value_forward(const Mlp& net, const SparseState& state, ValueCache& cache) {
    require(state.dim == net.input_dim(), "state dimension does not match value network");
    cache.input = state.entries;
    hidden_forward(net.hidden_layer(), cache.input, cache.hidden);
    output_forward(net.output_layer(), cache.hidden, cache.output);
    if (net.head() == OutputHead::sigmoid) {
        for (double& z : cache.output) z = sigmoid(z);
    }
}

void value_forward(const Mlp& net, std::span<const double> state, ValueCache& cache) {
    require(state.size() == net.input_dim(), "state dimension does not match value network");
    collect_active(state, cache.input);
    hidden_forward(net.hidden_layer(), cache.input, cache.hidden);
    output_forward(net.output_layer(), cache.hidden, cache.output);
    if (net.head() == OutputHead::sigmoid) {
        for (double& z : cache.output) z = sigmoid(z);
    }
}

std::vector<double> value_forward(const Mlp& net, std::span<const double> state) {
    ValueCache cache;
    value_forward(net, state, cache);
    return cache.output;
}

void accumulate_value_gradient(const Mlp& net, const ValueCache& cache, std::size_t action, double output_grad,
                               std::span<double> grad) {
    require(net.head() == OutputHead::linear, "value gradient needs a linear-head network");
    require(action < net.output_dim(), "action index out of range");
    std::vector<double> delta(net.output_dim(), 0.0);
    delta[action] = output_grad;
    backward_from_output(net, cache.input, cache.hidden, delta, grad);
}

AdamState AdamState::for_parameters(std::size_t count, double alpha) {
    AdamState s;
    s.first_moment.assign(count, 0.0);
    s.second_moment.assign(count, 0.0);
    s.alpha = alpha;
    return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    require(params.size() == grads.size(), "parameter and gradient sizes differ");
    require(state.first_moment.size() == params.size() && state.second_moment.size() == params.size(),
            "optimizer state does not match parameters");
    for (double g : grads) {
        if (!std::isfinite(g)) throw NumericError("divergent gradient");
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        params[i] -= state.alpha * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

PolicyDistribution softmax(std::span<const double> values, double temperature) {
    require(temperature > 0.0, "softmax temperature must be positive");
    require(!values.empty(), "softmax of an empty vector");
    double top = values[0];
    for (double v : values) {
        require(std::isfinite(v), "softmax input is not finite");
        top = std::max(top, v);
    }
    std::vector<double> out(values.size());
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp((values[i] - top) / temperature);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return PolicyDistribution(std::move(out));
}

std::vector<double> finite_diff_grad(const LossFunction& loss, std::span<const double> params, double h) {
    require(h > 0.0, "finite-difference step must be positive");
    std::vector<double> theta(params.begin(), params.end());
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double up = loss(theta);
        theta[i] = saved - h;
        const double down = loss(theta);
        theta[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("loss is not finite");
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "relative_error on vectors of different length");
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) + std::sqrt(nb);
    return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

void save_snapshot(const Mlp& net, std::ostream& out) {
    out.write(kMagic, sizeof kMagic);
    write_u64(out, net.input_dim());
    write_u64(out, net.hidden_dim());
    write_u64(out, net.output_dim());
    const char head = static_cast<char>(net.head());
    out.write(&head, 1);
    for (double v : net.parameters()) write_u64(out, std::bit_cast<std::uint64_t>(v));
    if (!out) throw std::runtime_error("failed writing network snapshot");
}

Mlp load_snapshot(std::istream& in) {
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ConfigError("not a network snapshot");
    const auto in_dim = read_u64(in);
    const auto hidden = read_u64(in);
    const auto out_dim = read_u64(in);
    char head = 0;
    in.read(&head, 1);
    if (!in || in_dim == 0 || hidden == 0 || out_dim == 0 || in_dim > (1u << 24) || hidden > (1u << 24) ||
        out_dim > (1u << 24) || (head != 0 && head != 1)) {
        throw ConfigError("corrupt network snapshot header");
    }
    Mlp net(in_dim, hidden, out_dim, static_cast<OutputHead>(head));
    for (double& v : net.parameters()) {
        v = std::bit_cast<double>(read_u64(in));
        if (!in) throw ConfigError("truncated network snapshot");
        if (!std::isfinite(v)) throw ConfigError("non-finite parameter in snapshot");
    }
    return net;
}

void save_snapshot(const Mlp& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    save_snapshot(net, out);
}

Mlp load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open snapshot " + path.string());
    return load_snapshot(in);
}

}  // namespace dpg

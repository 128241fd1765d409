// Reverse-mode feedforward network: dense layers with relu/softmax/sigmoid,
// SGD with Nesterov momentum, and a central-difference gradient oracle.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ordinal/error.hpp"
#include "ordinal/tensor.hpp"

namespace ordinal {

enum class Activation : std::uint32_t { identity = 0, relu = 1, softmax = 2, sigmoid = 3 };

inline std::string_view to_token(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::softmax: return "softmax";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

inline Activation parse_activation(std::string_view token) {
    if (token == "identity") return Activation::identity;
    if (token == "relu") return Activation::relu;
    if (token == "softmax") return Activation::softmax;
    if (token == "sigmoid") return Activation::sigmoid;
    throw ConfigError("unknown activation '" + std::string(token) + "'");
}

inline double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Weight [fan_in x fan_out] and bias [fan_out]; also used for gradients and velocities.
struct LayerTensors {
    Tensor weight;
    Tensor bias;

    friend bool operator==(const LayerTensors&, const LayerTensors&) = default;
};

struct DenseLayer {
    Tensor weight;
    Tensor bias;
    Activation activation = Activation::identity;

    std::size_t fan_in() const { return weight.rows(); }
    std::size_t fan_out() const { return weight.cols(); }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct NetworkParams {
    std::vector<DenseLayer> layers;

    std::size_t input_width() const { return layers.empty() ? 0 : layers.front().fan_in(); }
    std::size_t output_width() const { return layers.empty() ? 0 : layers.back().fan_out(); }

    /// Throws ShapeError unless adjacent layer dimensions chain.
    void validate() const {
        if (layers.empty()) throw ShapeError("network has no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& layer = layers[l];
            if (layer.weight.rank() != 2 || layer.bias.rank() != 1 ||
                layer.bias.size() != layer.fan_out()) {
                throw ShapeError("layer " + std::to_string(l) + " has inconsistent weight/bias shapes");
            }
            if (l > 0 && layers[l - 1].fan_out() != layer.fan_in()) {
                throw ShapeError("layer " + std::to_string(l) + " fan_in " + std::to_string(layer.fan_in()) +
                                 " does not chain with previous fan_out " +
                                 std::to_string(layers[l - 1].fan_out()));
            }
        }
    }

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
/// `widths` lists input width, hidden widths, output width.
inline NetworkParams init_network(std::span<const std::size_t> widths, Activation hidden, Activation output,
                                  std::uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("network needs at least input and output widths");
    for (auto w : widths) {
        if (w == 0) throw ConfigError("layer widths must be positive");
    }
    std::mt19937_64 rng(seed);
    NetworkParams params;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer{Tensor::matrix(fan_in, fan_out), Tensor({fan_out}, 0.0),
                         l + 2 == widths.size() ? output : hidden};
        for (auto& w : layer.weight.values()) w = dist(rng);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace detail {

inline void activate_rows(Activation activation, Tensor& z) {
    switch (activation) {
        case Activation::identity:
            return;
        case Activation::relu:
            for (auto& v : z.values()) v = v > 0.0 ? v : 0.0;
            return;
        case Activation::sigmoid:
            for (auto& v : z.values()) v = sigmoid(v);
            return;
        case Activation::softmax:
            for (std::size_t r = 0; r < z.rows(); ++r) {
                auto row = z.row(r);
                double peak = row[0];
                for (double v : row) peak = v > peak ? v : peak;
                double total = 0.0;
                for (auto& v : row) {
                    v = std::exp(v - peak);
                    total += v;
                }
                for (auto& v : row) v /= total;
            }
            return;
    }
}

// Maps dL/d(output) to dL/d(pre-activation), in place, given the layer output.
inline void activation_backward(Activation activation, const Tensor& output, Tensor& grad) {
    switch (activation) {
        case Activation::identity:
            return;
        case Activation::relu:
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = output[i] > 0.0 ? grad[i] : 0.0;
            return;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] * (1.0 - output[i]);
            return;
        case Activation::softmax:
            for (std::size_t r = 0; r < grad.rows(); ++r) {
                auto g = grad.row(r);
                auto f = output.row(r);
                double dot = 0.0;
                for (std::size_t j = 0; j < g.size(); ++j) dot += g[j] * f[j];
                for (std::size_t j = 0; j < g.size(); ++j) g[j] = f[j] * (g[j] - dot);
            }
            return;
    }
}

}  // namespace detail

struct ForwardPass {
    Tensor input;
    std::vector<Tensor> activations;  // one per layer

    const Tensor& output() const { return activations.back(); }
};

inline ForwardPass forward(const NetworkParams& params, const Tensor& batch) {
    params.validate();
    if (batch.rank() != 2 || batch.cols() != params.input_width()) {
        throw ShapeError("batch shape " + batch.shape_string() + " does not match network input width " +
                         std::to_string(params.input_width()));
    }
    if (!batch.all_finite()) throw InputError("batch contains non-finite values");

    ForwardPass pass{batch, {}};
    pass.activations.reserve(params.layers.size());
    const Tensor* in = &pass.input;
    for (const auto& layer : params.layers) {
        const std::size_t n = in->rows();
        const std::size_t fan_in = layer.fan_in();
        const std::size_t fan_out = layer.fan_out();
        Tensor z = Tensor::matrix(n, fan_out);
        for (std::size_t r = 0; r < n; ++r) {
            auto zr = z.row(r);
            std::copy(layer.bias.values().begin(), layer.bias.values().end(), zr.begin());
            auto xr = in->row(r);
            for (std::size_t i = 0; i < fan_in; ++i) {
                const double x = xr[i];
                if (x == 0.0) continue;
                auto w = layer.weight.row(i);
                for (std::size_t j = 0; j < fan_out; ++j) zr[j] += x * w[j];
            }
        }
        detail::activate_rows(layer.activation, z);
        pass.activations.push_back(std::move(z));
        in = &pass.activations.back();
    }
    if (!pass.output().all_finite()) throw InputError("forward pass produced non-finite activations");
    return pass;
}

struct Gradients {
    std::vector<LayerTensors> layers;
    Tensor input;
};

/// Gradient of a scalar loss with respect to every parameter (and the input),
/// given dL/d(network output).
inline Gradients backward(const NetworkParams& params, const ForwardPass& pass, const Tensor& output_gradient) {
    params.validate();
    if (pass.activations.size() != params.layers.size()) {
        throw ShapeError("activation count does not match layer count");
    }
    require_same_shape(output_gradient, pass.output(), "output gradient");

    const std::size_t depth = params.layers.size();
    Gradients grads;
    grads.layers.resize(depth);

    Tensor delta = output_gradient;
    for (std::size_t l = depth; l-- > 0;) {
        const auto& layer = params.layers[l];
        detail::activation_backward(layer.activation, pass.activations[l], delta);

        const Tensor& in = l == 0 ? pass.input : pass.activations[l - 1];
        const std::size_t n = in.rows();
        const std::size_t fan_in = layer.fan_in();
        const std::size_t fan_out = layer.fan_out();

        Tensor dw = Tensor::matrix(fan_in, fan_out);
        Tensor db({fan_out}, 0.0);
        Tensor din = Tensor::matrix(n, fan_in);
        for (std::size_t r = 0; r < n; ++r) {
            auto d = delta.row(r);
            auto x = in.row(r);
            auto dx = din.row(r);
            for (std::size_t j = 0; j < fan_out; ++j) db[j] += d[j];
            for (std::size_t i = 0; i < fan_in; ++i) {
                auto w = layer.weight.row(i);
                auto g = dw.row(i);
                const double xi = x[i];
                double acc = 0.0;
                for (std::size_t j = 0; j < fan_out; ++j) {
                    g[j] += xi * d[j];
                    acc += d[j] * w[j];
                }
                dx[i] = acc;
            }
        }
        grads.layers[l] = {std::move(dw), std::move(db)};
        delta = std::move(din);
    }
    grads.input = std::move(delta);
    return grads;
}

struct OptimizerState {
    std::vector<LayerTensors> velocity;
    double learning_rate = 0.01;
    double momentum = 0.9;

    static OptimizerState zeros_like(const NetworkParams& params, double learning_rate, double momentum) {
        OptimizerState state{{}, learning_rate, momentum};
        for (const auto& layer : params.layers) {
            state.velocity.push_back({Tensor(layer.weight.shape(), 0.0), Tensor(layer.bias.shape(), 0.0)});
        }
        return state;
    }
};

inline void check_optimizer_settings(double learning_rate, double momentum) {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning rate must be positive, got " + std::to_string(learning_rate));
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError("momentum must lie in [0, 1), got " + std::to_string(momentum));
    }
}

/// v <- mu*v - lr*g;  theta <- theta + mu*v - lr*g  (look-ahead Nesterov form).
inline void nesterov_update(std::span<double> theta, std::span<const double> grad, std::span<double> velocity,
                            double learning_rate, double momentum) {
    if (theta.size() != grad.size() || theta.size() != velocity.size()) {
        throw ShapeError("parameter, gradient and velocity lengths differ");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double step = learning_rate * grad[i];
        velocity[i] = momentum * velocity[i] - step;
        theta[i] = theta[i] + momentum * velocity[i] - step;
    }
}

inline std::pair<NetworkParams, OptimizerState> sgd_nesterov_step(NetworkParams params, const Gradients& grads,
                                                                  OptimizerState state) {
    check_optimizer_settings(state.learning_rate, state.momentum);
    if (grads.layers.size() != params.layers.size() || state.velocity.size() != params.layers.size()) {
        throw ShapeError("gradient/velocity layer count does not mirror parameters");
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        auto& vel = state.velocity[l];
        require_same_shape(layer.weight, grads.layers[l].weight, "weight gradient");
        require_same_shape(layer.weight, vel.weight, "weight velocity");
        require_same_shape(layer.bias, grads.layers[l].bias, "bias gradient");
        require_same_shape(layer.bias, vel.bias, "bias velocity");
        nesterov_update(layer.weight.values(), grads.layers[l].weight.values(), vel.weight.values(),
                        state.learning_rate, state.momentum);
        nesterov_update(layer.bias.values(), grads.layers[l].bias.values(), vel.bias.values(),
                        state.learning_rate, state.momentum);
    }
    return {std::move(params), std::move(state)};
}

/// Central differences (L(x+eps e_i) - L(x-eps e_i)) / (2 eps) for each coordinate.
inline std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& loss,
                                             std::vector<double> x, double eps = 1e-5) {
    if (!(eps > 0.0)) throw DomainError("finite-difference step must be positive");
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double up = loss(x);
        x[i] = saved - eps;
        const double down = loss(x);
        x[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw OracleError("loss is non-finite at coordinate " + std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

/// Finite-difference gradient over every network parameter. `Gradients::input` is left empty.
inline Gradients finite_difference_gradient(const std::function<double(const NetworkParams&)>& loss,
                                            const NetworkParams& params, double eps = 1e-5) {
    if (!(eps > 0.0)) throw DomainError("finite-difference step must be positive");
    NetworkParams probe = params;
    Gradients grads;
    auto central = [&](double& slot) {
        const double saved = slot;
        slot = saved + eps;
        const double up = loss(probe);
        slot = saved - eps;
        const double down = loss(probe);
        slot = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) throw OracleError("loss is non-finite under perturbation");
        return (up - down) / (2.0 * eps);
    };
    for (auto& layer : probe.layers) {
        LayerTensors g{Tensor(layer.weight.shape(), 0.0), Tensor(layer.bias.shape(), 0.0)};
        for (std::size_t i = 0; i < layer.weight.size(); ++i) g.weight[i] = central(layer.weight[i]);
        for (std::size_t i = 0; i < layer.bias.size(); ++i) g.bias[i] = central(layer.bias[i]);
        grads.layers.push_back(std::move(g));
    }
    return grads;
}

}  // namespace ordinal

// Backprop vs. central differences on random small networks, per loss kind.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ordinal/heads.hpp"
#include "ordinal/netcore.hpp"

namespace ordinal {

/// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
/// turning rounding noise into large ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

struct GradcheckReport {
    LossKind loss = LossKind::fix_a;
    std::size_t instances = 0;
    std::size_t coordinates = 0;
    double max_relative_error = 0.0;
};

/// Random (network, batch, labels[, anchors]) instances; compares the
/// backpropagated gradient of the batch loss with central differences over
/// every weight, bias and (for learn-a heads) anchor entry.
inline GradcheckReport gradient_check(LossKind loss, std::size_t instances, std::uint64_t seed, double eps = 1e-5) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> classes(3, 6);
    std::uniform_int_distribution<std::size_t> inputs(2, 5);
    std::uniform_int_distribution<std::size_t> rows(4, 10);
    std::uniform_int_distribution<std::size_t> width(3, 8);
    std::uniform_int_distribution<int> depth(0, 2);
    std::normal_distribution<double> normal(0.0, 1.0);

    GradcheckReport report{loss, 0, 0, 0.0};
    for (std::size_t t = 0; t < instances; ++t) {
        const int k = classes(rng);
        const std::size_t n = rows(rng);
        std::vector<std::size_t> widths{inputs(rng)};
        for (int h = depth(rng); h > 0; --h) widths.push_back(width(rng));
        widths.push_back(head_width(loss, k));
        NetworkParams params = init_network(widths, Activation::relu, head_activation(loss), rng());
        // Zero biases behind a dead layer put every pre-activation exactly on the
        // relu kink, where central differences are meaningless.
        for (auto& layer : params.layers) {
            for (auto& b : layer.bias.values()) b = 0.1 * normal(rng);
        }

        Tensor x = Tensor::matrix(n, widths.front());
        for (auto& v : x.values()) v = normal(rng);
        std::vector<int> labels(n);
        std::uniform_int_distribution<int> label(0, k - 1);
        for (auto& c : labels) c = label(rng);
        labels[0] = 0;  // at least two distinct labels, so the qwk batch is never degenerate
        labels[1] = k - 1;

        AnchorVector anchors = has_learnable_anchors(loss) ? AnchorVector::trainable(k) : AnchorVector::fixed(k);
        if (anchors.learnable) {
            for (auto& a : anchors.values) a += 0.3 * normal(rng);
        }

        const auto pass = forward(params, x);
        const HeadLoss analytic = head_loss(loss, pass.output(), labels, anchors);
        const Gradients grads = backward(params, pass, analytic.output_grad);

        auto loss_of_params = [&](const NetworkParams& p) {
            return head_loss(loss, forward(p, x).output(), labels, anchors).value;
        };
        const Gradients numeric = finite_difference_gradient(loss_of_params, params, eps);
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            for (std::size_t i = 0; i < grads.layers[l].weight.size(); ++i) {
                report.max_relative_error = std::max(
                    report.max_relative_error, relative_error(grads.layers[l].weight[i], numeric.layers[l].weight[i]));
                ++report.coordinates;
            }
            for (std::size_t i = 0; i < grads.layers[l].bias.size(); ++i) {
                report.max_relative_error = std::max(
                    report.max_relative_error, relative_error(grads.layers[l].bias[i], numeric.layers[l].bias[i]));
                ++report.coordinates;
            }
        }

        if (anchors.learnable) {
            const Tensor out = pass.output();
            auto loss_of_anchors = [&](std::span<const double> a) {
                AnchorVector probe{std::vector<double>(a.begin(), a.end()), true};
                return head_loss(loss, out, labels, probe).value;
            };
            const auto numeric_a = finite_difference(loss_of_anchors, anchors.values, eps);
            for (std::size_t j = 0; j < numeric_a.size(); ++j) {
                report.max_relative_error =
                    std::max(report.max_relative_error, relative_error(analytic.anchor_grad[j], numeric_a[j]));
                ++report.coordinates;
            }
        }
        ++report.instances;
    }
    return report;
}

}  // namespace ordinal

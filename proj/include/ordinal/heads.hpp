// Ordinal output heads and their training losses.
//
// Every softmax head reads f(x), a distribution over k ordered classes. The
// fix-a head predicts the soft argmax a^T f with a = [0, 1, ..., k-1] and is
// trained on (c - a^T f)^2, which is the negative log-density of a unit-variance
// Gaussian centred on a^T f up to constants. The learn-a variants train a too;
// the sigm variant squashes the prediction into (0, k-1). The cheng head is a
// k-1 wide sigmoid layer fitted to cumulative binary codes.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordinal/error.hpp"
#include "ordinal/netcore.hpp"
#include "ordinal/qwk.hpp"
#include "ordinal/tensor.hpp"

namespace ordinal {

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

enum class LossKind { cross_entropy, fix_a, learn_a, learn_a_sigm, cheng, qwk };

inline constexpr LossKind kAllLossKinds[] = {LossKind::cross_entropy, LossKind::fix_a,  LossKind::learn_a,
                                             LossKind::learn_a_sigm,  LossKind::cheng,  LossKind::qwk};

inline std::string_view to_token(LossKind kind) {
    switch (kind) {
        case LossKind::cross_entropy: return "cross-entropy";
        case LossKind::fix_a: return "fix-a";
        case LossKind::learn_a: return "learn-a";
        case LossKind::learn_a_sigm: return "learn-a-sigm";
        case LossKind::cheng: return "cheng";
        case LossKind::qwk: return "qwk";
    }
    return "?";
}

inline LossKind parse_loss_kind(std::string_view token) {
    for (auto kind : kAllLossKinds) {
        if (to_token(kind) == token) return kind;
    }
    throw ConfigError("unknown loss kind '" + std::string(token) +
                      "' (expected cross-entropy|fix-a|learn-a|learn-a-sigm|cheng|qwk)");
}

inline bool is_softmax_head(LossKind kind) { return kind != LossKind::cheng; }
inline bool has_learnable_anchors(LossKind kind) {
    return kind == LossKind::learn_a || kind == LossKind::learn_a_sigm;
}
inline std::size_t head_width(LossKind kind, int k) {
    return static_cast<std::size_t>(is_softmax_head(kind) ? k : k - 1);
}
inline Activation head_activation(LossKind kind) {
    return is_softmax_head(kind) ? Activation::softmax : Activation::sigmoid;
}

struct AnchorVector {
    std::vector<double> values;
    bool learnable = false;

    static AnchorVector fixed(int k) { return {ramp(k), false}; }
    static AnchorVector trainable(int k) { return {ramp(k), true}; }

    /// [0..k-1] shifted to zero mean. Starting point for learn-a-sigm, where an
    /// uncentred ramp keeps (k-1) sigmoid(a^T f) at or above (k-1)/2.
    static AnchorVector trainable_centered(int k) {
        auto a = ramp(k);
        const double mid = static_cast<double>(k - 1) / 2.0;
        for (auto& v : a) v -= mid;
        return {std::move(a), true};
    }

    std::size_t size() const noexcept { return values.size(); }

    friend bool operator==(const AnchorVector&, const AnchorVector&) = default;

private:
    static std::vector<double> ramp(int k) {
        if (k < 2) throw ConfigError("need at least two classes, got k = " + std::to_string(k));
        std::vector<double> a(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i);
        return a;
    }
};

/// Variance of the Gaussian whose mean is the soft argmax. Only scales the
/// density; training uses the plain squared error.
struct GaussianHeadParams {
    double sigma_sq = 1.0;

    double log_density(double c, double mean) const {
        if (!(sigma_sq > 0.0)) throw DomainError("sigma^2 must be positive");
        const double d = c - mean;
        return -0.5 * std::log(2.0 * std::numbers::pi * sigma_sq) - d * d / (2.0 * sigma_sq);
    }
};

namespace detail {

inline void check_distribution(std::span<const double> f) {
    if (f.empty()) throw ShapeError("empty distribution");
    double total = 0.0;
    for (double v : f) {
        if (!std::isfinite(v) || v < 0.0) throw DomainError("distribution entries must be finite and nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("distribution does not sum to 1");
}

inline void check_label(int c, std::size_t k) {
    if (c < 0 || static_cast<std::size_t>(c) >= k) {
        throw LabelError("label " + std::to_string(c) + " outside [0, " + std::to_string(k - 1) + "]");
    }
}

inline double clamp_probability(double p) {
    return p < kProbabilityFloor ? kProbabilityFloor : (p > 1.0 - kProbabilityFloor ? 1.0 - kProbabilityFloor : p);
}

}  // namespace detail

/// -sum y_i log f_i, with f floored at 1e-12.
inline double cross_entropy_loss(std::span<const double> f, std::span<const double> y) {
    if (f.size() != y.size()) throw ShapeError("prediction and target widths differ");
    detail::check_distribution(f);
    double loss = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (y[i] != 0.0) loss -= y[i] * std::log(f[i] < kProbabilityFloor ? kProbabilityFloor : f[i]);
    }
    return loss;
}

inline double soft_argmax(std::span<const double> f, const AnchorVector& a) {
    if (f.size() != a.size()) throw ShapeError("distribution and anchor lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += a.values[i] * f[i];
    return s;
}

/// (c - a^T f)^2 with a = [0..k-1].
inline double fix_a_loss(std::span<const double> f, int c) {
    detail::check_label(c, f.size());
    const double d = static_cast<double>(c) - soft_argmax(f, AnchorVector::fixed(static_cast<int>(f.size())));
    return d * d;
}

inline double learn_a_loss(std::span<const double> f, int c, const AnchorVector& a) {
    detail::check_label(c, f.size());
    const double d = static_cast<double>(c) - soft_argmax(f, a);
    return d * d;
}

/// (k-1) * sigmoid(a^T f), always strictly inside (0, k-1) for finite inputs.
inline double learn_a_sigm_prediction(std::span<const double> f, const AnchorVector& a) {
    return static_cast<double>(f.size() - 1) * sigmoid(soft_argmax(f, a));
}

inline double learn_a_sigm_loss(std::span<const double> f, int c, const AnchorVector& a) {
    detail::check_label(c, f.size());
    const double d = static_cast<double>(c) - learn_a_sigm_prediction(f, a);
    return d * d;
}

/// First c entries 1, remaining k-1-c entries 0.
inline std::vector<double> cheng_encode(int c, int k) {
    if (k < 2) throw ConfigError("need at least two classes");
    detail::check_label(c, static_cast<std::size_t>(k));
    std::vector<double> code(static_cast<std::size_t>(k - 1), 0.0);
    for (int i = 0; i < c; ++i) code[static_cast<std::size_t>(i)] = 1.0;
    return code;
}

inline double cheng_bce_loss(std::span<const double> g, std::span<const double> code) {
    if (g.size() != code.size()) throw ShapeError("sigmoid output and code lengths differ");
    double loss = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double p = detail::clamp_probability(g[i]);
        loss -= code[i] * std::log(p) + (1.0 - code[i]) * std::log(1.0 - p);
    }
    return loss;
}

/// Continuous prediction of a softmax head: a^T f, or (k-1) sigmoid(a^T f) for learn-a-sigm.
inline double head_score(LossKind kind, std::span<const double> f, const AnchorVector& a) {
    if (!is_softmax_head(kind)) throw UnsupportedError("cheng head has no soft-argmax score");
    return kind == LossKind::learn_a_sigm ? learn_a_sigm_prediction(f, a) : soft_argmax(f, a);
}

struct HeadLoss {
    double value = 0.0;
    Tensor output_grad;               // dL / d(network output), same shape as the output
    std::vector<double> anchor_grad;  // dL / da, empty unless anchors are learnable
    bool skipped = false;             // degenerate qwk batch; no gradient
};

/// Mean per-example loss over the batch (qwk: the batch-level kappa fraction)
/// and its gradients. `output` is the softmax (or cheng sigmoid) layer output.
inline HeadLoss head_loss(LossKind kind, const Tensor& output, std::span<const int> labels, const AnchorVector& a) {
    if (output.rank() != 2 || output.rows() != labels.size()) {
        throw ShapeError("head output rows do not match label count");
    }
    const std::size_t n = output.rows();
    const std::size_t width = output.cols();
    const int k = static_cast<int>(is_softmax_head(kind) ? width : width + 1);
    if (is_softmax_head(kind) && a.size() != width) throw ShapeError("anchor length does not match head width");
    if (n == 0) throw DomainError("empty batch");

    HeadLoss out{0.0, Tensor(output.shape(), 0.0), {}, false};
    if (has_learnable_anchors(kind)) out.anchor_grad.assign(a.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);

    if (kind == LossKind::qwk) {
        for (int c : labels) detail::check_label(c, width);
        auto surrogate = qwk_surrogate_loss(one_hot(labels, k), output, weight_matrix(k, WeightKind::quadratic));
        if (!surrogate) {
            out.skipped = true;
            return out;
        }
        out.value = surrogate->value;
        out.output_grad = std::move(surrogate->grad);
        return out;
    }

    for (std::size_t r = 0; r < n; ++r) {
        const int c = labels[r];
        detail::check_label(c, static_cast<std::size_t>(k));
        auto f = output.row(r);
        auto g = out.output_grad.row(r);
        switch (kind) {
            case LossKind::cross_entropy: {
                const double p = f[static_cast<std::size_t>(c)];
                if (p < kProbabilityFloor) {
                    out.value -= std::log(kProbabilityFloor) * inv_n;
                } else {
                    out.value -= std::log(p) * inv_n;
                    g[static_cast<std::size_t>(c)] = -inv_n / p;
                }
                break;
            }
            case LossKind::fix_a:
            case LossKind::learn_a: {
                const double resid = static_cast<double>(c) - soft_argmax(f, a);
                out.value += resid * resid * inv_n;
                const double ds = -2.0 * resid * inv_n;
                for (std::size_t j = 0; j < width; ++j) g[j] = ds * a.values[j];
                if (kind == LossKind::learn_a) {
                    for (std::size_t j = 0; j < width; ++j) out.anchor_grad[j] += ds * f[j];
                }
                break;
            }
            case LossKind::learn_a_sigm: {
                const double s = sigmoid(soft_argmax(f, a));
                const double scale = static_cast<double>(k - 1);
                const double resid = static_cast<double>(c) - scale * s;
                out.value += resid * resid * inv_n;
                const double ds = -2.0 * resid * scale * s * (1.0 - s) * inv_n;
                for (std::size_t j = 0; j < width; ++j) {
                    g[j] = ds * a.values[j];
                    out.anchor_grad[j] += ds * f[j];
                }
                break;
            }
            case LossKind::cheng: {
                for (std::size_t i = 0; i < width; ++i) {
                    const double target = static_cast<int>(i) < c ? 1.0 : 0.0;
                    const double raw = f[i];
                    const double p = detail::clamp_probability(raw);
                    out.value -= (target * std::log(p) + (1.0 - target) * std::log(1.0 - p)) * inv_n;
                    if (p == raw) g[i] = (-target / p + (1.0 - target) / (1.0 - p)) * inv_n;
                }
                break;
            }
            case LossKind::qwk:
                break;
        }
    }
    return out;
}

}  // namespace ordinal

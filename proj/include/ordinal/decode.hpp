// Prediction rules mapping head outputs to a class index.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordinal/error.hpp"
#include "ordinal/heads.hpp"
#include "ordinal/qwk.hpp"

namespace ordinal {

enum class DecodeRule { round_soft_argmax, argmax, cheng_first_zero, conditional_risk };

inline constexpr DecodeRule kAllDecodeRules[] = {DecodeRule::argmax, DecodeRule::round_soft_argmax,
                                                 DecodeRule::conditional_risk, DecodeRule::cheng_first_zero};

inline std::string_view to_token(DecodeRule rule) {
    switch (rule) {
        case DecodeRule::round_soft_argmax: return "round_soft_argmax";
        case DecodeRule::argmax: return "argmax";
        case DecodeRule::cheng_first_zero: return "cheng_first_zero";
        case DecodeRule::conditional_risk: return "conditional_risk";
    }
    return "?";
}

inline DecodeRule parse_decode_rule(std::string_view token) {
    for (auto rule : kAllDecodeRules) {
        if (to_token(rule) == token) return rule;
    }
    throw ConfigError("unknown decode rule '" + std::string(token) +
                      "' (expected round_soft_argmax|argmax|cheng_first_zero|conditional_risk)");
}

/// Nearest integer with halves rounded up, clamped to [0, k-1].
inline int round_to_class(double score, int k) {
    if (!std::isfinite(score)) throw InputError("non-finite score");
    const double r = std::floor(score + 0.5);
    if (r <= 0.0) return 0;
    if (r >= static_cast<double>(k - 1)) return k - 1;
    return static_cast<int>(r);
}

inline int round_soft_argmax(std::span<const double> f, const AnchorVector& a) {
    return round_to_class(soft_argmax(f, a), static_cast<int>(f.size()));
}

/// Lowest index attaining the maximum.
inline int argmax_decode(std::span<const double> f) {
    if (f.empty()) throw ShapeError("empty distribution");
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        if (f[i] > f[best]) best = i;
    }
    return static_cast<int>(best);
}

/// Threshold each output at >= 0.5 and return the index of the first zero bit,
/// or k-1 (the code length) when every bit is set.
inline int cheng_decode(std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(g[i] >= 0.5)) return static_cast<int>(i);
    }
    return static_cast<int>(g.size());
}

/// risk(j) = sum_i f_i W_ij.
inline std::vector<double> conditional_risks(std::span<const double> f, const WeightMatrix& w) {
    if (w.k() != f.size()) throw ShapeError("weight matrix and distribution sizes differ");
    std::vector<double> risk(f.size(), 0.0);
    for (std::size_t j = 0; j < f.size(); ++j) {
        for (std::size_t i = 0; i < f.size(); ++i) risk[j] += f[i] * w(i, j);
    }
    return risk;
}

/// Minimum-expected-cost class; ties go to the lower class.
inline int conditional_risk_decode(std::span<const double> f, const WeightMatrix& w) {
    const auto risk = conditional_risks(f, w);
    std::size_t best = 0;
    for (std::size_t j = 1; j < risk.size(); ++j) {
        if (risk[j] < risk[best]) best = j;
    }
    return static_cast<int>(best);
}

inline bool rule_fits_head(DecodeRule rule, LossKind head) {
    return (rule == DecodeRule::cheng_first_zero) == !is_softmax_head(head);
}

inline DecodeRule default_decode_rule(LossKind head) {
    switch (head) {
        case LossKind::cross_entropy:
        case LossKind::qwk: return DecodeRule::argmax;
        case LossKind::cheng: return DecodeRule::cheng_first_zero;
        default: return DecodeRule::round_soft_argmax;
    }
}

/// Decode one head output row. For round_soft_argmax the score is the head's
/// own continuous prediction (learned anchors, sigmoid squashing).
inline int decode_row(DecodeRule rule, LossKind head, std::span<const double> row, const AnchorVector& a,
                      const WeightMatrix& w) {
    if (!rule_fits_head(rule, head)) {
        throw ConfigError("decode rule " + std::string(to_token(rule)) + " does not apply to the " +
                          std::string(to_token(head)) + " head");
    }
    switch (rule) {
        case DecodeRule::round_soft_argmax:
            return round_to_class(head_score(head, row, a), static_cast<int>(row.size()));
        case DecodeRule::argmax: return argmax_decode(row);
        case DecodeRule::cheng_first_zero: return cheng_decode(row);
        case DecodeRule::conditional_risk: return conditional_risk_decode(row, w);
    }
    return 0;
}

}  // namespace ordinal

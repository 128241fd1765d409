// Quadratic weighted kappa through the observed/expected/weight matrices,
// and the kappa fraction as a differentiable training loss.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordinal/error.hpp"
#include "ordinal/tensor.hpp"

namespace ordinal {

enum class WeightKind { quadratic, discrete };

inline std::string_view to_token(WeightKind kind) {
    return kind == WeightKind::quadratic ? "quadratic" : "discrete";
}

inline WeightKind parse_weight_kind(std::string_view token) {
    if (token == "quadratic") return WeightKind::quadratic;
    if (token == "discrete") return WeightKind::discrete;
    throw ConfigError("unknown weight kind '" + std::string(token) + "'");
}

/// Symmetric k x k misclassification cost with zero diagonal.
struct WeightMatrix {
    Tensor values;
    WeightKind kind = WeightKind::quadratic;

    std::size_t k() const { return values.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
};

inline WeightMatrix weight_matrix(int k, WeightKind kind) {
    if (k < 2) throw ConfigError("weight matrix needs k >= 2, got " + std::to_string(k));
    const auto n = static_cast<std::size_t>(k);
    WeightMatrix w{Tensor::matrix(n, n), kind};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            w.values(i, j) = kind == WeightKind::quadratic ? d * d : (i == j ? 0.0 : 1.0);
        }
    }
    return w;
}

/// n x k one-hot rows.
inline Tensor one_hot(std::span<const int> labels, int k) {
    Tensor y = Tensor::matrix(labels.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] < 0 || labels[r] >= k) {
            throw LabelError("label " + std::to_string(labels[r]) + " outside [0, " + std::to_string(k - 1) + "]");
        }
        y(r, static_cast<std::size_t>(labels[r])) = 1.0;
    }
    return y;
}

namespace detail {

inline void check_ratings(const Tensor& y, const Tensor& p) {
    if (y.rank() != 2 || p.rank() != 2) throw ShapeError("rating matrices must be n x k");
    require_same_shape(y, p, "label/prediction matrices");
    if (y.rows() == 0) throw DomainError("kappa is undefined for zero examples");
    if (!y.all_finite() || !p.all_finite()) throw InputError("rating matrices contain non-finite values");
}

inline std::vector<double> column_sums(const Tensor& m) {
    std::vector<double> sums(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t j = 0; j < sums.size(); ++j) sums[j] += row[j];
    }
    return sums;
}

inline void check_weights(const WeightMatrix& w, std::size_t k) {
    if (w.values.rank() != 2 || w.values.rows() != k || w.values.cols() != k) {
        throw ShapeError("weight matrix is not " + std::to_string(k) + " x " + std::to_string(k));
    }
}

}  // namespace detail

/// O = Y^T P.
inline Tensor observed_matrix(const Tensor& y, const Tensor& p) {
    detail::check_ratings(y, p);
    const std::size_t k = y.cols();
    Tensor o = Tensor::matrix(k, k);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        auto yr = y.row(r);
        auto pr = p.row(r);
        for (std::size_t i = 0; i < k; ++i) {
            if (yr[i] == 0.0) continue;
            for (std::size_t j = 0; j < k; ++j) o(i, j) += yr[i] * pr[j];
        }
    }
    return o;
}

/// colsum(Y) (outer) colsum(P), rescaled so its total equals sum(O).
inline Tensor expected_matrix(const Tensor& y, const Tensor& p) {
    detail::check_ratings(y, p);
    const std::size_t k = y.cols();
    const auto ysum = detail::column_sums(y);
    const auto psum = detail::column_sums(p);
    const double total = observed_matrix(y, p).sum();
    if (!(total > 0.0)) throw DomainError("observed matrix has zero total mass");
    Tensor e = Tensor::matrix(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) e(i, j) = ysum[i] * psum[j] / total;
    }
    return e;
}

struct RatingMatrices {
    Tensor observed;
    Tensor expected;
};

inline RatingMatrices rating_matrices(const Tensor& y, const Tensor& p) {
    return {observed_matrix(y, p), expected_matrix(y, p)};
}

inline double weighted_sum(const WeightMatrix& w, const Tensor& m) {
    detail::check_weights(w, m.rows());
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) acc += w.values[i] * m[i];
    return acc;
}

/// 1 - sum(W o O) / sum(W o E). A zero denominator with a zero numerator is
/// complete agreement (1); with a positive numerator it is a DomainError.
inline double kappa(const Tensor& y, const Tensor& p, const WeightMatrix& w) {
    const Tensor o = observed_matrix(y, p);
    detail::check_weights(w, o.rows());
    const double total = o.sum();
    if (!(total > 0.0)) throw DomainError("observed matrix has zero total mass");
    // sum(W o E) with the normalisation applied once, after the weighted sum
    const auto ysum = detail::column_sums(y);
    const auto psum = detail::column_sums(p);
    double den = 0.0;
    for (std::size_t i = 0; i < w.k(); ++i) {
        for (std::size_t j = 0; j < w.k(); ++j) den += w(i, j) * ysum[i] * psum[j];
    }
    den /= total;
    const double num = weighted_sum(w, o);
    if (den <= 0.0) {
        if (num <= 0.0) return 1.0;
        throw DomainError("kappa denominator is zero while disagreement is positive");
    }
    return 1.0 - num / den;
}

/// Kappa between two hard raters.
inline double kappa(std::span<const int> labels, std::span<const int> predictions, const WeightMatrix& w) {
    if (labels.size() != predictions.size()) throw ShapeError("label and prediction counts differ");
    const int k = static_cast<int>(w.k());
    return kappa(one_hot(labels, k), one_hot(predictions, k), w);
}

struct SurrogateLoss {
    double value = 0.0;
    Tensor grad;  // d value / dP, n x k
};

/// sum(W o O) / sum(W o E) on a batch of soft predictions, with its gradient
/// with respect to P. Returns nullopt when the batch is degenerate (fewer than
/// two examples, fewer than two distinct labels, or a zero denominator).
inline std::optional<SurrogateLoss> qwk_surrogate_loss(const Tensor& y, const Tensor& p, const WeightMatrix& w) {
    detail::check_ratings(y, p);
    const std::size_t n = y.rows();
    const std::size_t k = y.cols();
    detail::check_weights(w, k);
    if (n < 2) return std::nullopt;

    const auto ysum = detail::column_sums(y);
    const auto psum = detail::column_sums(p);
    std::size_t present = 0;
    for (double c : ysum) present += c > 0.0 ? 1 : 0;
    if (present < 2) return std::nullopt;

    double total = 0.0;
    for (double c : psum) total += c;
    if (!(total > 0.0)) return std::nullopt;

    // Row-label cost of predicting j, and the label-marginal cost of predicting j.
    std::vector<double> marginal_cost(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < k; ++i) marginal_cost[j] += w(i, j) * ysum[i];
    }

    double num = 0.0;
    std::vector<double> row_cost(n * k, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        auto yr = y.row(r);
        auto pr = p.row(r);
        for (std::size_t j = 0; j < k; ++j) {
            double c = 0.0;
            for (std::size_t i = 0; i < k; ++i) c += yr[i] * w(i, j);
            row_cost[r * k + j] = c;
            num += c * pr[j];
        }
    }
    double den = 0.0;
    for (std::size_t j = 0; j < k; ++j) den += marginal_cost[j] * psum[j];
    den /= total;
    if (!(den > 0.0)) return std::nullopt;

    SurrogateLoss out{num / den, Tensor::matrix(n, k)};
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
            const double d_den = (marginal_cost[j] - den) / total;
            out.grad(r, j) = (row_cost[r * k + j] * den - num * d_den) / (den * den);
        }
    }
    return out;
}

}  // namespace ordinal

// Shape-tagged dense array of doubles, row-major.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ordinal/error.hpp"

namespace ordinal {

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (element_count(shape_) != data_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string());
        }
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }

    static Tensor vector(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor({n}, std::move(values));
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("ragged rows in tensor literal");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(data));
    }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const {
        require_matrix();
        return shape_[0];
    }
    std::size_t cols() const {
        require_matrix();
        return shape_[1];
    }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> row(std::size_t r) {
        require_matrix();
        return {data_.data() + r * shape_[1], shape_[1]};
    }
    std::span<const double> row(std::size_t r) const {
        require_matrix();
        return {data_.data() + r * shape_[1], shape_[1]};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    double sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
    }

    void require_matrix() const {
        if (shape_.size() != 2) throw ShapeError("expected a matrix, got shape " + shape_string());
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
    }
}

/// Rows of `source` selected by `indices`, in that order.
inline Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices) {
    const std::size_t cols = source.cols();
    Tensor out = Tensor::matrix(indices.size(), cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = source.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace ordinal

// Synthetic ordinal datasets, CSV ingestion, and stratified splits.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "ordinal/error.hpp"
#include "ordinal/tensor.hpp"

namespace ordinal {

struct Dataset {
    Tensor features;  // n x d
    std::vector<int> labels;
    int k = 2;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const { return features.cols(); }

    void validate() const {
        if (k < 2) throw ConfigError("dataset needs k >= 2");
        if (labels.empty()) throw InputError("dataset is empty");
        if (features.rank() != 2 || features.rows() != labels.size()) {
            throw ShapeError("feature rows do not match label count");
        }
        if (!features.all_finite()) throw InputError("dataset features contain non-finite values");
        for (int c : labels) {
            if (c < 0 || c >= k) throw LabelError("label " + std::to_string(c) + " outside [0, k-1]");
        }
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (int c : labels) ++counts[static_cast<std::size_t>(c)];
        return counts;
    }
};

/// Class shares of the five-grade retinopathy training labels
/// (25810, 2443, 5292, 873, 708 of 35126).
inline std::vector<double> retinopathy_proportions() {
    constexpr double counts[] = {25810.0, 2443.0, 5292.0, 873.0, 708.0};
    constexpr double total = 35126.0;
    std::vector<double> p;
    for (double c : counts) p.push_back(c / total);
    return p;
}

struct GeneratorSpec {
    std::size_t n = 3000;
    std::size_t d = 8;
    int k = 5;
    std::uint64_t seed = 2016;
    std::vector<double> class_proportions = retinopathy_proportions();
    double latent_noise_sd = 0.75;
    /// Per-feature noise sd, as a multiple of latent_noise_sd.
    double feature_noise_scale = 0.5;
    double label_noise_rate = 0.05;

    void validate() const {
        if (k < 2) throw ConfigError("k must be at least 2");
        if (n == 0 || d == 0) throw ConfigError("n and d must be positive");
        if (class_proportions.size() != static_cast<std::size_t>(k)) {
            throw ConfigError("need one class proportion per class");
        }
        double total = 0.0;
        for (double p : class_proportions) {
            if (!(p >= 0.0)) throw ConfigError("class proportions must be nonnegative");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class proportions must sum to 1");
        if (!(latent_noise_sd > 0.0) || !std::isfinite(latent_noise_sd)) {
            throw ConfigError("latent_noise_sd must be positive");
        }
        if (!(feature_noise_scale >= 0.0)) throw ConfigError("feature_noise_scale must be nonnegative");
        if (!(label_noise_rate >= 0.0 && label_noise_rate < 1.0)) {
            throw ConfigError("label_noise_rate must lie in [0, 1)");
        }
    }
};

/// Hamilton apportionment: floor(n p_c), then one extra to the largest
/// remainders (ties to the lower class).
inline std::vector<std::size_t> largest_remainder_counts(std::size_t n, const std::vector<double>& proportions) {
    std::vector<std::size_t> counts(proportions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < proportions.size(); ++c) {
        const double exact = static_cast<double>(n) * proportions[c];
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[c];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n && i < remainders.size(); ++i, ++assigned) ++counts[remainders[i].second];
    return counts;
}

/// Latent score t = c + N(0, latent_sd) per example, mapped into d features
/// along a fixed random unit direction plus per-feature noise. Rows are shuffled, then
/// labels are moved to an adjacent class with probability label_noise_rate.
inline Dataset generate(const GeneratorSpec& spec) {
    spec.validate();
    const auto counts = largest_remainder_counts(spec.n, spec.class_proportions);
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            throw GenerationError("class " + std::to_string(c) + " receives no examples at n = " +
                                  std::to_string(spec.n));
        }
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> direction(spec.d);
    double norm = 0.0;
    while (!(norm > 0.0)) {
        norm = 0.0;
        for (auto& w : direction) {
            w = normal(rng);
            norm += w * w;
        }
    }
    norm = std::sqrt(norm);
    for (auto& w : direction) w /= norm;

    std::vector<int> clean;
    clean.reserve(spec.n);
    for (std::size_t c = 0; c < counts.size(); ++c) clean.insert(clean.end(), counts[c], static_cast<int>(c));
    std::shuffle(clean.begin(), clean.end(), rng);

    Dataset ds{Tensor::matrix(spec.n, spec.d), std::vector<int>(spec.n), spec.k};
    const double feature_sd = spec.latent_noise_sd * spec.feature_noise_scale;
    for (std::size_t r = 0; r < spec.n; ++r) {
        const double t = static_cast<double>(clean[r]) + spec.latent_noise_sd * normal(rng);
        auto x = ds.features.row(r);
        for (std::size_t j = 0; j < spec.d; ++j) x[j] = t * direction[j] + feature_sd * normal(rng);
    }
    for (std::size_t r = 0; r < spec.n; ++r) {
        int c = clean[r];
        if (unit(rng) < spec.label_noise_rate) {
            if (c == 0) {
                c = 1;
            } else if (c == spec.k - 1) {
                c = spec.k - 2;
            } else {
                c += unit(rng) < 0.5 ? -1 : 1;
            }
        }
        ds.labels[r] = c;
    }
    return ds;
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    for (auto& c : cells) {
        while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
        while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) c.remove_suffix(1);
    }
    return cells;
}

inline bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc{} && ptr == cell.data() + cell.size() && std::isfinite(out);
}

inline bool parse_int(std::string_view cell, int& out) {
    if (cell.empty()) return false;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc{} && ptr == cell.data() + cell.size();
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Reads a header row plus comma-separated records. The `label` column holds
/// integer classes; every other column becomes a feature, in header order.
/// When `k` is 0 it is inferred as max(label) + 1 (at least 2).
inline Dataset load_csv(const std::string& path, int k = 0) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header;
    for (auto cell : detail::split_commas(line)) header.emplace_back(cell);
    std::size_t label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "label") label_col = i;
    }
    if (label_col == header.size()) throw ParseError(path + ": no 'label' column in header");
    const std::size_t d = header.size() - 1;

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_commas(line);
        if (cells.size() != header.size()) {
            throw ParseError(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(header.size()));
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_col) {
                int c = 0;
                if (!detail::parse_int(cells[i], c)) {
                    throw ParseError(path + ": row " + std::to_string(row) + ", column 'label': not an integer");
                }
                if (c < 0 || (k > 0 && c >= k)) {
                    throw ParseError(path + ": row " + std::to_string(row) + ", column 'label': " +
                                     std::to_string(c) + " outside [0, " + std::to_string(k - 1) + "]");
                }
                labels.push_back(c);
            } else {
                double v = 0.0;
                if (!detail::parse_double(cells[i], v)) {
                    throw ParseError(path + ": row " + std::to_string(row) + ", column '" + std::string(header[i]) +
                                     "': not a finite number");
                }
                values.push_back(v);
            }
        }
    }
    if (labels.empty()) throw ParseError(path + ": no data rows");
    if (k <= 0) k = std::max(2, *std::max_element(labels.begin(), labels.end()) + 1);
    Dataset ds{Tensor({labels.size(), d}, std::move(values)), std::move(labels), k};
    ds.validate();
    return ds;
}

inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    for (std::size_t j = 0; j < ds.dim(); ++j) out << 'x' << j << ',';
    out << "label\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (double v : ds.features.row(r)) out << detail::format_double(v) << ',';
        out << ds.labels[r] << '\n';
    }
}

inline Dataset select_rows(const Dataset& ds, std::span<const std::size_t> rows) {
    Dataset out{gather_rows(ds.features, rows), {}, ds.k};
    out.labels.reserve(rows.size());
    for (auto r : rows) out.labels.push_back(ds.labels[r]);
    return out;
}

/// Stratified split: each class contributes round(count * val_fraction)
/// examples (at least one, leaving at least one) to validation. Row order
/// within each side follows the original dataset.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw SplitError("val_fraction must lie in (0, 1)");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.k));
    for (std::size_t r = 0; r < ds.size(); ++r) by_class[static_cast<std::size_t>(ds.labels[r])].push_back(r);

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> val_rows;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.size() < 2) {
            throw SplitError("class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                             " examples; stratified split needs at least 2");
        }
        std::shuffle(rows.begin(), rows.end(), rng);
        auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(rows.size()) * val_fraction));
        n_val = std::clamp<std::size_t>(n_val, 1, rows.size() - 1);
        val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    return {select_rows(ds, train_rows), select_rows(ds, val_rows)};
}

/// Per-feature z-scoring with statistics fitted on one set and applied to others.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const Tensor& features) {
        const std::size_t n = features.rows();
        const std::size_t d = features.cols();
        Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
        if (n == 0) return s;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < d; ++j) s.mean[j] += features(r, j);
        }
        for (auto& m : s.mean) m /= static_cast<double>(n);
        std::vector<double> var(d, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                const double dv = features(r, j) - s.mean[j];
                var[j] += dv * dv;
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(n));
            s.scale[j] = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    static Standardizer identity(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

    Tensor apply(const Tensor& features) const {
        if (features.cols() != mean.size()) throw ShapeError("standardizer width does not match features");
        Tensor out = features;
        for (std::size_t r = 0; r < out.rows(); ++r) {
            auto row = out.row(r);
            for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / scale[j];
        }
        return out;
    }

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

}  // namespace ordinal

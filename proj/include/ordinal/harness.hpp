// Experiment runner: seeded minibatch training under a learning-rate schedule
// with optional warm start, per-epoch validation metrics, and the probability
// diagnostics (correct-class histogram, per-class quartiles).
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ordinal/config.hpp"
#include "ordinal/data.hpp"
#include "ordinal/decode.hpp"
#include "ordinal/error.hpp"
#include "ordinal/heads.hpp"
#include "ordinal/model.hpp"
#include "ordinal/netcore.hpp"
#include "ordinal/qwk.hpp"

namespace ordinal {

inline constexpr std::size_t kRuleCount = std::size(kAllDecodeRules);

inline std::size_t rule_index(DecodeRule rule) {
    for (std::size_t i = 0; i < kRuleCount; ++i) {
        if (kAllDecodeRules[i] == rule) return i;
    }
    return 0;
}

struct Evaluation {
    DecodeRule rule = DecodeRule::argmax;
    double kappa = 0.0;  // under `rule`
    std::array<std::optional<double>, kRuleCount> kappa_by_rule;  // indexed like kAllDecodeRules
    std::optional<double> cross_entropy;  // softmax heads only
    std::vector<int> labels;
    std::vector<int> predictions;  // under `rule`
    Tensor outputs;                // head layer output per example

    std::optional<double> kappa_for(DecodeRule r) const { return kappa_by_rule[rule_index(r)]; }
};

/// Mean validation cross-entropy, hard-decoded predictions, and quadratic
/// kappa under every decode rule that applies to the model's head.
inline Evaluation evaluate(const Model& model, const Dataset& dataset, DecodeRule rule) {
    if (!rule_fits_head(rule, model.head)) {
        throw ConfigError("decode rule " + std::string(to_token(rule)) + " does not apply to the " +
                          std::string(to_token(model.head)) + " head");
    }
    dataset.validate();
    if (dataset.k != model.k) throw ConfigError("dataset k does not match the model's k");

    const auto pass = forward(model.network, model.standardizer.apply(dataset.features));
    Evaluation eval;
    eval.rule = rule;
    eval.labels = dataset.labels;
    eval.outputs = pass.output();

    const auto w = weight_matrix(model.k, WeightKind::quadratic);
    const std::size_t n = dataset.size();
    if (is_softmax_head(model.head)) {
        double ce = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double p = eval.outputs(r, static_cast<std::size_t>(dataset.labels[r]));
            ce -= std::log(p < kProbabilityFloor ? kProbabilityFloor : p);
        }
        eval.cross_entropy = ce / static_cast<double>(n);
    }
    for (auto candidate : kAllDecodeRules) {
        if (!rule_fits_head(candidate, model.head)) continue;
        std::vector<int> preds(n);
        for (std::size_t r = 0; r < n; ++r) {
            preds[r] = decode_row(candidate, model.head, eval.outputs.row(r), model.anchors, w);
        }
        const double kap = kappa(std::span<const int>(dataset.labels), std::span<const int>(preds), w);
        eval.kappa_by_rule[rule_index(candidate)] = kap;
        if (candidate == rule) {
            eval.kappa = kap;
            eval.predictions = std::move(preds);
        }
    }
    return eval;
}

// ---------------------------------------------------------------------------
// Probability diagnostics

inline constexpr std::size_t kHistogramBins = 20;

struct CorrectClassHistogram {
    std::vector<double> p_correct;    // one per example
    std::vector<std::size_t> counts;  // equal-width bins on [0, 1]; 1.0 lands in the last bin
};

inline CorrectClassHistogram correct_class_histogram(const Tensor& probs, std::span<const int> labels,
                                                     std::size_t bins = kHistogramBins) {
    if (probs.rows() != labels.size()) throw ShapeError("probability rows do not match label count");
    CorrectClassHistogram h{{}, std::vector<std::size_t>(bins, 0)};
    h.p_correct.reserve(labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= probs.cols()) throw LabelError("label out of range");
        const double p = probs(r, static_cast<std::size_t>(labels[r]));
        h.p_correct.push_back(p);
        auto bin = static_cast<std::size_t>(std::floor(p * static_cast<double>(bins)));
        h.counts[std::min(bin, bins - 1)] += 1;
    }
    return h;
}

/// Linear interpolation between order statistics of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DomainError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

struct ClassProbabilitySummary {
    int cls = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Five-number summary of p(class j | x) over all rows, for each column j.
inline std::vector<ClassProbabilitySummary> class_probability_summary(const Tensor& probs) {
    std::vector<ClassProbabilitySummary> out;
    std::vector<double> column(probs.rows());
    for (std::size_t j = 0; j < probs.cols(); ++j) {
        for (std::size_t r = 0; r < probs.rows(); ++r) column[r] = probs(r, j);
        std::sort(column.begin(), column.end());
        out.push_back({static_cast<int>(j), column.front(), quantile_sorted(column, 0.25),
                       quantile_sorted(column, 0.5), quantile_sorted(column, 0.75), column.back()});
    }
    return out;
}

namespace detail {

inline Tensor softmax_outputs(const Model& model, const Dataset& dataset) {
    if (!is_softmax_head(model.head)) {
        throw UnsupportedError("probability diagnostics need a k-wide softmax head; " +
                               std::string(to_token(model.head)) + " has none");
    }
    return forward(model.network, model.standardizer.apply(dataset.features)).output();
}

}  // namespace detail

inline CorrectClassHistogram dump_correct_class_probabilities(const Model& model, const Dataset& dataset) {
    return correct_class_histogram(detail::softmax_outputs(model, dataset), dataset.labels);
}

inline std::vector<ClassProbabilitySummary> dump_per_class_probability_summary(const Model& model,
                                                                                const Dataset& dataset) {
    return class_probability_summary(detail::softmax_outputs(model, dataset));
}

// ---------------------------------------------------------------------------
// CSV writers

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    return out;
}

inline std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace detail

inline void write_histogram_csv(const std::filesystem::path& path, const CorrectClassHistogram& h) {
    auto out = detail::open_output(path);
    out << "bin,lower,upper,count\n";
    const double width = 1.0 / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out << b << ',' << detail::format_double(static_cast<double>(b) * width) << ','
            << detail::format_double(static_cast<double>(b + 1) * width) << ',' << h.counts[b] << '\n';
    }
}

inline void write_correct_probabilities_csv(const std::filesystem::path& path, const CorrectClassHistogram& h,
                                            std::span<const int> labels) {
    auto out = detail::open_output(path);
    out << "index,label,p_correct\n";
    for (std::size_t r = 0; r < h.p_correct.size(); ++r) {
        out << r << ',' << labels[r] << ',' << detail::format_double(h.p_correct[r]) << '\n';
    }
}

inline void write_class_summary_csv(const std::filesystem::path& path,
                                    const std::vector<ClassProbabilitySummary>& rows) {
    auto out = detail::open_output(path);
    out << "class,min,q1,median,q3,max\n";
    for (const auto& s : rows) {
        out << s.cls << ',' << detail::format_double(s.min) << ',' << detail::format_double(s.q1) << ','
            << detail::format_double(s.median) << ',' << detail::format_double(s.q3) << ','
            << detail::format_double(s.max) << '\n';
    }
}

/// index,label,prediction,score,out_0..out_{w-1}; score is empty for the cheng head.
inline void write_predictions_csv(const std::filesystem::path& path, const Model& model, const Evaluation& eval) {
    auto out = detail::open_output(path);
    const std::size_t width = eval.outputs.cols();
    out << "index,label,prediction,score";
    for (std::size_t j = 0; j < width; ++j) out << ",out_" << j;
    out << '\n';
    for (std::size_t r = 0; r < eval.labels.size(); ++r) {
        out << r << ',' << eval.labels[r] << ',' << eval.predictions[r] << ',';
        if (is_softmax_head(model.head)) {
            out << detail::format_double(head_score(model.head, eval.outputs.row(r), model.anchors));
        }
        for (double v : eval.outputs.row(r)) out << ',' << detail::format_double(v);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Training

struct EpochMetrics {
    int epoch = 0;  // 0 is the evaluation before any update
    LossKind loss = LossKind::fix_a;
    double learning_rate = 0.0;
    std::optional<double> train_loss;
    std::size_t skipped_batches = 0;
    std::optional<double> val_cross_entropy;
    double val_qwk = 0.0;
    std::array<std::optional<double>, kRuleCount> val_qwk_by_rule;
    double wall_seconds = 0.0;
};

/// Everything except wall-clock time, so identical runs give identical bytes.
inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& history) {
    auto out = detail::open_output(path);
    out << "epoch,loss,learning_rate,train_loss,skipped_batches,val_cross_entropy,val_qwk";
    for (auto rule : kAllDecodeRules) out << ",val_qwk_" << to_token(rule);
    out << '\n';
    for (const auto& m : history) {
        out << m.epoch << ',' << to_token(m.loss) << ',' << detail::format_double(m.learning_rate) << ','
            << detail::optional_cell(m.train_loss) << ',' << m.skipped_batches << ','
            << detail::optional_cell(m.val_cross_entropy) << ',' << detail::format_double(m.val_qwk);
        for (const auto& k : m.val_qwk_by_rule) out << ',' << detail::optional_cell(k);
        out << '\n';
    }
}

inline void write_timing_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& history) {
    auto out = detail::open_output(path);
    out << "epoch,wall_seconds\n";
    for (const auto& m : history) out << m.epoch << ',' << detail::format_double(m.wall_seconds) << '\n';
}

struct RunResult {
    std::vector<EpochMetrics> history;
    Model model;
    Evaluation final_evaluation;
    Dataset train;
    Dataset validation;
};

inline Dataset load_experiment_data(const ExperimentConfig& cfg) {
    return cfg.data_path.empty() ? generate(cfg.generator) : load_csv(cfg.data_path, cfg.generator.k);
}

/// Trains one configuration. Writes the run directory when cfg.output_dir is set.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto schedule = resolved_schedule(cfg);
    const DecodeRule rule = resolved_decode_rule(cfg);
    const auto started = std::chrono::steady_clock::now();

    const Dataset full = load_experiment_data(cfg);
    auto [train, val] = split(full, cfg.val_fraction, cfg.generator.seed);

    Model model = make_model(cfg.loss, full.k, full.dim(), cfg.hidden, cfg.seed);
    model.standardizer = Standardizer::fit(train.features);
    const Tensor train_x = model.standardizer.apply(train.features);

    OptimizerState state = OptimizerState::zeros_like(model.network, schedule.front().learning_rate, cfg.momentum);
    std::vector<double> anchor_velocity(model.anchors.size(), 0.0);
    std::seed_seq shuffle_seed{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                               0x5eedu};
    std::mt19937_64 shuffle_rng(shuffle_seed);

    auto loss_at = [&](int epoch) {
        return cfg.warm_start && epoch < cfg.warm_start->epochs ? cfg.warm_start->loss : cfg.loss;
    };
    auto record = [&](int epoch, LossKind loss, double lr, std::optional<double> train_loss, std::size_t skipped) {
        Evaluation eval = evaluate(model, val, rule);
        EpochMetrics m;
        m.epoch = epoch;
        m.loss = loss;
        m.learning_rate = lr;
        m.train_loss = train_loss;
        m.skipped_batches = skipped;
        m.val_cross_entropy = eval.cross_entropy;
        m.val_qwk = eval.kappa;
        m.val_qwk_by_rule = eval.kappa_by_rule;
        m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return std::pair{m, std::move(eval)};
    };

    RunResult result;
    auto [initial, initial_eval] = record(0, loss_at(0), schedule.front().learning_rate, std::nullopt, 0);
    result.history.push_back(initial);
    Evaluation latest = std::move(initial_eval);

    std::vector<std::size_t> order(train.size());
    std::vector<int> batch_labels;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const LossKind loss = loss_at(epoch);
        state.learning_rate = learning_rate_at(schedule, epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t loss_rows = 0;
        std::size_t skipped = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            batch_labels.clear();
            for (auto r : rows) batch_labels.push_back(train.labels[r]);

            const auto pass = forward(model.network, gather_rows(train_x, rows));
            const HeadLoss hl = head_loss(loss, pass.output(), batch_labels, model.anchors);
            if (hl.skipped) {
                ++skipped;
                continue;
            }
            loss_sum += hl.value * static_cast<double>(rows.size());
            loss_rows += rows.size();

            const Gradients grads = backward(model.network, pass, hl.output_grad);
            std::tie(model.network, state) = sgd_nesterov_step(std::move(model.network), grads, std::move(state));
            if (has_learnable_anchors(loss) && model.anchors.learnable) {
                nesterov_update(model.anchors.values, hl.anchor_grad, anchor_velocity, state.learning_rate,
                                state.momentum);
            }
        }
        std::optional<double> train_loss;
        if (loss_rows > 0) train_loss = loss_sum / static_cast<double>(loss_rows);
        auto [m, eval] = record(epoch + 1, loss, state.learning_rate, train_loss, skipped);
        result.history.push_back(m);
        latest = std::move(eval);
    }

    result.model = std::move(model);
    result.final_evaluation = std::move(latest);
    result.train = std::move(train);
    result.validation = std::move(val);

    if (!cfg.output_dir.empty()) {
        const std::filesystem::path dir(cfg.output_dir);
        std::filesystem::create_directories(dir);
        write_metrics_csv(dir / "metrics.csv", result.history);
        write_timing_csv(dir / "timing.csv", result.history);
        write_predictions_csv(dir / "predictions.csv", result.model, result.final_evaluation);
        if (is_softmax_head(result.model.head)) {
            const auto hist = dump_correct_class_probabilities(result.model, result.validation);
            write_histogram_csv(dir / "hist_correct_prob.csv", hist);
            write_correct_probabilities_csv(dir / "correct_prob.csv", hist, result.validation.labels);
            write_class_summary_csv(dir / "class_prob_summary.csv",
                                    dump_per_class_probability_summary(result.model, result.validation));
        }
        auto snapshot = detail::open_output(dir / "config.snapshot");
        snapshot << to_snapshot(cfg);
        save_model(result.model, (dir / "params.bin").string());
    }
    return result;
}

}  // namespace ordinal

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ordinal/harness.hpp"

using namespace ordinal;

namespace {

ExperimentConfig quick_config(LossKind loss) {
    ExperimentConfig cfg;
    cfg.loss = loss;
    cfg.generator.n = 600;
    cfg.generator.d = 4;
    cfg.generator.class_proportions = {0.4, 0.2, 0.2, 0.1, 0.1};
    cfg.hidden = {8};
    cfg.epochs = 6;
    cfg.batch_size = 64;
    return cfg;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::path(testing::TempDir()) / name;
    std::filesystem::remove_all(dir);
    return dir;
}

// Zero weights: every row gets softmax(bias).
Model constant_model(LossKind head, int k, std::size_t d, std::vector<double> bias) {
    Model m = make_model(head, k, d, {}, 1);
    m.network.layers[0].weight.fill(0.0);
    m.network.layers[0].bias = Tensor::vector(std::move(bias));
    m.standardizer = Standardizer::identity(d);
    return m;
}

Dataset small_dataset(int k, std::size_t n) {
    Dataset ds{Tensor::matrix(n, 2), std::vector<int>(n), k};
    for (std::size_t r = 0; r < n; ++r) {
        ds.labels[r] = static_cast<int>(r % static_cast<std::size_t>(k));
        ds.features(r, 0) = static_cast<double>(r);
        ds.features(r, 1) = -static_cast<double>(r);
    }
    return ds;
}

}  // namespace

TEST(Evaluate, PerfectPredictorHasKappaOne) {
    // Identity-like logits: bias-free linear layer reading a one-hot feature block.
    const int k = 4;
    Dataset ds{Tensor::matrix(8, 4), std::vector<int>(8), k};
    for (std::size_t r = 0; r < 8; ++r) {
        ds.labels[r] = static_cast<int>(r % 4);
        ds.features(r, r % 4) = 1.0;
    }
    Model m = make_model(LossKind::cross_entropy, k, 4, {}, 1);
    m.network.layers[0].weight.fill(0.0);
    for (std::size_t j = 0; j < 4; ++j) m.network.layers[0].weight(j, j) = 50.0;
    m.standardizer = Standardizer::identity(4);
    for (auto rule : {DecodeRule::argmax, DecodeRule::round_soft_argmax, DecodeRule::conditional_risk}) {
        EXPECT_EQ(evaluate(m, ds, rule).kappa, 1.0) << to_token(rule);
    }
}

TEST(Evaluate, ConstantPredictorHasNoAgreement) {
    const auto ds = small_dataset(5, 20);
    const auto m = constant_model(LossKind::cross_entropy, 5, 2, {3, 0, 0, 0, 0});
    const auto eval = evaluate(m, ds, DecodeRule::argmax);
    EXPECT_LE(eval.kappa, 1e-9);
    EXPECT_NEAR(eval.kappa, oracle::quadratic_kappa_hard(ds.labels, eval.predictions), 1e-12);
}

TEST(Evaluate, ChengHeadHasNoCrossEntropy) {
    const auto ds = small_dataset(3, 9);
    const auto m = make_model(LossKind::cheng, 3, 2, {3}, 2);
    const auto eval = evaluate(m, ds, DecodeRule::cheng_first_zero);
    EXPECT_FALSE(eval.cross_entropy.has_value());
    EXPECT_FALSE(eval.kappa_for(DecodeRule::argmax).has_value());
    EXPECT_THROW(evaluate(m, ds, DecodeRule::argmax), ConfigError);
    EXPECT_THROW(dump_correct_class_probabilities(m, ds), UnsupportedError);
    EXPECT_THROW(dump_per_class_probability_summary(m, ds), UnsupportedError);
}

TEST(Diagnostics, UniformPredictor) {
    const auto ds = small_dataset(5, 23);
    const auto m = constant_model(LossKind::fix_a, 5, 2, std::vector<double>(5, 0.0));
    const auto hist = dump_correct_class_probabilities(m, ds);
    for (double p : hist.p_correct) EXPECT_EQ(p, 0.2);
    EXPECT_EQ(hist.counts[4], 23u);  // 0.2 opens bin [0.20, 0.25)
    for (const auto& s : dump_per_class_probability_summary(m, ds)) {
        for (double v : {s.min, s.q1, s.median, s.q3, s.max}) EXPECT_EQ(v, 0.2);
    }
}

TEST(Diagnostics, AlwaysClassZeroPredictor) {
    const auto ds = small_dataset(4, 12);
    const auto m = constant_model(LossKind::cross_entropy, 4, 2, {1000, 0, 0, 0});
    const auto summary = dump_per_class_probability_summary(m, ds);
    for (const auto& s : summary) {
        const double v = s.cls == 0 ? 1.0 : 0.0;
        for (double q : {s.min, s.q1, s.median, s.q3, s.max}) EXPECT_EQ(q, v);
    }
    const auto hist = dump_correct_class_probabilities(m, ds);
    EXPECT_EQ(hist.counts.back(), 3u);  // label 0 rows at p = 1
    EXPECT_EQ(hist.counts.front(), 9u);
}

TEST(Diagnostics, QuantilesAndHistogramSums) {
    const std::vector<double> sorted{1, 2, 3, 4};
    EXPECT_EQ(quantile_sorted(sorted, 0.0), 1.0);
    EXPECT_EQ(quantile_sorted(sorted, 0.5), 2.5);
    EXPECT_EQ(quantile_sorted(sorted, 0.25), 1.75);
    EXPECT_EQ(quantile_sorted(sorted, 1.0), 4.0);

    const auto run = run_experiment(quick_config(LossKind::fix_a));
    const auto hist = dump_correct_class_probabilities(run.model, run.validation);
    std::size_t total = 0;
    for (auto c : hist.counts) total += c;
    EXPECT_EQ(total, run.validation.size());
    for (const auto& s : dump_per_class_probability_summary(run.model, run.validation)) {
        EXPECT_LE(s.min, s.q1);
        EXPECT_LE(s.q1, s.median);
        EXPECT_LE(s.median, s.q3);
        EXPECT_LE(s.q3, s.max);
    }
}

TEST(RunExperiment, ZeroEpochsOnlyEvaluates) {
    auto cfg = quick_config(LossKind::cross_entropy);
    cfg.epochs = 0;
    const auto run = run_experiment(cfg);
    ASSERT_EQ(run.history.size(), 1u);
    EXPECT_FALSE(run.history[0].train_loss.has_value());
    EXPECT_EQ(run.model.network, make_model(cfg.loss, 5, 4, cfg.hidden, cfg.seed).network);
}

TEST(RunExperiment, WritesRunDirectory) {
    auto cfg = quick_config(LossKind::learn_a);
    const auto dir = fresh_dir("run_learn_a");
    cfg.output_dir = dir.string();
    const auto run = run_experiment(cfg);
    for (const char* f : {"metrics.csv", "timing.csv", "predictions.csv", "hist_correct_prob.csv", "correct_prob.csv",
                          "class_prob_summary.csv", "config.snapshot", "params.bin"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    }
    const auto metrics = read_file(dir / "metrics.csv");
    EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), cfg.epochs + 2);  // header + epochs + 1
    EXPECT_EQ(load_model((dir / "params.bin").string()), run.model);
    EXPECT_EQ(load_config((dir / "config.snapshot").string()).loss, LossKind::learn_a);

    // Reloaded parameters reproduce the final validation result.
    const auto eval = evaluate(load_model((dir / "params.bin").string()), run.validation, DecodeRule::round_soft_argmax);
    EXPECT_EQ(eval.kappa, run.final_evaluation.kappa);
    EXPECT_EQ(eval.predictions, run.final_evaluation.predictions);
}

TEST(RunExperiment, ChengRunSkipsProbabilityDumps) {
    auto cfg = quick_config(LossKind::cheng);
    const auto dir = fresh_dir("run_cheng");
    cfg.output_dir = dir.string();
    run_experiment(cfg);
    EXPECT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
    EXPECT_FALSE(std::filesystem::exists(dir / "hist_correct_prob.csv"));
}

TEST(RunExperiment, Deterministic) {
    for (auto loss : {LossKind::fix_a, LossKind::cheng, LossKind::learn_a_sigm}) {
        auto cfg = quick_config(loss);
        const auto a = fresh_dir("det_a");
        const auto b = fresh_dir("det_b");
        cfg.output_dir = a.string();
        run_experiment(cfg);
        cfg.output_dir = b.string();
        run_experiment(cfg);
        EXPECT_EQ(read_file(a / "metrics.csv"), read_file(b / "metrics.csv")) << to_token(loss);
        EXPECT_EQ(read_file(a / "params.bin"), read_file(b / "params.bin")) << to_token(loss);
    }
    auto cfg = quick_config(LossKind::fix_a);
    const auto base = run_experiment(cfg);
    cfg.seed = 2;
    EXPECT_NE(run_experiment(cfg).model.network, base.model.network);
}

TEST(RunExperiment, WarmStartPrefixMatchesPureRun) {
    auto pure = quick_config(LossKind::cross_entropy);
    pure.epochs = 8;
    auto warm = pure;
    warm.loss = LossKind::qwk;
    warm.warm_start = WarmStart{LossKind::cross_entropy, 5};
    const auto a = run_experiment(pure);
    const auto b = run_experiment(warm);
    for (int e = 0; e <= 5; ++e) {
        EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss) << e;
        EXPECT_EQ(a.history[e].val_cross_entropy, b.history[e].val_cross_entropy) << e;
        EXPECT_EQ(a.history[e].val_qwk, b.history[e].val_qwk) << e;
    }
    EXPECT_EQ(b.history[5].loss, LossKind::cross_entropy);
    EXPECT_EQ(b.history[6].loss, LossKind::qwk);
    EXPECT_NE(a.history[6].train_loss, b.history[6].train_loss);
}

TEST(RunExperiment, FixATrainingImprovesKappa) {
    auto cfg = quick_config(LossKind::fix_a);
    cfg.epochs = 15;
    const auto run = run_experiment(cfg);
    EXPECT_GT(run.final_evaluation.kappa, run.history.front().val_qwk + 0.3);
}

TEST(RunExperiment, LoadsCsvData) {
    auto cfg = quick_config(LossKind::cross_entropy);
    const auto path = (std::filesystem::path(testing::TempDir()) / "train.csv").string();
    save_csv(generate(cfg.generator), path);
    const auto generated = run_experiment(cfg);
    cfg.data_path = path;
    const auto loaded = run_experiment(cfg);
    EXPECT_EQ(generated.model, loaded.model);
}

TEST(RunExperiment, RejectsIncompatibleWarmStart) {
    auto cfg = quick_config(LossKind::cheng);
    cfg.warm_start = WarmStart{LossKind::cross_entropy, 2};
    EXPECT_THROW(run_experiment(cfg), ConfigError);
}

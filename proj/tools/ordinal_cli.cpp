// ordinal: command-line front end for data generation, training, evaluation,
// gradient checking and kappa scoring.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ordinal/ordinal.hpp"

namespace {

using namespace ordinal;

const std::vector<std::string> kGeneratorKeys = {"n",           "d", "k", "data_seed", "proportions", "latent_noise_sd",
                                                 "feature_noise_scale", "label_noise_rate"};

// One string option per key; only keys given on the command line are applied.
void add_key_options(CLI::App& cmd, const std::vector<std::string>& keys, std::map<std::string, std::string>& values) {
    for (const auto& key : keys) cmd.add_option("--" + key, values[key], "config key '" + key + "'");
}

void apply_given(ExperimentConfig& cfg, CLI::App& cmd, const std::vector<std::string>& keys,
                 const std::map<std::string, std::string>& values) {
    for (const auto& key : keys) {
        if (cmd.count("--" + key) > 0) apply_setting(cfg, key, values.at(key));
    }
}

void print_kv(const char* key, double v) { std::printf("%s=%.6f\n", key, v); }

void print_evaluation(const Evaluation& eval) {
    std::printf("decode_rule=%s\n", std::string(to_token(eval.rule)).c_str());
    print_kv("kappa", eval.kappa);
    for (auto rule : kAllDecodeRules) {
        if (auto k = eval.kappa_for(rule)) {
            std::printf("kappa_%s=%.6f\n", std::string(to_token(rule)).c_str(), *k);
        }
    }
    if (eval.cross_entropy) print_kv("cross_entropy", *eval.cross_entropy);
}

int cmd_generate(const GeneratorSpec& spec, const std::string& out) {
    const Dataset ds = generate(spec);
    save_csv(ds, out);
    std::printf("wrote %zu rows (d=%zu, k=%d) to %s\n", ds.size(), ds.dim(), ds.k, out.c_str());
    const auto counts = ds.class_counts();
    std::printf("class_counts=");
    for (std::size_t c = 0; c < counts.size(); ++c) std::printf(c ? ",%zu" : "%zu", counts[c]);
    std::printf("\n");
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    const RunResult r = run_experiment(cfg);
    std::printf("loss=%s epochs=%d seed=%llu\n", std::string(to_token(cfg.loss)).c_str(), cfg.epochs,
                static_cast<unsigned long long>(cfg.seed));
    print_evaluation(r.final_evaluation);
    if (!cfg.output_dir.empty()) std::printf("output_dir=%s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_evaluate(const std::string& params, const std::string& data, const std::string& rule_token,
                 const std::string& out) {
    const Model model = load_model(params);
    const Dataset ds = load_csv(data, model.k);
    const DecodeRule rule = rule_token.empty() ? default_decode_rule(model.head) : parse_decode_rule(rule_token);
    const Evaluation eval = evaluate(model, ds, rule);
    std::printf("head=%s n=%zu\n", std::string(to_token(model.head)).c_str(), ds.size());
    print_evaluation(eval);
    if (!out.empty()) write_predictions_csv(out, model, eval);
    return 0;
}

int cmd_gradcheck(const std::string& loss_token, std::size_t trials, std::uint64_t seed, double eps) {
    std::vector<LossKind> kinds;
    if (loss_token == "all") {
        kinds.assign(std::begin(kAllLossKinds), std::end(kAllLossKinds));
    } else {
        kinds.push_back(parse_loss_kind(loss_token));
    }
    bool ok = true;
    for (auto kind : kinds) {
        const auto report = gradient_check(kind, trials, seed, eps);
        const bool pass = report.max_relative_error < 1e-4;
        ok = ok && pass;
        std::printf("%-13s instances=%zu coords=%zu max_rel_err=%.3e %s\n", std::string(to_token(kind)).c_str(),
                    report.instances, report.coordinates, report.max_relative_error, pass ? "ok" : "FAIL");
    }
    return ok ? 0 : 1;
}

int cmd_kappa(const std::string& path, int k, const std::string& weights) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    const auto header = detail::split_commas(line);
    std::optional<std::size_t> label_col, pred_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "label") label_col = i;
        if (header[i] == "prediction") pred_col = i;
    }
    if (!label_col || !pred_col) throw ParseError(path + ": need 'label' and 'prediction' columns");

    std::vector<int> labels, preds;
    int max_seen = 0;
    for (std::size_t row = 1; std::getline(in, line); ++row) {
        if (line.empty()) continue;
        const auto cells = detail::split_commas(line);
        int c = 0, p = 0;
        if (cells.size() != header.size() || !detail::parse_int(cells[*label_col], c) ||
            !detail::parse_int(cells[*pred_col], p) || c < 0 || p < 0) {
            throw ParseError(path + ": bad value on data row " + std::to_string(row));
        }
        labels.push_back(c);
        preds.push_back(p);
        max_seen = std::max({max_seen, c, p});
    }
    if (k == 0) k = std::max(2, max_seen + 1);
    const double value = kappa(std::span<const int>(labels), std::span<const int>(preds),
                               weight_matrix(k, parse_weight_kind(weights)));
    std::printf("n=%zu k=%d weights=%s\n", labels.size(), k, weights.c_str());
    print_kv("kappa", value);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ordinal classification heads, quadratic weighted kappa, and a seeded training harness"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate-data", "write a synthetic ordinal dataset as CSV");
    std::map<std::string, std::string> gen_values;
    std::string gen_out;
    add_key_options(*gen, kGeneratorKeys, gen_values);
    gen->add_option("--out", gen_out, "output CSV path")->required();

    auto* train = app.add_subcommand("train", "train one configuration");
    std::map<std::string, std::string> train_values;
    std::string config_path;
    train->add_option("--config", config_path, "key = value config file; flags override it");
    std::vector<std::string> all_keys(config_keys().begin(), config_keys().end());
    add_key_options(*train, all_keys, train_values);

    auto* eval = app.add_subcommand("evaluate", "score saved parameters on a CSV dataset");
    std::string params_path, data_path, rule_token, eval_out;
    eval->add_option("--params", params_path, "params.bin from a training run")->required();
    eval->add_option("--data", data_path, "CSV with feature columns and a label column")->required();
    eval->add_option("--decode_rule", rule_token, "argmax|round_soft_argmax|conditional_risk|cheng_first_zero");
    eval->add_option("--out", eval_out, "write per-example predictions CSV");

    auto* grad = app.add_subcommand("gradcheck", "compare backprop with central differences");
    std::string grad_loss = "all";
    std::size_t trials = 50;
    std::uint64_t grad_seed = 1;
    double eps = 1e-5;
    grad->add_option("--loss", grad_loss, "loss kind or 'all'");
    grad->add_option("--trials", trials, "random instances per loss");
    grad->add_option("--seed", grad_seed, "RNG seed");
    grad->add_option("--eps", eps, "finite-difference step");

    auto* kap = app.add_subcommand("kappa", "weighted kappa of a label/prediction CSV");
    std::string pred_path, weights = "quadratic";
    int k = 0;
    kap->add_option("--predictions", pred_path, "CSV with 'label' and 'prediction' columns")->required();
    kap->add_option("--k", k, "number of classes (default: largest value + 1)");
    kap->add_option("--weights", weights, "quadratic|discrete");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            ExperimentConfig cfg;
            apply_given(cfg, *gen, kGeneratorKeys, gen_values);
            return cmd_generate(cfg.generator, gen_out);
        }
        if (train->parsed()) {
            ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
            apply_given(cfg, *train, all_keys, train_values);
            return cmd_train(cfg);
        }
        if (eval->parsed()) return cmd_evaluate(params_path, data_path, rule_token, eval_out);
        if (grad->parsed()) return cmd_gradcheck(grad_loss, trials, grad_seed, eps);
        if (kap->parsed()) return cmd_kappa(pred_path, k, weights);
    } catch (const ordinal::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

// Experiment configuration: flat `key = value` text, one setting per line.
//
// Every key is also accepted as a command-line flag of the same name. Unknown
// keys are errors. A snapshot written by `to_snapshot` parses back to the same
// configuration, with the learning-rate schedule and decode rule resolved.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ordinal/data.hpp"
#include "ordinal/decode.hpp"
#include "ordinal/error.hpp"
#include "ordinal/heads.hpp"
#include "ordinal/netcore.hpp"

namespace ordinal {

struct LrStep {
    int epoch_from = 0;
    double learning_rate = 0.01;

    friend bool operator==(const LrStep&, const LrStep&) = default;
};

struct WarmStart {
    LossKind loss = LossKind::cross_entropy;
    int epochs = 0;

    friend bool operator==(const WarmStart&, const WarmStart&) = default;
};

/// Epoch count the default schedules' breakpoints are expressed against.
inline constexpr int kReferenceEpochs = 250;

struct ExperimentConfig {
    LossKind loss = LossKind::fix_a;
    std::string data_path;  // empty: generate from `generator`
    GeneratorSpec generator;
    double val_fraction = 0.2;
    std::vector<std::size_t> hidden = {32};
    int epochs = 60;
    std::size_t batch_size = 128;
    std::vector<LrStep> lr_schedule;  // empty: default_schedule()
    double momentum = 0.9;
    std::uint64_t seed = 1;
    std::optional<WarmStart> warm_start;
    std::optional<DecodeRule> decode_rule;  // empty: default_decode_rule(loss)
    std::string output_dir;
    int run = 1;
    int schedule_reference_epochs = kReferenceEpochs;  // 0: breakpoints are absolute
};

inline const std::vector<std::string_view>& config_keys() {
    static const std::vector<std::string_view> keys = {
        "loss",          "data",           "n",           "d",          "k",
        "data_seed",     "proportions",    "latent_noise_sd", "feature_noise_scale", "label_noise_rate",
        "val_fraction",  "hidden",         "epochs",      "batch_size", "lr_schedule",
        "momentum",      "seed",           "warm_start_loss", "warm_start_epochs", "decode_rule",
        "output_dir",    "run",            "schedule_reference_epochs"};
    return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline double config_double(std::string_view key, std::string_view value) {
    double v = 0.0;
    if (!parse_double(trim(value), v)) {
        throw ConfigError("key '" + std::string(key) + "': '" + std::string(value) + "' is not a finite number");
    }
    return v;
}

inline long long config_integer(std::string_view key, std::string_view value) {
    const std::string t = trim(value);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ConfigError("key '" + std::string(key) + "': '" + std::string(value) + "' is not an integer");
    }
    return v;
}

inline std::size_t config_count(std::string_view key, std::string_view value) {
    const long long v = config_integer(key, value);
    if (v < 0) throw ConfigError("key '" + std::string(key) + "' must be nonnegative");
    return static_cast<std::size_t>(v);
}

inline std::vector<std::string> config_list(std::string_view value) {
    std::vector<std::string> items;
    const std::string t = trim(value);
    if (t.empty()) return items;
    for (auto cell : split_commas(t)) items.push_back(std::string(cell));
    return items;
}

inline std::vector<LrStep> parse_schedule(std::string_view value) {
    std::vector<LrStep> steps;
    for (const auto& item : config_list(value)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("lr_schedule entry '" + item + "' is not epoch:rate");
        }
        steps.push_back({static_cast<int>(config_integer("lr_schedule", item.substr(0, colon))),
                         config_double("lr_schedule", item.substr(colon + 1))});
    }
    return steps;
}

template <class T>
std::string join(const std::vector<T>& items, auto&& render) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += render(items[i]);
    }
    return out;
}

}  // namespace detail

/// Applies one setting. Throws ConfigError on unknown keys or malformed values.
inline void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view raw) {
    using namespace detail;
    const std::string value = trim(raw);
    if (key == "loss") {
        cfg.loss = parse_loss_kind(value);
    } else if (key == "data") {
        cfg.data_path = value;
    } else if (key == "n") {
        cfg.generator.n = config_count(key, value);
    } else if (key == "d") {
        cfg.generator.d = config_count(key, value);
    } else if (key == "k") {
        const int k = static_cast<int>(config_integer(key, value));
        if (k < 2) throw ConfigError("k must be at least 2");
        cfg.generator.k = k;
        if (cfg.generator.class_proportions.size() != static_cast<std::size_t>(k)) {
            cfg.generator.class_proportions.assign(static_cast<std::size_t>(k), 1.0 / k);
        }
    } else if (key == "data_seed") {
        cfg.generator.seed = static_cast<std::uint64_t>(config_integer(key, value));
    } else if (key == "proportions") {
        std::vector<double> p;
        for (const auto& item : config_list(value)) p.push_back(config_double(key, item));
        cfg.generator.class_proportions = p.empty() ? retinopathy_proportions() : std::move(p);
    } else if (key == "latent_noise_sd") {
        cfg.generator.latent_noise_sd = config_double(key, value);
    } else if (key == "feature_noise_scale") {
        cfg.generator.feature_noise_scale = config_double(key, value);
    } else if (key == "label_noise_rate") {
        cfg.generator.label_noise_rate = config_double(key, value);
    } else if (key == "val_fraction") {
        cfg.val_fraction = config_double(key, value);
    } else if (key == "hidden") {
        cfg.hidden.clear();
        for (const auto& item : config_list(value)) cfg.hidden.push_back(config_count(key, item));
    } else if (key == "epochs") {
        cfg.epochs = static_cast<int>(config_integer(key, value));
    } else if (key == "batch_size") {
        cfg.batch_size = config_count(key, value);
    } else if (key == "lr_schedule") {
        cfg.lr_schedule = parse_schedule(value);
    } else if (key == "momentum") {
        cfg.momentum = config_double(key, value);
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(config_integer(key, value));
    } else if (key == "warm_start_loss") {
        if (value.empty() || value == "none") {
            cfg.warm_start.reset();
        } else {
            const int epochs = cfg.warm_start ? cfg.warm_start->epochs : 0;
            cfg.warm_start = WarmStart{parse_loss_kind(value), epochs};
        }
    } else if (key == "warm_start_epochs") {
        const int epochs = static_cast<int>(config_integer(key, value));
        if (!cfg.warm_start) cfg.warm_start = WarmStart{LossKind::cross_entropy, epochs};
        cfg.warm_start->epochs = epochs;
        if (epochs == 0) cfg.warm_start.reset();
    } else if (key == "decode_rule") {
        if (value.empty() || value == "default") {
            cfg.decode_rule.reset();
        } else {
            cfg.decode_rule = parse_decode_rule(value);
        }
    } else if (key == "output_dir") {
        cfg.output_dir = value;
    } else if (key == "run") {
        cfg.run = static_cast<int>(config_integer(key, value));
    } else if (key == "schedule_reference_epochs") {
        cfg.schedule_reference_epochs = static_cast<int>(config_integer(key, value));
    } else {
        throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are ignored.
inline void apply_config_text(ExperimentConfig& cfg, std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        apply_setting(cfg, detail::trim(std::string_view(body).substr(0, eq)),
                      std::string_view(body).substr(eq + 1));
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg;
    apply_config_text(cfg, buf.str());
    return cfg;
}

/// The schedule used when none is configured. Breakpoints are given for a
/// kReferenceEpochs-epoch run and rescaled to cfg.epochs unless
/// schedule_reference_epochs is 0:
///   fix-a: 0.1, dropping to 0.01 at epoch 61 (run 1) or 118 (run 2), then 0.001 at 200;
///   every other loss: 0.01, then 0.001 at 200.
inline std::vector<LrStep> default_schedule(const ExperimentConfig& cfg) {
    const double scale = cfg.schedule_reference_epochs > 0
                             ? static_cast<double>(cfg.epochs) / static_cast<double>(cfg.schedule_reference_epochs)
                             : 1.0;
    auto at = [scale](int epoch) { return static_cast<int>(std::lround(epoch * scale)); };
    std::vector<LrStep> raw;
    if (cfg.loss == LossKind::fix_a) {
        raw = {{0, 0.1}, {at(cfg.run == 2 ? 118 : 61), 0.01}, {at(200), 0.001}};
    } else {
        raw = {{0, 0.01}, {at(200), 0.001}};
    }
    std::vector<LrStep> steps;
    for (const auto& s : raw) {
        if (!steps.empty() && s.epoch_from <= steps.back().epoch_from) {
            steps.back().learning_rate = s.learning_rate;
        } else {
            steps.push_back(s);
        }
    }
    return steps;
}

inline std::vector<LrStep> resolved_schedule(const ExperimentConfig& cfg) {
    return cfg.lr_schedule.empty() ? default_schedule(cfg) : cfg.lr_schedule;
}

inline DecodeRule resolved_decode_rule(const ExperimentConfig& cfg) {
    return cfg.decode_rule.value_or(default_decode_rule(cfg.loss));
}

inline double learning_rate_at(const std::vector<LrStep>& schedule, int epoch) {
    double lr = schedule.front().learning_rate;
    for (const auto& s : schedule) {
        if (s.epoch_from <= epoch) lr = s.learning_rate;
    }
    return lr;
}

/// Throws ConfigError when the configuration cannot be run.
inline void validate(const ExperimentConfig& cfg) {
    if (cfg.epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
    if (cfg.run != 1 && cfg.run != 2) throw ConfigError("run must be 1 or 2");
    if (cfg.schedule_reference_epochs < 0) throw ConfigError("schedule_reference_epochs must be nonnegative");
    for (auto h : cfg.hidden) {
        if (h == 0) throw ConfigError("hidden widths must be positive");
    }
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");

    const auto schedule = resolved_schedule(cfg);
    if (schedule.front().epoch_from != 0) throw ConfigError("lr_schedule must start at epoch 0");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i].learning_rate > 0.0)) throw ConfigError("learning rates must be positive");
        if (i > 0 && schedule[i].epoch_from <= schedule[i - 1].epoch_from) {
            throw ConfigError("lr_schedule epochs must be strictly increasing");
        }
    }

    if (cfg.warm_start) {
        if (cfg.warm_start->epochs <= 0 || cfg.warm_start->epochs >= cfg.epochs) {
            throw ConfigError("warm_start_epochs must lie in (0, epochs)");
        }
        if (is_softmax_head(cfg.warm_start->loss) != is_softmax_head(cfg.loss)) {
            throw ConfigError("warm-start loss " + std::string(to_token(cfg.warm_start->loss)) +
                              " uses a different head width than " + std::string(to_token(cfg.loss)));
        }
    }
    if (!rule_fits_head(resolved_decode_rule(cfg), cfg.loss)) {
        throw ConfigError("decode rule " + std::string(to_token(resolved_decode_rule(cfg))) +
                          " does not apply to the " + std::string(to_token(cfg.loss)) + " head");
    }
    if (cfg.data_path.empty()) cfg.generator.validate();
}

/// Every key with its effective value, in config_keys() order.
inline std::string to_snapshot(const ExperimentConfig& cfg) {
    using detail::format_double;
    auto num = [](auto v) { return std::to_string(v); };
    std::ostringstream out;
    out << "loss = " << to_token(cfg.loss) << '\n';
    out << "data = " << cfg.data_path << '\n';
    out << "n = " << cfg.generator.n << '\n';
    out << "d = " << cfg.generator.d << '\n';
    out << "k = " << cfg.generator.k << '\n';
    out << "data_seed = " << cfg.generator.seed << '\n';
    out << "proportions = " << detail::join(cfg.generator.class_proportions, format_double) << '\n';
    out << "latent_noise_sd = " << format_double(cfg.generator.latent_noise_sd) << '\n';
    out << "feature_noise_scale = " << format_double(cfg.generator.feature_noise_scale) << '\n';
    out << "label_noise_rate = " << format_double(cfg.generator.label_noise_rate) << '\n';
    out << "val_fraction = " << format_double(cfg.val_fraction) << '\n';
    out << "hidden = " << detail::join(cfg.hidden, num) << '\n';
    out << "epochs = " << cfg.epochs << '\n';
    out << "batch_size = " << cfg.batch_size << '\n';
    out << "lr_schedule = "
        << detail::join(resolved_schedule(cfg),
                        [](const LrStep& s) { return std::to_string(s.epoch_from) + ":" + format_double(s.learning_rate); })
        << '\n';
    out << "momentum = " << format_double(cfg.momentum) << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "warm_start_loss = " << (cfg.warm_start ? to_token(cfg.warm_start->loss) : "none") << '\n';
    out << "warm_start_epochs = " << (cfg.warm_start ? cfg.warm_start->epochs : 0) << '\n';
    out << "decode_rule = " << to_token(resolved_decode_rule(cfg)) << '\n';
    out << "output_dir = " << cfg.output_dir << '\n';
    out << "run = " << cfg.run << '\n';
    out << "schedule_reference_epochs = " << cfg.schedule_reference_epochs << '\n';
    return out.str();
}

}  // namespace ordinal

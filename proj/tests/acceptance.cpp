// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ordinal/ordinal.hpp"

using namespace ordinal;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

Tensor random_stochastic(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::gamma_distribution<double> gamma(0.6, 1.0);
    Tensor p = Tensor::matrix(n, k);
    for (std::size_t r = 0; r < n; ++r) {
        double total = 0.0;
        for (auto& v : p.row(r)) total += (v = gamma(rng) + 1e-12);
        for (auto& v : p.row(r)) v /= total;
    }
    return p;
}

Outcome kappa_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2016);
    double worst = 0.0;
    int instances = 0;
    for (; instances < 500; ++instances) {
        const std::size_t n = 2 + rng() % 19;
        const int k = 2 + static_cast<int>(rng() % 5);
        std::vector<int> labels(n);
        for (auto& c : labels) c = static_cast<int>(rng() % static_cast<unsigned>(k));
        labels[0] = 0;
        labels[1] = k - 1;
        const auto y = one_hot(labels, k);
        // half soft, half hard predictions
        Tensor p = random_stochastic(rng, n, static_cast<std::size_t>(k));
        if (instances % 2 == 1) {
            std::vector<int> hard(n);
            for (auto& c : hard) c = static_cast<int>(rng() % static_cast<unsigned>(k));
            p = one_hot(hard, k);
        }
        const double got = kappa(y, p, weight_matrix(k, WeightKind::quadratic));
        const double want = oracle::kappa_by_pairs(y, p, oracle::quadratic_weight);
        worst = std::max(worst, std::abs(got - want));
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-10 && t < 10.0, fmt("%d instances, max |diff| %.2e, %.2fs", instances, worst, t)};
}

Outcome hand_instance() {
    const std::vector<int> labels{0, 1, 2}, preds{0, 2, 1};
    const auto w = weight_matrix(3, WeightKind::quadratic);
    const auto m = rating_matrices(one_hot(labels, 3), one_hot(preds, 3));
    const double num = weighted_sum(w, m.observed), den = weighted_sum(w, m.expected);
    const double k = kappa(labels, preds, w);
    return {k == 0.5 && num == 2.0 && std::abs(den - 4.0) < 1e-15,
            fmt("kappa %.17g, sum W.O %.17g, sum W.E %.17g", k, num, den)};
}

Outcome gradient_conformance() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string detail;
    for (auto kind : kAllLossKinds) {
        const auto r = gradient_check(kind, 50, 7);
        ok = ok && r.instances >= 50 && r.max_relative_error < 1e-4;
        detail += fmt("%s %.1e; ", std::string(to_token(kind)).c_str(), r.max_relative_error);
    }
    const double t = seconds_since(t0);
    return {ok && t < 60.0, detail + fmt("%.2fs", t)};
}

Outcome decoder_laws() {
    std::size_t codes = 0, code_failures = 0;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> high(0.5, 1.0), low(0.0, 0.5);
    for (int k = 2; k <= 8; ++k) {
        const unsigned width = static_cast<unsigned>(k - 1);
        for (unsigned mask = 0; mask < (1u << width); ++mask) {
            std::vector<double> hard(width), soft(width);
            for (unsigned i = 0; i < width; ++i) {
                const bool bit = (mask >> i) & 1u;
                hard[i] = bit ? 1.0 : 0.0;
                soft[i] = bit ? high(rng) : low(rng);
            }
            const int expected = std::min(std::countr_one(mask), k - 1);
            code_failures += cheng_decode(hard) != expected;
            code_failures += cheng_decode(soft) != expected;
            ++codes;
        }
    }
    std::size_t risk_failures = 0;
    std::gamma_distribution<double> gamma(0.5, 1.0);
    for (int t = 0; t < 1000; ++t) {
        const int k = 2 + static_cast<int>(rng() % 7);
        std::vector<double> f(static_cast<std::size_t>(k));
        double total = 0.0;
        for (auto& v : f) total += (v = gamma(rng));
        for (auto& v : f) v /= total;
        const double mean = soft_argmax(f, AnchorVector::fixed(k));
        const int j = conditional_risk_decode(f, weight_matrix(k, WeightKind::quadratic));
        risk_failures += !(j == static_cast<int>(std::floor(mean)) || j == static_cast<int>(std::ceil(mean)));
    }
    return {code_failures == 0 && risk_failures == 0,
            fmt("%zu cheng codes (k<=8), %zu mismatches; 1000 risk argmins, %zu outside floor/ceil", codes,
                code_failures, risk_failures)};
}

// ---------------------------------------------------------------------------
// Training comparisons on the default synthetic dataset

constexpr int kSeeds = 5;
constexpr int kEpochs = 60;

struct Arm {
    std::string name;
    std::vector<RunResult> runs;

    double mean(const std::function<double(const RunResult&)>& f) const {
        double s = 0.0;
        for (const auto& r : runs) s += f(r);
        return s / static_cast<double>(runs.size());
    }
    double kappa() const { return mean([](const RunResult& r) { return r.final_evaluation.kappa; }); }
    double cross_entropy() const {
        return mean([](const RunResult& r) { return r.final_evaluation.cross_entropy.value_or(NAN); });
    }
    std::string per_seed() const {
        std::string s;
        for (const auto& r : runs) s += fmt(" %.3f", r.final_evaluation.kappa);
        return s;
    }
};

Arm train_arm(const std::string& name, LossKind loss, std::optional<WarmStart> warm) {
    Arm arm{name, {}};
    for (int seed = 1; seed <= kSeeds; ++seed) {
        ExperimentConfig cfg;
        cfg.loss = loss;
        cfg.epochs = kEpochs;
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.warm_start = warm;
        arm.runs.push_back(run_experiment(cfg));
    }
    return arm;
}

struct Comparison {
    std::map<std::string, Arm> arms;
    double seconds = 0.0;
};

Comparison run_comparison() {
    const auto t0 = Clock::now();
    Comparison c;
    const int warm_epochs = static_cast<int>(std::lround(150.0 * kEpochs / kReferenceEpochs));
    c.arms.emplace("cross-entropy", train_arm("cross-entropy", LossKind::cross_entropy, std::nullopt));
    c.arms.emplace("fix-a", train_arm("fix-a", LossKind::fix_a, std::nullopt));
    c.arms.emplace("cheng", train_arm("cheng", LossKind::cheng, std::nullopt));
    c.arms.emplace("learn-a", train_arm("learn-a", LossKind::learn_a, std::nullopt));
    c.arms.emplace("learn-a-sigm", train_arm("learn-a-sigm", LossKind::learn_a_sigm, std::nullopt));
    c.arms.emplace("qwk-warm", train_arm("qwk-warm", LossKind::qwk, WarmStart{LossKind::cross_entropy, warm_epochs}));
    c.seconds = seconds_since(t0);
    return c;
}

void report_arms(const Comparison& c) {
    std::printf("  default dataset: n=3000 k=5 DR-like proportions, label noise 0.05; %d seeds x %d epochs, %.1fs\n",
                kSeeds, kEpochs, c.seconds);
    for (const auto& name : {"cross-entropy", "fix-a", "cheng", "learn-a", "learn-a-sigm", "qwk-warm"}) {
        const auto& arm = c.arms.at(name);
        const double ce = arm.cross_entropy();
        std::printf("  %-13s mean kappa %.4f  val CE %s |%s\n", name, arm.kappa(),
                    std::isnan(ce) ? "   n/a" : fmt("%.4f", ce).c_str(), arm.per_seed().c_str());
    }
}

Outcome fig2_ordering(const Comparison& c) {
    const double fa = c.arms.at("fix-a").kappa();
    const double ce = c.arms.at("cross-entropy").kappa();
    const double ch = c.arms.at("cheng").kappa();
    const double sigm = c.arms.at("learn-a-sigm").kappa();
    return {fa > ce && fa > ch && c.seconds < 600.0,
            fmt("fix-a %.4f vs cross-entropy %.4f and cheng %.4f (learn-a-sigm %.4f, not gated); %.1fs", fa, ce, ch,
                sigm, c.seconds)};
}

Outcome appendix_qwk(const Comparison& c) {
    const auto& q = c.arms.at("qwk-warm");
    const auto& ce = c.arms.at("cross-entropy");
    return {q.kappa() >= ce.kappa() && q.cross_entropy() >= ce.cross_entropy() && c.seconds < 600.0,
            fmt("qwk-warm kappa %.4f >= %.4f and val CE %.4f >= %.4f", q.kappa(), ce.kappa(), q.cross_entropy(),
                ce.cross_entropy())};
}

Outcome decoder_gap(const Comparison& c) {
    double worst = 0.0;
    double agreement = 0.0;
    const auto w = weight_matrix(5, WeightKind::quadratic);
    for (const auto& r : c.arms.at("fix-a").runs) {
        const auto& e = r.final_evaluation;
        worst = std::max(worst, std::abs(*e.kappa_for(DecodeRule::round_soft_argmax) -
                                         *e.kappa_for(DecodeRule::conditional_risk)));
        std::size_t same = 0;
        for (std::size_t i = 0; i < e.outputs.rows(); ++i) {
            same += round_soft_argmax(e.outputs.row(i), r.model.anchors) == conditional_risk_decode(e.outputs.row(i), w);
        }
        agreement += static_cast<double>(same) / static_cast<double>(e.outputs.rows()) / kSeeds;
    }
    return {worst <= 0.02, fmt("max per-seed |kappa gap| %.4f; per-example agreement %.4f (reported)", worst, agreement)};
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome reproducibility() {
    const auto root = std::filesystem::temp_directory_path() / "ordinal_acceptance_repro";
    std::filesystem::remove_all(root);
    std::size_t checked = 0, identical = 0;
    for (auto loss : kAllLossKinds) {
        ExperimentConfig cfg;
        cfg.loss = loss;
        cfg.epochs = 12;
        cfg.seed = 3;
        if (loss == LossKind::qwk) cfg.warm_start = WarmStart{LossKind::cross_entropy, 4};
        std::string bytes[2];
        for (int i = 0; i < 2; ++i) {
            const auto dir = root / (std::string(to_token(loss)) + "_" + std::to_string(i));
            cfg.output_dir = dir.string();
            run_experiment(cfg);
            bytes[i] = read_file(dir / "metrics.csv");
        }
        ++checked;
        identical += !bytes[0].empty() && bytes[0] == bytes[1];
    }
    std::filesystem::remove_all(root);
    return {identical == checked, fmt("%zu of %zu loss kinds byte-identical metrics.csv across reruns", identical, checked)};
}

Outcome diagnostics(const Comparison& c) {
    bool ok = true;
    std::string detail;
    std::size_t models = 0;
    for (const auto& name : {"cross-entropy", "fix-a", "qwk-warm"}) {
        for (const auto& r : c.arms.at(name).runs) {
            const auto hist = dump_correct_class_probabilities(r.model, r.validation);
            std::size_t total = 0;
            for (auto n : hist.counts) total += n;
            ok = ok && total == r.validation.size() && hist.p_correct.size() == r.validation.size();
            for (const auto& s : dump_per_class_probability_summary(r.model, r.validation)) {
                ok = ok && s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max;
            }
            ++models;
        }
    }
    detail += fmt("%zu trained models: bins sum to n, quartiles ordered; ", models);

    // Uniform predictor: zero weights and biases give softmax = 1/k everywhere.
    const int k = 5;
    const auto& val = c.arms.at("fix-a").runs.front().validation;
    Model uniform = make_model(LossKind::fix_a, k, val.dim(), {}, 1);
    uniform.network.layers[0].weight.fill(0.0);
    uniform.standardizer = Standardizer::identity(val.dim());
    const auto hist = dump_correct_class_probabilities(uniform, val);
    bool uniform_ok = std::all_of(hist.p_correct.begin(), hist.p_correct.end(), [](double p) { return p == 0.2; });
    for (const auto& s : dump_per_class_probability_summary(uniform, val)) {
        for (double v : {s.min, s.q1, s.median, s.q3, s.max}) uniform_ok = uniform_ok && v == 1.0 / k;
    }
    // Always-class-0 predictor: one-hot rows.
    Model zero = uniform;
    zero.network.layers[0].bias = Tensor::vector({1000, 0, 0, 0, 0});
    for (const auto& s : dump_per_class_probability_summary(zero, val)) {
        const double v = s.cls == 0 ? 1.0 : 0.0;
        for (double q : {s.min, s.q1, s.median, s.q3, s.max}) uniform_ok = uniform_ok && q == v;
    }
    detail += uniform_ok ? "uniform p(correct)=0.2, quartiles 1/k; class-0 predictor 1/0"
                         : "degenerate predictor values wrong";
    return {ok && uniform_ok, detail};
}

}  // namespace

int main() {
    int failures = 0;
    auto line = [&](int id, const char* title, const Outcome& o) {
        std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };

    line(1, "kappa matches pair-counting oracle", guarded(kappa_oracle));
    line(2, "hand-worked kappa instance", guarded(hand_instance));
    line(3, "gradient conformance, all loss kinds", guarded(gradient_conformance));
    line(4, "decoder laws", guarded(decoder_laws));

    std::optional<Comparison> comparison;
    try {
        comparison = run_comparison();
        report_arms(*comparison);
    } catch (const std::exception& e) {
        std::printf("  training comparison failed: %s\n", e.what());
    }
    auto needs_runs = [&](const std::function<Outcome(const Comparison&)>& f) {
        if (!comparison) return Outcome{false, "training comparison did not complete"};
        return guarded([&] { return f(*comparison); });
    };
    line(5, "fix-a beats cross-entropy and cheng", needs_runs(fig2_ordering));
    line(6, "qwk warm start: higher kappa, higher cross-entropy", needs_runs(appendix_qwk));
    line(7, "round vs conditional-risk kappa gap", needs_runs(decoder_gap));
    line(8, "byte-identical metrics on rerun", guarded(reproducibility));
    line(9, "diagnostic dumps", needs_runs(diagnostics));

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "cli.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include "embedfuse/dataset.hpp"
#include "embedfuse/dedup.hpp"
#include "embedfuse/eval.hpp"
#include "embedfuse/head.hpp"
#include "embedfuse/knn.hpp"
#include "embedfuse/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace embedfuse;

namespace {

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradBudgetSec = 10.0;
constexpr double kKnnBudgetSec = 30.0;
constexpr double kAggregationTol = 1e-6;
constexpr double kScaleTol = 1e-6;
constexpr double kScaleFactor = 7.3;
constexpr double kFilterThreshold = 0.85;
constexpr double kModelAMin = 0.99;
constexpr double kModelABudgetSec = 120.0;
constexpr double kModelBBudgetSec = 60.0;
// Sweep endpoints re-normalise predictions read back from disk; allow for that rounding.
constexpr double kEnsembleSlack = 1e-12;

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c, d);
    return buf;
}

std::vector<std::vector<double>> rows(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out.emplace_back(m.row(i).begin(), m.row(i).end());
    }
    return out;
}

SynthConfig synth(std::size_t count, std::uint32_t dim, double sigma, std::uint64_t seed) {
    return SynthConfig{count, dim, dim, sigma, seed};
}

Outcome gradient_check() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string where;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 77);
        const auto params = gradcheck::random_head(16, 16, 16, seed % 2 == 1, seed);
        const auto x = gradcheck::random_vector(16, rng);
        const auto t = gradcheck::random_vector(16, rng);
        const auto w = gradcheck::check(params, x, t);
        if (w.rel_error > worst) {
            worst = w.rel_error;
            where = w.param + "[" + std::to_string(w.index) + "] seed " + std::to_string(seed);
        }
    }
    const double took = seconds_since(start);
    return {worst < kGradRelTol && took < kGradBudgetSec,
            fmt("max rel error %.3g in %.2f s", worst, took) + ", worst at " + where};
}

Outcome knn_oracle() {
    const auto start = std::chrono::steady_clock::now();
    const auto corpus = generate_synthetic(synth(2000, 64, 0.1, 11)).dataset;
    const Matrix queries = generate_synthetic(synth(200, 64, 0.1, 12)).dataset.image_matrix();
    KnnConfig cfg;
    cfg.index_space = EmbeddingField::kImage;
    const KnnIndex index = knn_fit(corpus, cfg);
    const Matrix batch = knn_predict_batch(index, queries, KnnAggregation::kMeanOverK, 8);

    const auto keys = rows(corpus.image_matrix());
    const auto values = rows(corpus.text_matrix());
    std::size_t id_mismatch = 0, bit_mismatch = 0;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        const std::vector<double> query(queries.row(q).begin(), queries.row(q).end());
        const auto expected =
            oracle::brute_force_knn(keys, values, corpus.ids(), query, cfg.k, cfg.distance_dim, cfg.delta, cfg.coef);
        if (index.search(queries.row(q)).ids != expected.ids) {
            ++id_mismatch;
        }
        if (!std::equal(batch.row(q).begin(), batch.row(q).end(), expected.text.begin())) {
            ++bit_mismatch;
        }
    }
    const double took = seconds_since(start);
    return {id_mismatch == 0 && bit_mismatch == 0 && took < kKnnBudgetSec,
            std::to_string(id_mismatch) + " id / " + std::to_string(bit_mismatch) +
                " bit mismatches over 200 queries" + fmt(" in %.2f s", took)};
}

Outcome aggregation_invariance() {
    const auto corpus = generate_synthetic(synth(2000, 16, 0.1, 21)).dataset;
    const auto queries = generate_synthetic(synth(500, 16, 0.1, 22)).dataset;
    KnnConfig cfg;
    cfg.index_space = EmbeddingField::kImage;
    const KnnIndex index = knn_fit(corpus, cfg);
    const EvalOptions opts{true, queries.ids()};
    const auto mean_k =
        avg_cos_sim(knn_predict_batch(index, queries.image_matrix(), KnnAggregation::kMeanOverK), queries.text_matrix(),
                    opts);
    const auto weight_sum =
        avg_cos_sim(knn_predict_batch(index, queries.image_matrix(), KnnAggregation::kWeightSum),
                    queries.text_matrix(), opts);
    double worst = 0.0;
    for (std::size_t i = 0; i < 500; ++i) {
        worst = std::max(worst, std::abs((*mean_k.per_pair)[i].cosine - (*weight_sum.per_pair)[i].cosine));
    }
    return {worst < kAggregationTol, fmt("max per-pair |diff| %.3g over 500 queries", worst)};
}

Outcome scale_invariance() {
    const auto data = generate_synthetic(synth(1000, 16, 0.3, 31)).dataset;
    Matrix preds = data.image_matrix();
    const double base = avg_cos_sim(preds, data.text_matrix()).avg_cossim;
    for (double& v : preds.values()) {
        v *= kScaleFactor;
    }
    const double scaled = avg_cos_sim(preds, data.text_matrix()).avg_cossim;
    const double diff = std::abs(scaled - base);
    return {diff < kScaleTol, fmt("|delta avg_cossim| %.3g after scaling by %.1f", diff, kScaleFactor)};
}

Outcome filter_soundness() {
    const auto data = generate_synthetic(synth(5000, 8, 0.1, 41)).dataset;
    const FilterConfig cfg{kFilterThreshold, EmbeddingField::kText};
    const auto first = filter_by_similarity(data, cfg);
    const auto kept = rows(first.kept.text_matrix());
    std::size_t violations = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::size_t j = i + 1; j < kept.size(); ++j) {
            const Eigen::Map<const Eigen::VectorXd> a(kept[i].data(), static_cast<Eigen::Index>(kept[i].size()));
            const Eigen::Map<const Eigen::VectorXd> b(kept[j].data(), static_cast<Eigen::Index>(kept[j].size()));
            if (oracle::cosine(a, b) > kFilterThreshold) {
                ++violations;
            }
        }
    }
    const auto second = filter_by_similarity(first.kept, cfg);
    return {violations == 0 && second.report.removed_count == 0 && first.report.removed_count > 0,
            std::to_string(first.report.kept_count) + " kept of 5000, " + std::to_string(violations) +
                " pairs above threshold, second pass removed " + std::to_string(second.report.removed_count)};
}

Outcome model_a_quality() {
    const auto start = std::chrono::steady_clock::now();
    const auto data = generate_synthetic(synth(2000, 16, 0.0, 7)).dataset;
    const auto parts = split_dataset(data, SplitFractions{}, 7);
    const double ceiling = oracle::least_squares_avg_cossim(parts.train, parts.val);
    TrainConfig cfg;
    cfg.seed = 7;
    const auto result = train_head(cfg, parts.train, parts.val);
    const double val = avg_cos_sim(head_predict(result.params, parts.val), parts.val.text_matrix()).avg_cossim;
    const double took = seconds_since(start);
    return {val >= kModelAMin && took < kModelABudgetSec,
            fmt("val %.6f (least-squares ceiling %.6f) in %.2f s", val, ceiling, took)};
}

Outcome model_b_sanity() {
    const auto start = std::chrono::steady_clock::now();
    const auto data = generate_synthetic(synth(2000, 16, 0.05, 7)).dataset;
    const auto parts = split_dataset(data, SplitFractions{}, 7);
    const double baseline = oracle::mean_baseline_avg_cossim(parts.train, parts.val);
    KnnConfig cfg;
    cfg.k = 5;
    cfg.index_space = EmbeddingField::kImage;
    const KnnIndex index = knn_fit(parts.train, cfg);
    const double val =
        avg_cos_sim(knn_predict_batch(index, parts.val.image_matrix()), parts.val.text_matrix()).avg_cossim;
    const double took = seconds_since(start);
    return {val > baseline && took < kModelBBudgetSec,
            fmt("val %.6f vs mean baseline %.6f in %.2f s", val, baseline, took)};
}

struct CliFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    if (cli::execute(args, out, err) != 0) {
        std::string joined;
        for (const auto& a : args) joined += a + " ";
        throw CliFailure(joined + "-> " + err.str());
    }
    return out.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Full pipeline into `dir`. Returns the stdout of every step.
std::string run_pipeline(const fs::path& dir, std::size_t threads) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto p = [&](const char* name) { return (dir / name).string(); };
    const std::string t = std::to_string(threads);
    std::string log;
    log += cli({"--threads", t, "synth", "--count", "2000", "--dim", "16", "--sigma", "0.05", "--seed", "7", "--out",
                p("all.embp")});
    log += cli({"--threads", t, "filter", "--in", p("all.embp"), "--out", p("filtered.embp"), "--report",
                p("filter.json"), "--threshold", "0.99"});
    log += cli({"--threads", t, "split", "--in", p("filtered.embp"), "--train-out", p("train.embp"), "--val-out",
                p("val.embp"), "--test-out", p("test.embp"), "--seed", "7"});
    log += cli({"--threads", t, "train-head", "--train", p("train.embp"), "--val", p("val.embp"), "--out",
                p("head.bin"), "--history", p("history.jsonl"), "--seed", "7", "--epochs", "20"});
    log += cli({"--threads", t, "knn-fit", "--train", p("train.embp"), "--out", p("index.embp"), "--space", "image",
                "--k", "5"});
    for (const char* split : {"val", "test"}) {
        const std::string in = p(split) + std::string(".embp");
        log += cli({"--threads", t, "predict", "--model", "a", "--in", in, "--head", p("head.bin"), "--out",
                    p(split) + std::string(".a.embp")});
        log += cli({"--threads", t, "predict", "--model", "b", "--in", in, "--index", p("index.embp"), "--out",
                    p(split) + std::string(".b.embp")});
    }
    log += cli({"--threads", t, "sweep-alpha", "--a-pred", p("val.a.embp"), "--b-pred", p("val.b.embp"), "--truth",
                p("val.embp"), "--out", p("sweep.json"), "--run-config-out", p("run.json"), "--seed", "7"});
    log += cli({"--threads", t, "predict", "--model", "ensemble", "--config", p("run.json"), "--in", p("test.embp"),
                "--head", p("head.bin"), "--index", p("index.embp"), "--out", p("test.ens.embp")});
    for (const char* model : {"a", "b", "ens"}) {
        log += cli({"--threads", t, "eval", "--pred", p("test.") + model + ".embp", "--truth", p("test.embp"),
                    "--split", "test", "--per-pair", "--out", p("eval.") + model + ".json"});
    }
    return log;
}

Outcome ensemble_dominance(const fs::path& work) {
    const fs::path dir = work / "ensemble";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto p = [&](const char* name) { return (dir / name).string(); };
    cli({"synth", "--count", "2000", "--dim", "16", "--sigma", "0.3", "--seed", "7", "--out", p("all.embp")});
    cli({"split", "--in", p("all.embp"), "--train-out", p("train.embp"), "--val-out", p("val.embp"), "--test-out",
         p("test.embp"), "--seed", "7"});
    cli({"train-head", "--train", p("train.embp"), "--val", p("val.embp"), "--out", p("head.bin"), "--seed", "7",
         "--epochs", "5"});
    cli({"knn-fit", "--train", p("train.embp"), "--out", p("index.embp"), "--space", "image"});
    cli({"predict", "--model", "a", "--in", p("val.embp"), "--head", p("head.bin"), "--out", p("a.embp")});
    cli({"predict", "--model", "b", "--in", p("val.embp"), "--index", p("index.embp"), "--out", p("b.embp")});
    const auto a = nlohmann::json::parse(cli({"eval", "--pred", p("a.embp"), "--truth", p("val.embp")}));
    const auto b = nlohmann::json::parse(cli({"eval", "--pred", p("b.embp"), "--truth", p("val.embp")}));
    const auto sweep = nlohmann::json::parse(cli({"sweep-alpha", "--a-pred", p("a.embp"), "--b-pred", p("b.embp"),
                                                  "--truth", p("val.embp"), "--out", p("sweep.json")}));
    const double sa = a["avg_cossim"], sb = b["avg_cossim"];
    const double best = sweep["best_avg_cossim"], alpha = sweep["best_alpha"];
    const std::size_t points = nlohmann::json::parse(slurp(p("sweep.json"))).size();
    return {points == 21 && best >= std::max(sa, sb) - kEnsembleSlack,
            fmt("ensemble %.6f at alpha %.2f vs A %.6f, B %.6f", best, alpha, sa, sb)};
}

Outcome pipeline_determinism(const fs::path& work) {
    const std::string first = run_pipeline(work / "run1", 1);
    const std::string second = run_pipeline(work / "run2", 4);
    std::size_t files = 0;
    std::vector<std::string> differing;
    for (const auto& entry : fs::directory_iterator(work / "run1")) {
        ++files;
        const fs::path other = work / "run2" / entry.path().filename();
        if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
            differing.push_back(entry.path().filename().string());
        }
    }
    const bool logs_equal = first == second;
    std::string detail = std::to_string(files) + " files compared, " + std::to_string(differing.size()) + " differ";
    for (const auto& d : differing) detail += " " + d;
    if (!logs_equal) detail += "; stdout differs";
    detail += " (1 thread vs 4)";
    return {differing.empty() && logs_equal && files >= 15, detail};
}

} // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / "embedfuse_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient-check", gradient_check},
        {"knn-oracle-equivalence", knn_oracle},
        {"knn-normalization-invariance", aggregation_invariance},
        {"metric-scale-invariance", scale_invariance},
        {"filter-soundness", filter_soundness},
        {"model-a-regression-quality", model_a_quality},
        {"model-b-beats-mean-baseline", model_b_sanity},
        {"ensemble-dominance", [&] { return ensemble_dominance(work); }},
        {"pipeline-determinism", [&] { return pipeline_determinism(work); }},
    };

    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    fs::remove_all(work);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}

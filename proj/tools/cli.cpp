#include "cli.hpp"

#include "run_config.hpp"

#include "embedfuse/dataset.hpp"
#include "embedfuse/dedup.hpp"
#include "embedfuse/ensemble.hpp"
#include "embedfuse/error.hpp"
#include "embedfuse/eval.hpp"
#include "embedfuse/head.hpp"
#include "embedfuse/knn.hpp"
#include "embedfuse/parallel.hpp"
#include "embedfuse/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

namespace embedfuse::cli {

namespace {

using ojson = nlohmann::ordered_json;

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    out << content;
    out.flush();
    if (!out) {
        throw IoError("failed to write " + path);
    }
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message,
                 const std::string& field = {}) {
    ojson j;
    j["error"] = kind;
    if (!field.empty()) {
        j["field"] = field;
    }
    j["message"] = message;
    err << j.dump() << '\n';
}

EmbeddingField parse_field(const std::string& value, const char* flag) {
    if (value == "text") {
        return EmbeddingField::kText;
    }
    if (value == "image") {
        return EmbeddingField::kImage;
    }
    throw ConfigError(flag, "must be \"text\" or \"image\"");
}

const char* field_name(EmbeddingField f) {
    return f == EmbeddingField::kText ? "text" : "image";
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw ConfigError(flag, "expected a comma-separated list of numbers");
        }
    }
    return out;
}

void require_aligned_ids(const PairedDataset& a, const PairedDataset& b, const char* what) {
    if (a.ids() != b.ids()) {
        throw DataError(std::string(what) + ": record ids do not line up");
    }
}

/// Re-throws a library ConfigError under the CLI flag name.
template <typename F>
decltype(auto) validate_as(const char* flag, F&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(flag, e.what());
    }
}

ojson report_json(const EvalReport& r) {
    ojson j;
    j["n"] = r.n_pairs;
    j["avg_cossim"] = r.avg_cossim;
    if (r.per_pair) {
        ojson rows = ojson::array();
        for (const auto& p : *r.per_pair) {
            rows.push_back({{"id", p.id}, {"cosine", p.cosine}});
        }
        j["per_pair"] = std::move(rows);
    }
    j["config_digest"] = r.config_digest;
    if (!r.split.empty()) {
        j["split"] = r.split;
    }
    return j;
}

/// Options every subcommand understands.
struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration supplying defaults")
            ->check(CLI::ExistingFile);
        seed_opt = sub->add_option("--seed", seed, "Seed for every seeded stage (overrides config)");
    }

    RunConfig load() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed_opt && seed_opt->count()) {
            cfg.seed = seed;
        }
        return cfg;
    }
};

/// Knn flags that can override the "knn" config section.
struct KnnFlags {
    std::size_t k = 5;
    double distance_dim = 2.0;
    double delta = 1e-6;
    double coef = 1.0;
    std::string space = "text";
    CLI::Option *k_opt, *dd_opt, *delta_opt, *coef_opt, *space_opt;

    void attach(CLI::App* sub) {
        k_opt = sub->add_option("--k", k, "Number of neighbours")->capture_default_str();
        dd_opt = sub->add_option("--distance-dim", distance_dim, "Exponent on the neighbour distance")
                     ->capture_default_str();
        delta_opt = sub->add_option("--delta", delta, "Stabiliser added to the powered distance")
                        ->capture_default_str();
        coef_opt = sub->add_option("--coef", coef, "Weight numerator")->capture_default_str();
        space_opt = sub->add_option("--space", space, "Search space: text or image")->capture_default_str();
    }

    void apply(KnnConfig& c) const {
        if (k_opt->count()) c.k = k;
        if (dd_opt->count()) c.distance_dim = distance_dim;
        if (delta_opt->count()) c.delta = delta;
        if (coef_opt->count()) c.coef = coef;
        if (space_opt->count()) c.index_space = parse_field(space, "--space");
        c.validate();
    }
};

struct HeadFlags {
    TrainConfig defaults;
    double lr_fc = defaults.lr_fc;
    double lr_vision = defaults.lr_vision;
    std::size_t epochs = defaults.epochs;
    std::size_t batch_size = defaults.batch_size;
    std::size_t hidden = defaults.hidden_dim;
    bool adapter = false;
    bool train_proj = false;
    bool freeze_alpha = false;
    double eps_ln = defaults.eps_ln;
    CLI::Option *lr_fc_opt, *lr_vision_opt, *epochs_opt, *batch_opt, *hidden_opt, *adapter_opt, *proj_opt,
        *freeze_opt, *eps_opt;

    void attach(CLI::App* sub) {
        lr_fc_opt = sub->add_option("--lr-fc", lr_fc, "Learning rate of the new layers")->capture_default_str();
        lr_vision_opt =
            sub->add_option("--lr-vision", lr_vision, "Learning rate of the input adapter")->capture_default_str();
        epochs_opt = sub->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
        batch_opt = sub->add_option("--batch-size", batch_size, "Minibatch size")->capture_default_str();
        hidden_opt = sub->add_option("--hidden", hidden, "Hidden width (0 = text dimension)")->capture_default_str();
        adapter_opt = sub->add_flag("--adapter", adapter, "Train a linear adapter on the image embedding");
        proj_opt = sub->add_flag("--train-proj", train_proj, "Train the hidden-to-text projection");
        freeze_opt = sub->add_flag("--freeze-alpha", freeze_alpha, "Keep the fusion weight at its initial value");
        eps_opt = sub->add_option("--eps-ln", eps_ln, "Layer-norm epsilon")->capture_default_str();
    }

    void apply(TrainConfig& c) const {
        if (lr_fc_opt->count()) c.lr_fc = lr_fc;
        if (lr_vision_opt->count()) c.lr_vision = lr_vision;
        if (epochs_opt->count()) c.epochs = epochs;
        if (batch_opt->count()) c.batch_size = batch_size;
        if (hidden_opt->count()) c.hidden_dim = hidden;
        if (adapter_opt->count()) c.train_adapter = adapter;
        if (proj_opt->count()) c.train_proj = train_proj;
        if (freeze_opt->count()) c.freeze_alpha = freeze_alpha;
        if (eps_opt->count()) c.eps_ln = eps_ln;
    }
};

Matrix predict_a(const std::string& head_path, const PairedDataset& data) {
    const HeadParams head = load_head(head_path);
    require_same_dim(data.dim_img(), head.dim_img, "head input");
    return head_predict(head, data);
}

Matrix predict_b(const std::string& index_path, const PairedDataset& data) {
    const KnnIndex index = load_index(index_path);
    require_same_dim(data.dim_img(), index.key_dim(), "knn query");
    return knn_predict_batch(index, data.image_matrix());
}

using Action = std::function<void()>;

} // namespace

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"embedfuse: image-to-text embedding regression toolkit"};
    app.name("embedfuse");
    app.require_subcommand(1);

    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker cap for batch operations (0 = EMBEDFUSE_THREADS or all cores)")
        ->capture_default_str();

    Action action;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic paired dataset");
    Common synth_common;
    synth_common.attach(synth);
    SynthConfig synth_cfg;
    std::uint32_t synth_dim = 0;
    std::string synth_out;
    synth->add_option("--count", synth_cfg.count, "Number of pairs")->capture_default_str();
    auto* synth_dim_opt = synth->add_option("--dim", synth_dim, "Set both image and text dimension");
    auto* synth_dimg_opt = synth->add_option("--dim-img", synth_cfg.dim_img, "Image dimension")->capture_default_str();
    auto* synth_dtxt_opt = synth->add_option("--dim-txt", synth_cfg.dim_txt, "Text dimension")->capture_default_str();
    synth->add_option("--sigma", synth_cfg.noise_sigma, "Noise standard deviation")->capture_default_str();
    synth->add_option("--out", synth_out, "Output EMBP file")->required();
    synth->callback([&] {
        action = [&] {
            const RunConfig cfg = synth_common.load();
            synth_cfg.seed = cfg.seed;
            if (synth_dim_opt->count()) {
                if (!synth_dimg_opt->count()) synth_cfg.dim_img = synth_dim;
                if (!synth_dtxt_opt->count()) synth_cfg.dim_txt = synth_dim;
            }
            validate_as("--count", [&] {
                if (synth_cfg.count < 1) throw ConfigError("count", "must be at least 1");
            });
            synth_cfg.validate();
            const auto data = generate_synthetic(synth_cfg);
            save_pairs(data.dataset, synth_out);
            ojson j{{"count", data.dataset.size()},
                    {"dim_img", synth_cfg.dim_img},
                    {"dim_txt", synth_cfg.dim_txt},
                    {"sigma", synth_cfg.noise_sigma},
                    {"seed", synth_cfg.seed}};
            out << j.dump() << '\n';
        };
    });

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Validate an EMBP file and print header statistics");
    std::string inspect_in;
    inspect->add_option("--in", inspect_in, "EMBP file")->required()->check(CLI::ExistingFile);
    inspect->callback([&] {
        action = [&] {
            const std::string bytes = read_bytes(inspect_in);
            std::istringstream stream(bytes);
            const PairedDataset d = read_pairs(stream);
            auto norm_stats = [&](bool text) {
                if (d.empty()) {
                    return ojson(nullptr);
                }
                double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
                for (const auto& r : d.records()) {
                    const double n = l2_norm(to_vector(text ? r.text : r.image));
                    lo = std::min(lo, n);
                    hi = std::max(hi, n);
                    sum += n;
                }
                return ojson{{"min", lo}, {"mean", sum / static_cast<double>(d.size())}, {"max", hi}};
            };
            ojson j;
            j["format"] = "EMBP";
            j["version"] = kEmbpVersion;
            j["dim_img"] = d.dim_img();
            j["dim_txt"] = d.dim_txt();
            j["count"] = d.size();
            j["bytes"] = bytes.size();
            j["image_norm"] = norm_stats(false);
            j["text_norm"] = norm_stats(true);
            j["valid"] = true;
            out << j.dump() << '\n';
        };
    });

    // split
    auto* split = app.add_subcommand("split", "Seeded train/validation/test split");
    Common split_common;
    split_common.attach(split);
    std::string split_in, split_train, split_val, split_test, split_fractions = "0.8,0.1,0.1";
    split->add_option("--in", split_in, "Input EMBP")->required()->check(CLI::ExistingFile);
    split->add_option("--train-out", split_train, "Training split output")->required();
    split->add_option("--val-out", split_val, "Validation split output")->required();
    split->add_option("--test-out", split_test, "Test split output")->required();
    split->add_option("--fractions", split_fractions, "train,val,test fractions")->capture_default_str();
    split->callback([&] {
        action = [&] {
            const RunConfig cfg = split_common.load();
            const auto f = parse_list(split_fractions, "--fractions");
            if (f.size() != 3) {
                throw ConfigError("--fractions", "expected three values");
            }
            const PairedDataset d = load_pairs(split_in);
            const DatasetSplit parts =
                validate_as("--fractions", [&] { return split_dataset(d, {f[0], f[1], f[2]}, cfg.seed); });
            save_pairs(parts.train, split_train);
            save_pairs(parts.val, split_val);
            save_pairs(parts.test, split_test);
            out << ojson{{"train", parts.train.size()}, {"val", parts.val.size()}, {"test", parts.test.size()}}.dump()
                << '\n';
        };
    });

    // filter
    auto* filter = app.add_subcommand("filter", "Drop near-duplicate pairs by cosine similarity");
    Common filter_common;
    filter_common.attach(filter);
    std::string filter_in, filter_out, filter_report, filter_field = "text";
    double filter_threshold = 0.85;
    filter->add_option("--in", filter_in, "Input EMBP")->required()->check(CLI::ExistingFile);
    filter->add_option("--out", filter_out, "Filtered EMBP output")->required();
    filter->add_option("--report", filter_report, "JSON report output");
    auto* threshold_opt = filter->add_option("--threshold", filter_threshold, "Similarity threshold in (0, 1]")
                              ->capture_default_str();
    auto* field_opt = filter->add_option("--field", filter_field, "Compared embedding: text or image")
                          ->capture_default_str();
    filter->callback([&] {
        action = [&] {
            RunConfig cfg = filter_common.load();
            if (threshold_opt->count()) cfg.filter.threshold = filter_threshold;
            if (field_opt->count()) cfg.filter.field = parse_field(filter_field, "--field");
            validate_as("--threshold", [&] { cfg.filter.validate(); });
            const PairedDataset d = load_pairs(filter_in);
            const FilterResult result = filter_by_similarity(d, cfg.filter);
            ojson report;
            report["threshold"] = result.report.threshold;
            report["field"] = field_name(cfg.filter.field);
            report["kept"] = result.report.kept_count;
            report["removed"] = result.report.removed_count;
            report["removed_ids"] = result.report.removed_ids;
            save_pairs(result.kept, filter_out);
            if (!filter_report.empty()) {
                write_text(filter_report, report.dump(2) + "\n");
            }
            out << ojson{{"kept", result.report.kept_count}, {"removed", result.report.removed_count}}.dump()
                << '\n';
        };
    });

    // train-head
    auto* train = app.add_subcommand("train-head", "Train the projection head");
    Common train_common;
    train_common.attach(train);
    HeadFlags head_flags;
    head_flags.attach(train);
    std::string train_in, val_in, head_out, history_out;
    train->add_option("--train", train_in, "Training EMBP")->required()->check(CLI::ExistingFile);
    train->add_option("--val", val_in, "Validation EMBP (best epoch is kept)")->check(CLI::ExistingFile);
    train->add_option("--out", head_out, "HEAD parameter file output")->required();
    train->add_option("--history", history_out, "JSON-lines training history output");
    train->callback([&] {
        action = [&] {
            RunConfig cfg = train_common.load();
            head_flags.apply(cfg.head);
            cfg.head.seed = cfg.seed;
            validate_as("head", [&] { cfg.head.validate(); });
            const PairedDataset train_set = load_pairs(train_in);
            const PairedDataset val_set =
                val_in.empty() ? PairedDataset(train_set.dim_img(), train_set.dim_txt()) : load_pairs(val_in);
            const TrainResult result = train_head(cfg.head, train_set, val_set);
            for (const auto& w : result.warnings) {
                err << ojson{{"warning", w}}.dump() << '\n';
            }
            std::string history;
            for (const auto& r : result.history) {
                ojson line{{"epoch", r.epoch}, {"train_loss", r.train_loss}};
                line["val_avg_cossim"] = r.val_avg_cossim ? ojson(*r.val_avg_cossim) : ojson(nullptr);
                history += line.dump() + "\n";
            }
            save_head(result.params, head_out);
            if (!history_out.empty()) {
                write_text(history_out, history);
            }
            const auto& best = result.history[result.best_epoch - 1];
            ojson summary{{"epochs", result.history.size()}, {"best_epoch", result.best_epoch}};
            summary["best_val_avg_cossim"] = best.val_avg_cossim ? ojson(*best.val_avg_cossim) : ojson(nullptr);
            summary["alpha_fusion"] = result.params.alpha();
            out << summary.dump() << '\n';
        };
    });

    // knn-fit
    auto* knn = app.add_subcommand("knn-fit", "Build the KNN index from training pairs");
    Common knn_common;
    knn_common.attach(knn);
    KnnFlags knn_flags;
    knn_flags.attach(knn);
    std::string knn_in, knn_out;
    knn->add_option("--train", knn_in, "Training EMBP")->required()->check(CLI::ExistingFile);
    knn->add_option("--out", knn_out, "Index EMBP output (sidecar written to <out>.json)")->required();
    knn->callback([&] {
        action = [&] {
            RunConfig cfg = knn_common.load();
            validate_as("knn", [&] { knn_flags.apply(cfg.knn); });
            const PairedDataset train_set = load_pairs(knn_in);
            KnnIndex index = [&] {
                try {
                    return knn_fit(train_set, cfg.knn);
                } catch (const ConfigError& e) {
                    throw ConfigError("--" + e.field(), e.what());
                }
            }();
            save_index(index, knn_out);
            out << ojson{{"size", index.size()}, {"k", cfg.knn.k}, {"index_space", field_name(cfg.knn.index_space)}}
                       .dump()
                << '\n';
        };
    });

    // predict
    auto* predict = app.add_subcommand("predict", "Predict text embeddings with model a, b or the ensemble");
    Common predict_common;
    predict_common.attach(predict);
    std::string model, predict_in, predict_out, head_path, index_path;
    double alpha = 0.5;
    bool raw_blend = false;
    predict->add_option("--model", model, "a (head), b (knn) or ensemble")
        ->required()
        ->check(CLI::IsMember({"a", "b", "ensemble"}));
    predict->add_option("--in", predict_in, "Input EMBP (image embeddings are the queries)")
        ->required()
        ->check(CLI::ExistingFile);
    predict->add_option("--out", predict_out, "Prediction EMBP output (text slot holds predictions)")->required();
    predict->add_option("--head", head_path, "HEAD file for models a and ensemble")->check(CLI::ExistingFile);
    predict->add_option("--index", index_path, "Index EMBP for models b and ensemble")->check(CLI::ExistingFile);
    auto* alpha_opt = predict->add_option("--alpha", alpha, "Ensemble weight of model a (overrides config)");
    auto* raw_opt = predict->add_flag("--raw-blend", raw_blend, "Blend unnormalised predictions");
    predict->callback([&] {
        action = [&] {
            RunConfig cfg = predict_common.load();
            if (alpha_opt->count()) cfg.ensemble.alpha_ens = alpha;
            if (raw_opt->count()) cfg.ensemble.normalize_inputs = !raw_blend;
            validate_as("--alpha", [&] { cfg.ensemble.validate(); });
            const bool need_head = model != "b";
            const bool need_index = model != "a";
            if (need_head && head_path.empty()) {
                throw ConfigError("--head", "required for model " + model);
            }
            if (need_index && index_path.empty()) {
                throw ConfigError("--index", "required for model " + model);
            }
            const PairedDataset data = load_pairs(predict_in);
            Matrix preds;
            if (model == "a") {
                preds = predict_a(head_path, data);
            } else if (model == "b") {
                preds = predict_b(index_path, data);
            } else {
                preds = blend_batch(predict_a(head_path, data), predict_b(index_path, data), cfg.ensemble);
            }
            save_pairs(make_dataset(data.ids(), data.image_matrix(), preds), predict_out);
            ojson summary{{"model", model}, {"count", data.size()}};
            if (model == "ensemble") {
                summary["alpha_ens"] = cfg.ensemble.alpha_ens;
            }
            out << summary.dump() << '\n';
        };
    });

    // sweep-alpha
    auto* sweep = app.add_subcommand("sweep-alpha", "Grid-search the ensemble weight on validation data");
    Common sweep_common;
    sweep_common.attach(sweep);
    std::string sweep_in, sweep_a, sweep_b, sweep_truth, sweep_out, run_config_out, grid_text;
    bool sweep_raw = false;
    sweep->add_option("--in", sweep_in, "Validation EMBP; predictions are computed from --head and --index")
        ->check(CLI::ExistingFile);
    sweep->add_option("--head", head_path, "HEAD file (with --in)")->check(CLI::ExistingFile);
    sweep->add_option("--index", index_path, "Index EMBP (with --in)")->check(CLI::ExistingFile);
    sweep->add_option("--a-pred", sweep_a, "Model a prediction EMBP")->check(CLI::ExistingFile);
    sweep->add_option("--b-pred", sweep_b, "Model b prediction EMBP")->check(CLI::ExistingFile);
    sweep->add_option("--truth", sweep_truth, "Ground-truth EMBP (with --a-pred/--b-pred)")->check(CLI::ExistingFile);
    sweep->add_option("--out", sweep_out, "JSON array of {alpha, avg_cossim}")->required();
    sweep->add_option("--run-config-out", run_config_out, "Run configuration JSON with the chosen alpha");
    auto* grid_opt = sweep->add_option("--grid", grid_text, "Comma-separated alphas (default 0,0.05,...,1)");
    auto* sweep_raw_opt = sweep->add_flag("--raw-blend", sweep_raw, "Blend unnormalised predictions");
    sweep->callback([&] {
        action = [&] {
            RunConfig cfg = sweep_common.load();
            if (grid_opt->count()) cfg.alpha_grid = parse_list(grid_text, "--grid");
            if (sweep_raw_opt->count()) cfg.ensemble.normalize_inputs = !sweep_raw;
            const bool from_files = !sweep_a.empty() || !sweep_b.empty() || !sweep_truth.empty();
            const bool from_models = !sweep_in.empty() || !head_path.empty() || !index_path.empty();
            if (from_files == from_models) {
                throw ConfigError("--in", "give either --in/--head/--index or --a-pred/--b-pred/--truth");
            }
            if (from_files && (sweep_a.empty() || sweep_b.empty() || sweep_truth.empty())) {
                throw ConfigError("--a-pred", "--a-pred, --b-pred and --truth go together");
            }
            if (from_models && (sweep_in.empty() || head_path.empty() || index_path.empty())) {
                throw ConfigError("--in", "--in, --head and --index go together");
            }

            Matrix a_preds, b_preds, targets;
            if (from_files) {
                const PairedDataset truth = load_pairs(sweep_truth);
                const PairedDataset a = load_pairs(sweep_a);
                const PairedDataset b = load_pairs(sweep_b);
                require_aligned_ids(a, truth, "--a-pred");
                require_aligned_ids(b, truth, "--b-pred");
                a_preds = a.text_matrix();
                b_preds = b.text_matrix();
                targets = truth.text_matrix();
            } else {
                const PairedDataset data = load_pairs(sweep_in);
                a_preds = predict_a(head_path, data);
                b_preds = predict_b(index_path, data);
                targets = data.text_matrix();
            }
            const SweepResult result = validate_as("--grid", [&] {
                return sweep_alpha(a_preds, b_preds, targets, cfg.alpha_grid, cfg.ensemble.normalize_inputs);
            });

            ojson points = ojson::array();
            double a_score = 0.0, b_score = 0.0;
            for (const auto& p : result.points) {
                points.push_back({{"alpha", p.alpha}, {"avg_cossim", p.avg_cossim}});
                if (p.alpha == 1.0) a_score = p.avg_cossim;
                if (p.alpha == 0.0) b_score = p.avg_cossim;
            }
            cfg.ensemble.alpha_ens = result.best_alpha;
            write_text(sweep_out, points.dump(2) + "\n");
            if (!run_config_out.empty()) {
                write_text(run_config_out, run_config_to_json(cfg));
            }
            out << ojson{{"best_alpha", result.best_alpha},
                         {"best_avg_cossim", result.best_score},
                         {"model_a_avg_cossim", a_score},
                         {"model_b_avg_cossim", b_score}}
                       .dump()
                << '\n';
        };
    });

    // eval
    auto* eval = app.add_subcommand("eval", "Average cosine similarity of predictions against ground truth");
    std::string eval_pred, eval_truth, eval_out, eval_split;
    bool per_pair = false;
    eval->add_option("--pred", eval_pred, "Prediction EMBP")->required()->check(CLI::ExistingFile);
    eval->add_option("--truth", eval_truth, "Ground-truth EMBP")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "Also write the report to this file");
    eval->add_option("--split", eval_split, "Split name recorded in the report");
    eval->add_flag("--per-pair", per_pair, "Include per-pair cosines");
    eval->callback([&] {
        action = [&] {
            const std::string pred_bytes = read_bytes(eval_pred);
            const std::string truth_bytes = read_bytes(eval_truth);
            std::istringstream ps(pred_bytes), ts(truth_bytes);
            const PairedDataset pred = read_pairs(ps);
            const PairedDataset truth = read_pairs(ts);
            if (pred.size() != truth.size()) {
                throw DataError("eval: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(truth.size()) + " ground-truth pairs");
            }
            require_aligned_ids(pred, truth, "eval");
            EvalReport report =
                avg_cos_sim(pred.text_matrix(), truth.text_matrix(), EvalOptions{per_pair, truth.ids()});
            report.config_digest = fnv1a_hex(fnv1a_hex(pred_bytes) + fnv1a_hex(truth_bytes) +
                                             (per_pair ? "per_pair" : "") + eval_split);
            report.split = eval_split;
            const std::string text = report_json(report).dump();
            if (!eval_out.empty()) {
                write_text(eval_out, text + "\n");
            }
            out << text << '\n';
        };
    });

    // bench
    auto* bench = app.add_subcommand("bench", "Time batched KNN prediction on synthetic data");
    Common bench_common;
    bench_common.attach(bench);
    KnnFlags bench_knn;
    bench_knn.attach(bench);
    std::size_t bench_corpus = 2000, bench_queries = 200, bench_repeats = 3;
    std::uint32_t bench_dim = 64;
    bench->add_option("--corpus", bench_corpus, "Corpus size")->capture_default_str();
    bench->add_option("--queries", bench_queries, "Query count")->capture_default_str();
    bench->add_option("--dim", bench_dim, "Embedding dimension")->capture_default_str();
    bench->add_option("--repeats", bench_repeats, "Timed repetitions (best is reported)")->capture_default_str();
    bench->callback([&] {
        action = [&] {
            RunConfig cfg = bench_common.load();
            validate_as("knn", [&] { bench_knn.apply(cfg.knn); });
            if (bench_repeats < 1) {
                throw ConfigError("--repeats", "must be at least 1");
            }
            SynthConfig corpus_cfg{bench_corpus, bench_dim, bench_dim, 0.1, cfg.seed};
            SynthConfig query_cfg{bench_queries, bench_dim, bench_dim, 0.1, cfg.seed + 1};
            validate_as("--corpus", [&] { corpus_cfg.validate(); });
            validate_as("--queries", [&] { query_cfg.validate(); });
            const KnnIndex index = [&] {
                try {
                    return knn_fit(generate_synthetic(corpus_cfg).dataset, cfg.knn);
                } catch (const ConfigError& e) {
                    throw ConfigError("--" + e.field(), e.what());
                }
            }();
            const Matrix queries = generate_synthetic(query_cfg).dataset.image_matrix();
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < bench_repeats; ++r) {
                const auto start = std::chrono::steady_clock::now();
                const Matrix preds = knn_predict_batch(index, queries);
                const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
                best = std::min(best, took.count());
                if (preds.rows() != queries.rows()) {
                    throw Error("bench: unexpected prediction count");
                }
            }
            out << ojson{{"corpus", bench_corpus},
                         {"queries", bench_queries},
                         {"dim", bench_dim},
                         {"k", cfg.knn.k},
                         {"threads", thread_count()},
                         {"seconds", best},
                         {"queries_per_sec", static_cast<double>(bench_queries) / best}}
                       .dump()
                << '\n';
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage", e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        print_error(err, e.kind(), e.what(), e.field());
        return kExitUsage;
    }

    set_thread_count(threads);
    try {
        if (action) {
            action();
        }
    } catch (const ConfigError& e) {
        print_error(err, e.kind(), e.what(), e.field());
        set_thread_count(0);
        return kExitUsage;
    } catch (const Error& e) {
        print_error(err, e.kind(), e.what());
        set_thread_count(0);
        return kExitRuntime;
    } catch (const std::exception& e) {
        print_error(err, "internal", e.what());
        set_thread_count(0);
        return kExitRuntime;
    }
    set_thread_count(0);
    return kExitOk;
}

} // namespace embedfuse::cli

#include "embedfuse/train.hpp"

#include "embedfuse/error.hpp"
#include "embedfuse/eval.hpp"
#include "embedfuse/rng.hpp"

#include <cmath>
#include <numeric>

namespace embedfuse {

std::vector<std::string> TrainConfig::validate() const {
    if (!(lr_fc >= 0.0) || !std::isfinite(lr_fc)) {
        throw ConfigError("lr_fc", "must be finite and non-negative");
    }
    if (!(lr_vision >= 0.0) || !std::isfinite(lr_vision)) {
        throw ConfigError("lr_vision", "must be finite and non-negative");
    }
    if (epochs < 1) {
        throw ConfigError("epochs", "must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size", "must be at least 1");
    }
    if (!(eps_ln > 0.0)) {
        throw ConfigError("eps_ln", "must be positive");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) {
        throw ConfigError("adam_beta1", "must lie in [0, 1)");
    }
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("adam_beta2", "must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) {
        throw ConfigError("adam_eps", "must be positive");
    }
    std::vector<std::string> warnings;
    if (lr_vision > lr_fc) {
        warnings.push_back("lr_vision exceeds lr_fc; the adapter will move faster than the new layers");
    }
    return warnings;
}

double mean_loss(const HeadParams& params, const PairedDataset& dataset) {
    if (dataset.empty()) {
        throw DataError("mean_loss: empty dataset");
    }
    const Matrix preds = head_predict(params, dataset);
    double sum = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        sum += cosine_loss(preds.row(i), to_vector(dataset[i].text));
    }
    return sum / static_cast<double>(dataset.size());
}

namespace {

struct AdamState {
    HeadParams m;
    HeadParams v;
    std::size_t step = 0;
};

bool is_trainable(std::string_view name, ParamGroup group, const TrainConfig& config) {
    if (group == ParamGroup::kVision) {
        return config.train_adapter;
    }
    if (name == "proj") {
        return config.train_proj;
    }
    if (name == "alpha_fusion_logit") {
        return !config.freeze_alpha;
    }
    return true;
}

void adam_step(HeadParams& params, HeadParams& grads, AdamState& state, const TrainConfig& config) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.adam_beta1, t);
    const double correction2 = 1.0 - std::pow(config.adam_beta2, t);

    std::vector<ParamView> p_views;
    std::vector<ParamView> g_views;
    std::vector<ParamView> m_views;
    std::vector<ParamView> v_views;
    for_each_param(params, [&](const ParamView& v) { p_views.push_back(v); });
    for_each_param(grads, [&](const ParamView& v) { g_views.push_back(v); });
    for_each_param(state.m, [&](const ParamView& v) { m_views.push_back(v); });
    for_each_param(state.v, [&](const ParamView& v) { v_views.push_back(v); });

    for (std::size_t i = 0; i < p_views.size(); ++i) {
        const auto& p = p_views[i];
        if (!is_trainable(p.name, p.group, config)) {
            continue;
        }
        const double lr = p.group == ParamGroup::kVision ? config.lr_vision : config.lr_fc;
        auto g = g_views[i].values;
        auto m = m_views[i].values;
        auto v = v_views[i].values;
        for (std::size_t k = 0; k < p.values.size(); ++k) {
            m[k] = config.adam_beta1 * m[k] + (1.0 - config.adam_beta1) * g[k];
            v[k] = config.adam_beta2 * v[k] + (1.0 - config.adam_beta2) * g[k] * g[k];
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            p.values[k] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        }
    }
}

} // namespace

TrainResult train_head(const TrainConfig& config, HeadParams initial, const PairedDataset& train_set,
                       const PairedDataset& val_set) {
    TrainResult result;
    result.warnings = config.validate();
    if (train_set.empty()) {
        throw DataError("train_head: empty training set");
    }
    initial.validate();
    require_same_dim(train_set.dim_img(), initial.dim_img, "train_head image dim");
    require_same_dim(train_set.dim_txt(), initial.dim_txt, "train_head text dim");
    if (!val_set.empty()) {
        require_same_dim(val_set.dim_img(), initial.dim_img, "train_head validation image dim");
        require_same_dim(val_set.dim_txt(), initial.dim_txt, "train_head validation text dim");
    }
    if (config.train_adapter && !initial.adapter) {
        throw ConfigError("train_adapter", "head has no adapter to train");
    }

    HeadParams params = std::move(initial);
    AdamState adam{HeadParams::zeros_like(params), HeadParams::zeros_like(params), 0};
    HeadParams grads = HeadParams::zeros_like(params);

    const std::size_t n = train_set.size();
    const Matrix images = train_set.image_matrix();
    const Matrix texts = train_set.text_matrix();
    const Matrix val_texts = val_set.text_matrix();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(config.seed ^ 0x9E3779B97F4A7C15ULL);

    double best_score = -std::numeric_limits<double>::infinity();
    result.params = params;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), shuffler);
        double loss_sum = 0.0;

        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            grads = HeadParams::zeros_like(params);
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                const ForwardTrace trace = head_forward(params, images.row(i));
                const double loss = cosine_loss(trace.final_text_emb, texts.row(i));
                if (!std::isfinite(loss)) {
                    throw DivergenceError(epoch, "training diverged in epoch " + std::to_string(epoch));
                }
                loss_sum += loss;
                head_backward_accumulate(trace, params, texts.row(i), grads);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for_each_param(grads, [scale](const ParamView& v) {
                for (double& g : v.values) {
                    g *= scale;
                }
            });
            adam_step(params, grads, adam, config);
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(n);
        if (!std::isfinite(record.train_loss)) {
            throw DivergenceError(epoch, "training diverged in epoch " + std::to_string(epoch));
        }

        if (!val_set.empty()) {
            const double score = avg_cos_sim(head_predict(params, val_set), val_texts).avg_cossim;
            if (!std::isfinite(score)) {
                throw DivergenceError(epoch, "validation score is not finite in epoch " + std::to_string(epoch));
            }
            record.val_avg_cossim = score;
            if (score > best_score) {
                best_score = score;
                result.params = params;
                result.best_epoch = epoch;
            }
        } else {
            result.params = params;
            result.best_epoch = epoch;
        }
        result.history.push_back(record);
    }
    return result;
}

TrainResult train_head(const TrainConfig& config, const PairedDataset& train_set, const PairedDataset& val_set) {
    config.validate();
    HeadInit init;
    init.dim_img = train_set.dim_img();
    init.dim_txt = train_set.dim_txt();
    init.hidden = config.hidden_dim;
    init.with_adapter = config.train_adapter;
    init.eps_ln = config.eps_ln;
    init.seed = config.seed;
    return train_head(config, init_head(init), train_set, val_set);
}

} // namespace embedfuse

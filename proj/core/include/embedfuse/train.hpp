#ifndef EMBEDFUSE_TRAIN_HPP
#define EMBEDFUSE_TRAIN_HPP

#include "embedfuse/dataset.hpp"
#include "embedfuse/head.hpp"

#include <optional>
#include <string>
#include <vector>

namespace embedfuse {

struct TrainConfig {
    /// Step size for fc1, fc2, both norms, the fusion logit and (if trained) proj.
    double lr_fc = 1e-3;
    /// Step size for the adapter.
    double lr_vision = 1e-5;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    /// Zero selects dim_txt.
    std::size_t hidden_dim = 0;
    bool train_adapter = false;
    bool train_proj = false;
    bool freeze_alpha = false;
    double eps_ln = 1e-5;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    /// Throws ConfigError; returns warnings for legal but suspicious settings.
    std::vector<std::string> validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    /// Mean cosine loss over the epoch's training samples, measured before each step.
    double train_loss = 0.0;
    /// Empty when there is no validation set.
    std::optional<double> val_avg_cossim;
};

struct TrainResult {
    /// Parameters of the epoch with the best validation score (last epoch without validation data).
    HeadParams params;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    std::vector<std::string> warnings;
};

/// Mean cosine loss of `params` over a dataset.
double mean_loss(const HeadParams& params, const PairedDataset& dataset);

/**
 * @brief Minibatch Adam training of the projection head.
 *
 * Deterministic given the config: parameters come from init_head with
 * `config.seed`, and each epoch reshuffles the training order from a stream
 * seeded with the same value. Gradients are averaged over the batch.
 *
 * Throws DataError on an empty training set and DivergenceError when the loss
 * becomes non-finite.
 */
TrainResult train_head(const TrainConfig& config, const PairedDataset& train_set, const PairedDataset& val_set);

/// Continues from existing parameters instead of a fresh init.
TrainResult train_head(const TrainConfig& config, HeadParams initial, const PairedDataset& train_set,
                       const PairedDataset& val_set);

} // namespace embedfuse

#endif

#ifndef EMBEDFUSE_TOOLS_RUN_CONFIG_HPP
#define EMBEDFUSE_TOOLS_RUN_CONFIG_HPP

#include "embedfuse/dedup.hpp"
#include "embedfuse/ensemble.hpp"
#include "embedfuse/knn.hpp"
#include "embedfuse/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace embedfuse::cli {

/// Settings shared by every subcommand. Loaded from a JSON file with the
/// sections "filter", "head", "knn" and "ensemble" plus a top-level "seed";
/// missing keys keep their defaults and unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    FilterConfig filter;
    TrainConfig head;
    KnnConfig knn;
    EnsembleConfig ensemble;
    std::vector<double> alpha_grid = default_alpha_grid();
};

/// Throws ConfigError naming the offending field.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

} // namespace embedfuse::cli

#endif

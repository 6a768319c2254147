#ifndef EMBEDFUSE_EVAL_HPP
#define EMBEDFUSE_EVAL_HPP

#include "embedfuse/vector_ops.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace embedfuse {

struct PairScore {
    std::uint64_t id = 0;
    double cosine = 0.0;
};

struct EvalReport {
    std::size_t n_pairs = 0;
    double avg_cossim = 0.0;
    /// Filled only when requested.
    std::optional<std::vector<PairScore>> per_pair;
    std::string config_digest;
    /// Name of the evaluated split, if known.
    std::string split;
};

struct EvalOptions {
    bool per_pair = false;
    /// Row ids for error messages and per-pair output; row index when empty.
    std::vector<std::uint64_t> ids;
};

/**
 * Mean over rows of cosine_similarity(target_i, pred_i). The per-row cosines
 * are computed in parallel and summed in row order with Neumaier
 * compensation. A zero-norm row raises DataError naming the row id.
 */
EvalReport avg_cos_sim(const Matrix& preds, const Matrix& targets, const EvalOptions& options = {});

/// Compensated sum in the given order.
double compensated_sum(std::span<const double> values);

/// 64-bit FNV-1a of `bytes`, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

} // namespace embedfuse

#endif

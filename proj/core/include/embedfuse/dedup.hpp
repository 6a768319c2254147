#ifndef EMBEDFUSE_DEDUP_HPP
#define EMBEDFUSE_DEDUP_HPP

#include "embedfuse/dataset.hpp"

#include <cstdint>
#include <vector>

namespace embedfuse {

enum class EmbeddingField { kText, kImage };

struct FilterConfig {
    /// Records whose cosine to an already kept record exceeds this are dropped.
    double threshold = 0.85;
    EmbeddingField field = EmbeddingField::kText;

    void validate() const;
};

struct FilterReport {
    std::size_t kept_count = 0;
    std::size_t removed_count = 0;
    std::vector<std::uint64_t> removed_ids;
    double threshold = 0.0;
};

struct FilterResult {
    PairedDataset kept;
    FilterReport report;
};

/**
 * @brief Greedy near-duplicate removal.
 *
 * Scans records in dataset order and keeps a record iff the cosine similarity
 * of its selected embedding to every previously kept record is <= threshold.
 * The similarity check against the kept set is spread over worker threads; the
 * keep/remove sequence itself is serial, so the output does not depend on the
 * thread count.
 *
 * Throws DataError naming the record id if a selected embedding has zero norm.
 */
FilterResult filter_by_similarity(const PairedDataset& dataset, const FilterConfig& config);

} // namespace embedfuse

#endif

#include "embedfuse/dedup.hpp"

#include "embedfuse/error.hpp"
#include "embedfuse/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

namespace embedfuse {

void FilterConfig::validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ConfigError("threshold", "must lie in (0, 1]");
    }
}

namespace {

// Below this many kept rows the scan is cheaper than waking threads.
constexpr std::size_t kParallelScanMin = 4096;

} // namespace

FilterResult filter_by_similarity(const PairedDataset& dataset, const FilterConfig& config) {
    config.validate();
    const bool use_text = config.field == EmbeddingField::kText;
    const std::size_t dim = use_text ? dataset.dim_txt() : dataset.dim_img();
    const std::size_t n = dataset.size();

    // Unit vectors of every record, row-major.
    std::vector<double> unit(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& src = use_text ? dataset[i].text : dataset[i].image;
        double sq = 0.0;
        for (float x : src) {
            sq += static_cast<double>(x) * x;
        }
        const double norm = std::sqrt(sq);
        if (norm == 0.0) {
            throw DataError("filter: zero-norm " + std::string(use_text ? "text" : "image") +
                            " embedding in record " + std::to_string(dataset[i].id));
        }
        for (std::size_t k = 0; k < dim; ++k) {
            unit[i * dim + k] = src[k] / norm;
        }
    }

    auto similarity = [&](std::size_t a, std::size_t b) {
        const double* pa = unit.data() + a * dim;
        const double* pb = unit.data() + b * dim;
        double sum = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            sum += pa[k] * pb[k];
        }
        return std::clamp(sum, -1.0, 1.0);
    };

    std::vector<std::size_t> kept;
    FilterReport report;
    report.threshold = config.threshold;
    const std::size_t workers = thread_count();

    for (std::size_t i = 0; i < n; ++i) {
        bool duplicate = false;
        if (workers > 1 && kept.size() >= kParallelScanMin) {
            std::atomic<bool> found{false};
            parallel_for(kept.size(), [&](std::size_t begin, std::size_t end) {
                for (std::size_t j = begin; j < end && !found.load(std::memory_order_relaxed); ++j) {
                    if (similarity(i, kept[j]) > config.threshold) {
                        found.store(true, std::memory_order_relaxed);
                    }
                }
            }, workers);
            duplicate = found.load();
        } else {
            for (std::size_t j : kept) {
                if (similarity(i, j) > config.threshold) {
                    duplicate = true;
                    break;
                }
            }
        }

        if (duplicate) {
            report.removed_ids.push_back(dataset[i].id);
        } else {
            kept.push_back(i);
        }
    }

    report.kept_count = kept.size();
    report.removed_count = report.removed_ids.size();
    return {dataset.select(kept), std::move(report)};
}

} // namespace embedfuse

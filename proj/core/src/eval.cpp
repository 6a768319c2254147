#include "embedfuse/eval.hpp"

#include "embedfuse/error.hpp"
#include "embedfuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace embedfuse {

double compensated_sum(std::span<const double> values) {
    double sum = 0.0;
    double carry = 0.0;
    for (double x : values) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    return sum + carry;
}

EvalReport avg_cos_sim(const Matrix& preds, const Matrix& targets, const EvalOptions& options) {
    if (preds.rows() != targets.rows()) {
        throw DimensionError("avg_cos_sim: " + std::to_string(preds.rows()) + " predictions for " +
                             std::to_string(targets.rows()) + " targets");
    }
    if (preds.rows() == 0) {
        throw DataError("avg_cos_sim: no pairs to evaluate");
    }
    require_same_dim(preds.dim(), targets.dim(), "avg_cos_sim");
    if (!options.ids.empty() && options.ids.size() != preds.rows()) {
        throw DimensionError("avg_cos_sim: id list length differs from row count");
    }
    auto row_id = [&](std::size_t i) { return options.ids.empty() ? static_cast<std::uint64_t>(i) : options.ids[i]; };

    const std::size_t n = preds.rows();
    std::vector<double> cosines(n);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (l2_norm(targets.row(i)) == 0.0 || l2_norm(preds.row(i)) == 0.0) {
                throw DataError("avg_cos_sim: zero-norm embedding in row id " + std::to_string(row_id(i)));
            }
            cosines[i] = cosine_similarity(targets.row(i), preds.row(i));
        }
    });

    EvalReport report;
    report.n_pairs = n;
    report.avg_cossim = std::clamp(compensated_sum(cosines) / static_cast<double>(n), -1.0, 1.0);
    if (options.per_pair) {
        std::vector<PairScore> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = PairScore{row_id(i), cosines[i]};
        }
        report.per_pair = std::move(scores);
    }
    return report;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

} // namespace embedfuse

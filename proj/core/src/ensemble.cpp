#include "embedfuse/ensemble.hpp"

#include "embedfuse/error.hpp"
#include "embedfuse/eval.hpp"

#include <algorithm>
#include <cmath>

namespace embedfuse {

void EnsembleConfig::validate() const {
    if (!(alpha_ens >= 0.0 && alpha_ens <= 1.0)) {
        throw ConfigError("alpha_ens", "must lie in [0, 1]");
    }
}

Vector blend(std::span<const double> a_emb, std::span<const double> b_emb, const EnsembleConfig& config) {
    config.validate();
    require_same_dim(a_emb.size(), b_emb.size(), "blend");
    Vector a(a_emb.begin(), a_emb.end());
    Vector b(b_emb.begin(), b_emb.end());
    if (config.normalize_inputs) {
        a = l2_normalize(a);
        b = l2_normalize(b);
    }
    const double alpha = config.alpha_ens;
    Vector out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        out[k] = alpha * a[k] + (1.0 - alpha) * b[k];
    }
    return out;
}

Matrix blend_batch(const Matrix& a_preds, const Matrix& b_preds, const EnsembleConfig& config) {
    if (a_preds.rows() != b_preds.rows()) {
        throw DimensionError("blend_batch: row counts differ");
    }
    Matrix out(a_preds.rows(), a_preds.dim());
    for (std::size_t i = 0; i < a_preds.rows(); ++i) {
        const Vector row = blend(a_preds.row(i), b_preds.row(i), config);
        std::copy(row.begin(), row.end(), out.row(i).begin());
    }
    return out;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) {
        grid.push_back(i / 20.0);
    }
    return grid;
}

SweepResult sweep_alpha(const Matrix& a_preds, const Matrix& b_preds, const Matrix& targets,
                        const std::vector<double>& grid, bool normalize_inputs) {
    if (a_preds.rows() != b_preds.rows() || a_preds.rows() != targets.rows()) {
        throw DimensionError("sweep_alpha: prediction and target row counts differ");
    }
    if (grid.empty()) {
        throw ConfigError("grid", "must not be empty");
    }
    for (double alpha : grid) {
        if (!(alpha >= 0.0 && alpha <= 1.0)) {
            throw ConfigError("grid", "values must lie in [0, 1]");
        }
    }
    if (std::find(grid.begin(), grid.end(), 0.0) == grid.end() ||
        std::find(grid.begin(), grid.end(), 1.0) == grid.end()) {
        throw ConfigError("grid", "must contain 0 and 1");
    }

    SweepResult result;
    bool have_best = false;
    for (double alpha : grid) {
        const Matrix blended = blend_batch(a_preds, b_preds, EnsembleConfig{alpha, normalize_inputs});
        const double score = avg_cos_sim(blended, targets).avg_cossim;
        result.points.push_back(SweepPoint{alpha, score});
        if (!have_best || score > result.best_score || (score == result.best_score && alpha < result.best_alpha)) {
            result.best_alpha = alpha;
            result.best_score = score;
            have_best = true;
        }
    }
    return result;
}

} // namespace embedfuse

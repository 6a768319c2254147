#ifndef EMBEDFUSE_ENSEMBLE_HPP
#define EMBEDFUSE_ENSEMBLE_HPP

#include "embedfuse/vector_ops.hpp"

#include <vector>

namespace embedfuse {

struct EnsembleConfig {
    /// Weight of the head prediction; the KNN prediction gets 1 - alpha_ens.
    double alpha_ens = 0.5;
    /// L2-normalise both inputs before mixing. KNN outputs carry an arbitrary
    /// positive scale, so without this alpha_ens is not a real mixing weight.
    bool normalize_inputs = true;

    void validate() const;
};

/// alpha * a + (1 - alpha) * b, on unit vectors when normalize_inputs.
Vector blend(std::span<const double> a_emb, std::span<const double> b_emb, const EnsembleConfig& config);

Matrix blend_batch(const Matrix& a_preds, const Matrix& b_preds, const EnsembleConfig& config);

/// 0.00, 0.05, ..., 1.00 computed as i / 20.
std::vector<double> default_alpha_grid();

struct SweepPoint {
    double alpha = 0.0;
    double avg_cossim = 0.0;
};

struct SweepResult {
    double best_alpha = 0.0;
    double best_score = 0.0;
    std::vector<SweepPoint> points;
};

/**
 * Scores every grid value by the average cosine of the blended predictions
 * against the targets and returns the best one. Ties go to the smaller alpha.
 * The grid must be non-empty, within [0, 1] and contain both endpoints.
 */
SweepResult sweep_alpha(const Matrix& a_preds, const Matrix& b_preds, const Matrix& targets,
                        const std::vector<double>& grid, bool normalize_inputs = true);

} // namespace embedfuse

#endif

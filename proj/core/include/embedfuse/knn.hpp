#ifndef EMBEDFUSE_KNN_HPP
#define EMBEDFUSE_KNN_HPP

#include "embedfuse/dataset.hpp"
#include "embedfuse/dedup.hpp"
#include "embedfuse/vector_ops.hpp"

#include <cstdint>
#include <string>
#include <vector>

/**
 * @file knn.hpp
 *
 * @brief Distance-weighted k-nearest-neighbour regression from image to text embeddings.
 *
 * For a query q with neighbours i = 1..k at Euclidean distance d_i,
 *
 *     w_i  = coef / (d_i ^ distance_dim + delta)
 *     pred = (1 / k) * sum_i w_i * text_i
 *
 * The weights are deliberately not normalised; cosine-based evaluation is
 * blind to the resulting positive scale.
 */

namespace embedfuse {

struct KnnConfig {
    std::size_t k = 5;
    double distance_dim = 2.0;
    double delta = 1e-6;
    double coef = 1.0;
    /// kText searches stored text embeddings with the image query (shared
    /// embedding space); kImage searches stored image embeddings.
    EmbeddingField index_space = EmbeddingField::kText;

    void validate() const;
};

/// How the weighted neighbour sum is scaled.
enum class KnnAggregation {
    /// 1 / k, the literal formula.
    kMeanOverK,
    /// 1 / sum of weights, a proper weighted mean.
    kWeightSum,
};

struct NeighborSet {
    std::vector<std::uint64_t> ids;
    /// Non-decreasing.
    std::vector<double> distances;
    std::vector<double> weights;
    /// One row per neighbour.
    Matrix text;
};

/// coef / (distance^distance_dim + delta)
double neighbor_weight(double distance, const KnnConfig& config);

/**
 * @brief Immutable exact KNN index.
 *
 * Search is an exhaustive scan; the k best (distance, id) pairs are kept in a
 * bounded heap, so ties are resolved towards the smaller id. Squared
 * distances accumulate left to right over dimensions, and the weighted sum
 * over neighbours runs nearest first, so any query gives the same floats no
 * matter how a batch is split across threads.
 */
class KnnIndex {
public:
    KnnIndex(Matrix keys, Matrix values, std::vector<std::uint64_t> ids, KnnConfig config);

    const Matrix& keys() const { return keys_; }
    const Matrix& values() const { return values_; }
    const std::vector<std::uint64_t>& ids() const { return ids_; }
    const KnnConfig& config() const { return config_; }
    std::size_t size() const { return ids_.size(); }
    std::size_t key_dim() const { return keys_.dim(); }

    NeighborSet search(std::span<const double> query) const;

private:
    Matrix keys_;
    Matrix values_;
    std::vector<std::uint64_t> ids_;
    KnnConfig config_;
};

/// Stores the training pairs; keys are text or image embeddings per config.index_space.
KnnIndex knn_fit(const PairedDataset& train_set, const KnnConfig& config);

struct KnnPrediction {
    Vector text;
    NeighborSet neighbors;
};

KnnPrediction knn_predict(const KnnIndex& index, std::span<const double> query_image,
                          KnnAggregation aggregation = KnnAggregation::kMeanOverK);

/// Row i equals knn_predict(index, queries.row(i)).text. Parallel over queries.
Matrix knn_predict_batch(const KnnIndex& index, const Matrix& queries,
                         KnnAggregation aggregation = KnnAggregation::kMeanOverK, std::size_t threads = 0);

/// Keys in the image slot, values in the text slot.
void save_index(const KnnIndex& index, const std::string& embp_path);
/// Reads `<embp_path>` plus the `<embp_path>.json` sidecar.
KnnIndex load_index(const std::string& embp_path);

std::string knn_config_to_json(const KnnConfig& config);
KnnConfig knn_config_from_json(const std::string& text);

} // namespace embedfuse

#endif

#include "embedfuse/knn.hpp"

#include "embedfuse/error.hpp"
#include "embedfuse/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

namespace embedfuse {

void KnnConfig::validate() const {
    if (k < 1) {
        throw ConfigError("k", "must be at least 1");
    }
    if (!std::isfinite(distance_dim)) {
        throw ConfigError("distance_dim", "must be finite");
    }
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw ConfigError("delta", "must be positive");
    }
    if (!(coef > 0.0) || !std::isfinite(coef)) {
        throw ConfigError("coef", "must be positive");
    }
}

double neighbor_weight(double distance, const KnnConfig& config) {
    if (!(distance >= 0.0)) {
        throw DataError("neighbor_weight: distance must be non-negative");
    }
    return config.coef / (std::pow(distance, config.distance_dim) + config.delta);
}

KnnIndex::KnnIndex(Matrix keys, Matrix values, std::vector<std::uint64_t> ids, KnnConfig config)
    : keys_(std::move(keys)), values_(std::move(values)), ids_(std::move(ids)), config_(config) {
    config_.validate();
    if (keys_.rows() != values_.rows() || keys_.rows() != ids_.size()) {
        throw DimensionError("knn index: keys, values and ids differ in length");
    }
    if (ids_.size() < config_.k) {
        throw ConfigError("k", "exceeds the corpus size (" + std::to_string(config_.k) + " > " +
                                   std::to_string(ids_.size()) + ")");
    }
    if (config_.index_space == EmbeddingField::kText && keys_.dim() != values_.dim()) {
        throw DimensionError("knn index: text-space keys must have the text dimension");
    }
}

namespace {

struct Candidate {
    double distance;
    std::uint64_t id;
    std::size_t row;
};

// Heap top is the worst kept candidate.
struct WorseFirst {
    bool operator()(const Candidate& a, const Candidate& b) const {
        return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
    }
};

} // namespace

NeighborSet KnnIndex::search(std::span<const double> query) const {
    require_same_dim(query.size(), keys_.dim(), "knn query");
    const std::size_t k = config_.k;
    const std::size_t dim = keys_.dim();
    std::priority_queue<Candidate, std::vector<Candidate>, WorseFirst> heap;
    const WorseFirst worse;

    for (std::size_t row = 0; row < keys_.rows(); ++row) {
        const double* key = keys_.row(row).data();
        double sq = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            const double diff = query[c] - key[c];
            sq += diff * diff;
        }
        const Candidate cand{std::sqrt(sq), ids_[row], row};
        if (heap.size() < k) {
            heap.push(cand);
        } else if (worse(cand, heap.top())) {
            heap.pop();
            heap.push(cand);
        }
    }

    std::vector<Candidate> best;
    best.reserve(k);
    while (!heap.empty()) {
        best.push_back(heap.top());
        heap.pop();
    }
    std::reverse(best.begin(), best.end());

    NeighborSet out;
    out.text = Matrix(k, values_.dim());
    for (std::size_t i = 0; i < best.size(); ++i) {
        out.ids.push_back(best[i].id);
        out.distances.push_back(best[i].distance);
        out.weights.push_back(neighbor_weight(best[i].distance, config_));
        const auto src = values_.row(best[i].row);
        std::copy(src.begin(), src.end(), out.text.row(i).begin());
    }
    return out;
}

KnnIndex knn_fit(const PairedDataset& train_set, const KnnConfig& config) {
    config.validate();
    if (train_set.size() < config.k) {
        throw ConfigError("k", "exceeds the training set size (" + std::to_string(config.k) + " > " +
                                   std::to_string(train_set.size()) + ")");
    }
    if (config.index_space == EmbeddingField::kText && train_set.dim_img() != train_set.dim_txt()) {
        throw DimensionError("knn_fit: text-space index compares image queries with text embeddings and needs "
                             "dim_img == dim_txt (got " +
                             std::to_string(train_set.dim_img()) + " and " + std::to_string(train_set.dim_txt()) +
                             "); use the image index space instead");
    }
    Matrix values = train_set.text_matrix();
    Matrix keys = config.index_space == EmbeddingField::kText ? values : train_set.image_matrix();
    return KnnIndex(std::move(keys), std::move(values), train_set.ids(), config);
}

KnnPrediction knn_predict(const KnnIndex& index, std::span<const double> query_image, KnnAggregation aggregation) {
    KnnPrediction out;
    out.neighbors = index.search(query_image);
    const auto& nb = out.neighbors;
    const std::size_t dim = index.values().dim();

    out.text.assign(dim, 0.0);
    double weight_total = 0.0;
    for (std::size_t i = 0; i < nb.ids.size(); ++i) {
        const auto row = nb.text.row(i);
        for (std::size_t c = 0; c < dim; ++c) {
            out.text[c] += nb.weights[i] * row[c];
        }
        weight_total += nb.weights[i];
    }
    const double scale = aggregation == KnnAggregation::kMeanOverK ? 1.0 / static_cast<double>(nb.ids.size())
                                                                   : 1.0 / weight_total;
    for (double& x : out.text) {
        x *= scale;
    }
    return out;
}

Matrix knn_predict_batch(const KnnIndex& index, const Matrix& queries, KnnAggregation aggregation,
                         std::size_t threads) {
    Matrix out(queries.rows(), index.values().dim());
    if (queries.empty()) {
        return out;
    }
    require_same_dim(queries.dim(), index.key_dim(), "knn_predict_batch");
    parallel_for(queries.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const KnnPrediction p = knn_predict(index, queries.row(i), aggregation);
            std::copy(p.text.begin(), p.text.end(), out.row(i).begin());
        }
    }, threads);
    return out;
}

std::string knn_config_to_json(const KnnConfig& config) {
    nlohmann::ordered_json j;
    j["k"] = config.k;
    j["distance_dim"] = config.distance_dim;
    j["delta"] = config.delta;
    j["coef"] = config.coef;
    j["index_space"] = config.index_space == EmbeddingField::kText ? "text" : "image";
    return j.dump(2) + "\n";
}

KnnConfig knn_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("knn sidecar is not valid JSON: ") + e.what());
    }
    KnnConfig config;
    try {
        config.k = j.at("k").get<std::size_t>();
        config.distance_dim = j.at("distance_dim").get<double>();
        config.delta = j.at("delta").get<double>();
        config.coef = j.at("coef").get<double>();
        const auto space = j.at("index_space").get<std::string>();
        if (space == "text") {
            config.index_space = EmbeddingField::kText;
        } else if (space == "image") {
            config.index_space = EmbeddingField::kImage;
        } else {
            throw ConfigError("index_space", "must be \"text\" or \"image\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("knn sidecar: ") + e.what());
    }
    config.validate();
    return config;
}

void save_index(const KnnIndex& index, const std::string& embp_path) {
    const PairedDataset stored = make_dataset(index.ids(), index.keys(), index.values());
    save_pairs(stored, embp_path);
    std::ofstream sidecar(embp_path + ".json", std::ios::trunc);
    if (!sidecar) {
        throw IoError("cannot open " + embp_path + ".json for writing");
    }
    sidecar << knn_config_to_json(index.config());
    if (!sidecar) {
        throw IoError("failed to write " + embp_path + ".json");
    }
}

KnnIndex load_index(const std::string& embp_path) {
    std::ifstream sidecar(embp_path + ".json");
    if (!sidecar) {
        throw IoError("cannot open index sidecar " + embp_path + ".json");
    }
    std::stringstream text;
    text << sidecar.rdbuf();
    const KnnConfig config = knn_config_from_json(text.str());
    const PairedDataset stored = load_pairs(embp_path);
    return KnnIndex(stored.image_matrix(), stored.text_matrix(), stored.ids(), config);
}

} // namespace embedfuse

#ifndef EMBEDFUSE_HEAD_HPP
#define EMBEDFUSE_HEAD_HPP

#include "embedfuse/dataset.hpp"
#include "embedfuse/vector_ops.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

/**
 * @file head.hpp
 *
 * @brief Image-to-text projection head.
 *
 * Topology, for an image embedding x:
 *
 *     a      = adapter(x)            (identity when no adapter)
 *     u1     = FC1(a)                h
 *     n1     = LN1(u1)               h
 *     u2     = FC2(n1)               dim_txt
 *     n2     = LN2(u2)               dim_txt
 *     b1     = Proj(n1)              dim_txt (identity when h == dim_txt)
 *     final  = alpha * b1 + (1 - alpha) * n2,   alpha = sigmoid(alpha_fusion_logit)
 *
 * The adapter is the slow-learning-rate parameter group; everything else is
 * the fast group.
 */

namespace embedfuse {

struct Linear {
    Matrix weight;
    Vector bias;

    friend bool operator==(const Linear&, const Linear&) = default;
};

struct HeadParams {
    std::size_t dim_img = 0;
    std::size_t hidden = 0;
    std::size_t dim_txt = 0;
    double eps_ln = 1e-5;
    double alpha_fusion_logit = 0.0;

    std::optional<Linear> adapter;
    Linear fc1;
    Vector norm1_gain;
    Vector norm1_bias;
    Linear fc2;
    Vector norm2_gain;
    Vector norm2_bias;
    /// dim_txt x hidden; absent when hidden == dim_txt.
    std::optional<Matrix> proj;

    double alpha() const;
    /// Throws DimensionError / ConfigError / DataError on inconsistent shapes or values.
    void validate() const;

    /// All zeros, same shapes as `like`. Used as a gradient accumulator.
    static HeadParams zeros_like(const HeadParams& like);

    friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

enum class ParamGroup { kHead, kVision };

/// One named parameter tensor, flattened.
struct ParamView {
    std::string_view name;
    std::span<double> values;
    ParamGroup group;
};

/**
 * Visits every trainable tensor in serialisation order (adapter weight and
 * bias, fc1, norm1, fc2, norm2, proj), followed by alpha_fusion_logit as a
 * one-element tensor named "alpha_fusion_logit".
 */
void for_each_param(HeadParams& params, const std::function<void(const ParamView&)>& fn);

struct HeadInit {
    std::size_t dim_img = 0;
    /// Zero selects dim_txt.
    std::size_t hidden = 0;
    std::size_t dim_txt = 0;
    bool with_adapter = false;
    double eps_ln = 1e-5;
    std::uint64_t seed = 0;
};

/**
 * FC weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, norm gains 1,
 * norm biases 0, alpha logit 0. The adapter starts as the identity map since
 * it stands in for an already trained backbone. Proj, when needed, is drawn
 * like an FC weight. Draw order: fc1, fc2, proj.
 */
HeadParams init_head(const HeadInit& init);

struct LayerNormStats {
    double mean = 0.0;
    double variance = 0.0;
    /// 1 / sqrt(variance + eps)
    double inv_std = 0.0;
};

/// gain * (x - mean) / sqrt(var + eps) + bias with the population variance.
Vector layer_norm(std::span<const double> x, std::span<const double> gain, std::span<const double> bias, double eps,
                  LayerNormStats* stats = nullptr);

struct ForwardTrace {
    Vector input;
    Vector adapter_out;
    Vector fc1_out;
    Vector norm1_out;
    Vector fc2_out;
    Vector norm2_out;
    /// Proj(norm1_out), or norm1_out itself when there is no projection.
    Vector branch1;
    Vector final_text_emb;
    LayerNormStats norm1_stats;
    LayerNormStats norm2_stats;
    double alpha = 0.5;
};

ForwardTrace head_forward(const HeadParams& params, std::span<const double> image_emb);

/// 1 - cosine_similarity(pred, target).
double cosine_loss(std::span<const double> pred, std::span<const double> target);

/// Gradient of cosine_loss(final_text_emb, target) for every parameter, in a
/// HeadParams of identical shape.
HeadParams head_backward(const ForwardTrace& trace, const HeadParams& params, std::span<const double> target);

/// Adds the gradient into `grads` instead of returning a fresh one.
void head_backward_accumulate(const ForwardTrace& trace, const HeadParams& params, std::span<const double> target,
                              HeadParams& grads);

/// Row i is the final text embedding for record i. Parallel over records.
Matrix head_predict(const HeadParams& params, const PairedDataset& dataset);
Matrix head_predict(const HeadParams& params, const Matrix& images);

// HEAD file: "HEAD", u16 version, u32 dim_img, u32 hidden, u32 dim_txt,
// u8 flags (bit0 adapter, bit1 proj), f64 eps_ln, f64 alpha_fusion_logit,
// then every tensor as little-endian f64 in for_each_param order.
inline constexpr std::uint16_t kHeadVersion = 1;
inline constexpr std::uint8_t kHeadFlagAdapter = 0x1;
inline constexpr std::uint8_t kHeadFlagProj = 0x2;

std::size_t write_head(const HeadParams& params, std::ostream& out);
HeadParams read_head(std::istream& in);
void save_head(const HeadParams& params, const std::string& path);
HeadParams load_head(const std::string& path);

} // namespace embedfuse

#endif

#include "embedfuse/head.hpp"

#include "byte_io.hpp"
#include "embedfuse/error.hpp"
#include "embedfuse/parallel.hpp"
#include "embedfuse/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace embedfuse {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

template <typename P, typename F>
void visit_tensors(P& p, F&& fn) {
    if (p.adapter) {
        fn("adapter_weight", p.adapter->weight.values(), ParamGroup::kVision);
        fn("adapter_bias", std::span(p.adapter->bias), ParamGroup::kVision);
    }
    fn("fc1_weight", p.fc1.weight.values(), ParamGroup::kHead);
    fn("fc1_bias", std::span(p.fc1.bias), ParamGroup::kHead);
    fn("norm1_gain", std::span(p.norm1_gain), ParamGroup::kHead);
    fn("norm1_bias", std::span(p.norm1_bias), ParamGroup::kHead);
    fn("fc2_weight", p.fc2.weight.values(), ParamGroup::kHead);
    fn("fc2_bias", std::span(p.fc2.bias), ParamGroup::kHead);
    fn("norm2_gain", std::span(p.norm2_gain), ParamGroup::kHead);
    fn("norm2_bias", std::span(p.norm2_bias), ParamGroup::kHead);
    if (p.proj) {
        fn("proj", p.proj->values(), ParamGroup::kHead);
    }
}

void check_shape(std::size_t rows, std::size_t cols, const Matrix& m, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void check_len(std::size_t n, std::span<const double> v, const char* what) {
    require_same_dim(v.size(), n, what);
}

// Backward through y = gain * xhat + bias, xhat = (x - mean) * inv_std.
// Accumulates gain/bias gradients and returns dL/dx.
Vector layer_norm_backward(std::span<const double> grad_out, std::span<const double> x, const LayerNormStats& stats,
                           std::span<const double> gain, std::span<double> grad_gain, std::span<double> grad_bias) {
    const std::size_t n = x.size();
    Vector xhat(n);
    Vector grad_xhat(n);
    double mean_g = 0.0;
    double mean_gx = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        xhat[k] = (x[k] - stats.mean) * stats.inv_std;
        grad_gain[k] += grad_out[k] * xhat[k];
        grad_bias[k] += grad_out[k];
        grad_xhat[k] = grad_out[k] * gain[k];
        mean_g += grad_xhat[k];
        mean_gx += grad_xhat[k] * xhat[k];
    }
    mean_g /= static_cast<double>(n);
    mean_gx /= static_cast<double>(n);

    Vector grad_x(n);
    for (std::size_t k = 0; k < n; ++k) {
        grad_x[k] = stats.inv_std * (grad_xhat[k] - mean_g - xhat[k] * mean_gx);
    }
    return grad_x;
}

// weight_grad += g * input^T; bias_grad += g; returns weight^T * g.
Vector linear_backward(std::span<const double> g, std::span<const double> input, const Matrix& weight,
                       Matrix& weight_grad, std::span<double> bias_grad) {
    Vector grad_in(weight.cols(), 0.0);
    for (std::size_t r = 0; r < weight.rows(); ++r) {
        const auto w = weight.row(r);
        auto wg = weight_grad.row(r);
        for (std::size_t c = 0; c < weight.cols(); ++c) {
            wg[c] += g[r] * input[c];
            grad_in[c] += w[c] * g[r];
        }
        if (!bias_grad.empty()) {
            bias_grad[r] += g[r];
        }
    }
    return grad_in;
}

} // namespace

double HeadParams::alpha() const {
    return sigmoid(alpha_fusion_logit);
}

void HeadParams::validate() const {
    if (dim_img == 0 || hidden == 0 || dim_txt == 0) {
        throw DimensionError("head dimensions must be positive");
    }
    if (!(eps_ln > 0.0)) {
        throw ConfigError("eps_ln", "must be positive");
    }
    if (adapter) {
        check_shape(dim_img, dim_img, adapter->weight, "adapter_weight");
        check_len(dim_img, adapter->bias, "adapter_bias");
    }
    check_shape(hidden, dim_img, fc1.weight, "fc1_weight");
    check_len(hidden, fc1.bias, "fc1_bias");
    check_len(hidden, norm1_gain, "norm1_gain");
    check_len(hidden, norm1_bias, "norm1_bias");
    check_shape(dim_txt, hidden, fc2.weight, "fc2_weight");
    check_len(dim_txt, fc2.bias, "fc2_bias");
    check_len(dim_txt, norm2_gain, "norm2_gain");
    check_len(dim_txt, norm2_bias, "norm2_bias");
    if (proj) {
        check_shape(dim_txt, hidden, *proj, "proj");
    } else if (hidden != dim_txt) {
        throw DimensionError("head: hidden width differs from dim_txt but no projection is present");
    }
    if (!std::isfinite(alpha_fusion_logit)) {
        throw DataError("alpha_fusion_logit is not finite");
    }
    visit_tensors(*this, [](std::string_view name, std::span<const double> v, ParamGroup) {
        for (double x : v) {
            if (!std::isfinite(x)) {
                throw DataError("head parameter " + std::string(name) + " is not finite");
            }
        }
    });
}

HeadParams HeadParams::zeros_like(const HeadParams& like) {
    HeadParams out = like;
    out.alpha_fusion_logit = 0.0;
    visit_tensors(out, [](std::string_view, std::span<double> v, ParamGroup) {
        std::fill(v.begin(), v.end(), 0.0);
    });
    return out;
}

void for_each_param(HeadParams& params, const std::function<void(const ParamView&)>& fn) {
    visit_tensors(params, [&](std::string_view name, std::span<double> v, ParamGroup group) {
        fn(ParamView{name, v, group});
    });
    fn(ParamView{"alpha_fusion_logit", std::span<double>(&params.alpha_fusion_logit, 1), ParamGroup::kHead});
}

HeadParams init_head(const HeadInit& init) {
    HeadParams p;
    p.dim_img = init.dim_img;
    p.dim_txt = init.dim_txt;
    p.hidden = init.hidden == 0 ? init.dim_txt : init.hidden;
    p.eps_ln = init.eps_ln;
    if (p.dim_img == 0 || p.dim_txt == 0) {
        throw DimensionError("init_head: dimensions must be positive");
    }

    Rng rng(init.seed);
    auto uniform_fill = [&rng](Matrix& m) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
        for (double& w : m.values()) {
            w = rng.uniform(-bound, bound);
        }
    };

    if (init.with_adapter) {
        p.adapter = Linear{Matrix::identity(p.dim_img), Vector(p.dim_img, 0.0)};
    }
    p.fc1 = Linear{Matrix(p.hidden, p.dim_img), Vector(p.hidden, 0.0)};
    uniform_fill(p.fc1.weight);
    p.norm1_gain.assign(p.hidden, 1.0);
    p.norm1_bias.assign(p.hidden, 0.0);
    p.fc2 = Linear{Matrix(p.dim_txt, p.hidden), Vector(p.dim_txt, 0.0)};
    uniform_fill(p.fc2.weight);
    p.norm2_gain.assign(p.dim_txt, 1.0);
    p.norm2_bias.assign(p.dim_txt, 0.0);
    if (p.hidden != p.dim_txt) {
        p.proj = Matrix(p.dim_txt, p.hidden);
        uniform_fill(*p.proj);
    }
    p.validate();
    return p;
}

Vector layer_norm(std::span<const double> x, std::span<const double> gain, std::span<const double> bias, double eps,
                  LayerNormStats* stats) {
    require_same_dim(gain.size(), x.size(), "layer_norm gain");
    require_same_dim(bias.size(), x.size(), "layer_norm bias");
    if (x.empty()) {
        throw DimensionError("layer_norm: empty input");
    }
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) {
        mean += v;
    }
    mean /= n;
    double var = 0.0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
    }
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + eps);

    Vector out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = gain[k] * (x[k] - mean) * inv_std + bias[k];
    }
    if (stats) {
        *stats = LayerNormStats{mean, var, inv_std};
    }
    return out;
}

ForwardTrace head_forward(const HeadParams& params, std::span<const double> image_emb) {
    require_same_dim(image_emb.size(), params.dim_img, "head_forward input");
    ForwardTrace t;
    t.input.assign(image_emb.begin(), image_emb.end());
    if (params.adapter) {
        t.adapter_out.resize(params.dim_img);
        affine(params.adapter->weight, params.adapter->bias, t.input, t.adapter_out);
    } else {
        t.adapter_out = t.input;
    }

    t.fc1_out.resize(params.hidden);
    affine(params.fc1.weight, params.fc1.bias, t.adapter_out, t.fc1_out);
    t.norm1_out = layer_norm(t.fc1_out, params.norm1_gain, params.norm1_bias, params.eps_ln, &t.norm1_stats);

    t.fc2_out.resize(params.dim_txt);
    affine(params.fc2.weight, params.fc2.bias, t.norm1_out, t.fc2_out);
    t.norm2_out = layer_norm(t.fc2_out, params.norm2_gain, params.norm2_bias, params.eps_ln, &t.norm2_stats);

    if (params.proj) {
        t.branch1.resize(params.dim_txt);
        affine(*params.proj, {}, t.norm1_out, t.branch1);
    } else {
        t.branch1 = t.norm1_out;
    }

    t.alpha = params.alpha();
    t.final_text_emb.resize(params.dim_txt);
    for (std::size_t k = 0; k < params.dim_txt; ++k) {
        t.final_text_emb[k] = t.alpha * t.branch1[k] + (1.0 - t.alpha) * t.norm2_out[k];
    }
    return t;
}

double cosine_loss(std::span<const double> pred, std::span<const double> target) {
    return 1.0 - cosine_similarity(pred, target);
}

void head_backward_accumulate(const ForwardTrace& trace, const HeadParams& params, std::span<const double> target,
                              HeadParams& grads) {
    const auto& f = trace.final_text_emb;
    require_same_dim(target.size(), f.size(), "head_backward target");
    const double nf = l2_norm(f);
    const double nt = l2_norm(target);
    if (nf == 0.0 || nt == 0.0) {
        throw DataError("head_backward: zero-norm prediction or target");
    }
    // Unclamped cosine; the clamp in cosine_similarity has no gradient.
    const double cos = dot(f, target) / (nf * nt);

    const std::size_t d = params.dim_txt;
    Vector grad_final(d);
    for (std::size_t k = 0; k < d; ++k) {
        grad_final[k] = -(target[k] / (nf * nt) - cos * f[k] / (nf * nf));
    }

    const double alpha = trace.alpha;
    double grad_alpha = 0.0;
    Vector grad_branch1(d);
    Vector grad_norm2(d);
    for (std::size_t k = 0; k < d; ++k) {
        grad_alpha += grad_final[k] * (trace.branch1[k] - trace.norm2_out[k]);
        grad_branch1[k] = alpha * grad_final[k];
        grad_norm2[k] = (1.0 - alpha) * grad_final[k];
    }
    grads.alpha_fusion_logit += grad_alpha * alpha * (1.0 - alpha);

    Vector grad_norm1;
    if (params.proj) {
        grad_norm1 = linear_backward(grad_branch1, trace.norm1_out, *params.proj, *grads.proj, {});
    } else {
        grad_norm1 = grad_branch1;
    }

    const Vector grad_fc2_out = layer_norm_backward(grad_norm2, trace.fc2_out, trace.norm2_stats, params.norm2_gain,
                                                    grads.norm2_gain, grads.norm2_bias);
    const Vector from_fc2 =
        linear_backward(grad_fc2_out, trace.norm1_out, params.fc2.weight, grads.fc2.weight, grads.fc2.bias);
    for (std::size_t k = 0; k < params.hidden; ++k) {
        grad_norm1[k] += from_fc2[k];
    }

    const Vector grad_fc1_out = layer_norm_backward(grad_norm1, trace.fc1_out, trace.norm1_stats, params.norm1_gain,
                                                    grads.norm1_gain, grads.norm1_bias);
    const Vector grad_adapter_out =
        linear_backward(grad_fc1_out, trace.adapter_out, params.fc1.weight, grads.fc1.weight, grads.fc1.bias);

    if (params.adapter) {
        linear_backward(grad_adapter_out, trace.input, params.adapter->weight, grads.adapter->weight,
                        grads.adapter->bias);
    }
}

HeadParams head_backward(const ForwardTrace& trace, const HeadParams& params, std::span<const double> target) {
    HeadParams grads = HeadParams::zeros_like(params);
    head_backward_accumulate(trace, params, target, grads);
    return grads;
}

Matrix head_predict(const HeadParams& params, const Matrix& images) {
    Matrix out(images.rows(), params.dim_txt);
    if (images.empty()) {
        return out;
    }
    require_same_dim(images.dim(), params.dim_img, "head_predict");
    parallel_for(images.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const ForwardTrace t = head_forward(params, images.row(i));
            std::copy(t.final_text_emb.begin(), t.final_text_emb.end(), out.row(i).begin());
        }
    });
    return out;
}

Matrix head_predict(const HeadParams& params, const PairedDataset& dataset) {
    require_same_dim(dataset.dim_img(), params.dim_img, "head_predict");
    return head_predict(params, dataset.image_matrix());
}

using detail::ByteReader;
using detail::put_le;

std::size_t write_head(const HeadParams& params, std::ostream& out) {
    params.validate();
    std::vector<unsigned char> buf = {'H', 'E', 'A', 'D'};
    put_le<std::uint16_t>(buf, kHeadVersion);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(params.dim_img));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(params.hidden));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(params.dim_txt));
    std::uint8_t flags = 0;
    if (params.adapter) {
        flags |= kHeadFlagAdapter;
    }
    if (params.proj) {
        flags |= kHeadFlagProj;
    }
    put_le<std::uint8_t>(buf, flags);
    put_le<double>(buf, params.eps_ln);
    put_le<double>(buf, params.alpha_fusion_logit);
    visit_tensors(params, [&](std::string_view, std::span<const double> v, ParamGroup) {
        for (double x : v) {
            put_le<double>(buf, x);
        }
    });
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw IoError("failed to write HEAD stream");
    }
    return buf.size();
}

HeadParams read_head(std::istream& in) {
    const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 || std::memcmp(buf.data(), "HEAD", 4) != 0) {
        throw FormatError("not a HEAD stream (bad magic)");
    }
    ByteReader reader(buf, "HEAD stream", 4);
    const auto version = reader.get<std::uint16_t>();
    if (version != kHeadVersion) {
        throw FormatError("unsupported HEAD version " + std::to_string(version));
    }
    HeadParams p;
    p.dim_img = reader.get<std::uint32_t>();
    p.hidden = reader.get<std::uint32_t>();
    p.dim_txt = reader.get<std::uint32_t>();
    const auto flags = reader.get<std::uint8_t>();
    if (flags & ~(kHeadFlagAdapter | kHeadFlagProj)) {
        throw FormatError("unknown HEAD flags");
    }
    p.eps_ln = reader.get<double>();
    p.alpha_fusion_logit = reader.get<double>();
    if (p.dim_img == 0 || p.hidden == 0 || p.dim_txt == 0) {
        throw FormatError("HEAD dimensions must be positive");
    }

    std::size_t expected = p.dim_img * p.hidden + p.hidden * 3 + p.dim_txt * p.hidden + p.dim_txt * 3;
    if (flags & kHeadFlagAdapter) {
        expected += p.dim_img * p.dim_img + p.dim_img;
    }
    if (flags & kHeadFlagProj) {
        expected += p.dim_txt * p.hidden;
    }
    if (reader.remaining() != expected * 8) {
        throw TruncationError("HEAD payload: expected " + std::to_string(expected * 8) + " bytes, got " +
                              std::to_string(reader.remaining()));
    }

    if (flags & kHeadFlagAdapter) {
        p.adapter = Linear{Matrix(p.dim_img, p.dim_img), Vector(p.dim_img)};
    }
    p.fc1 = Linear{Matrix(p.hidden, p.dim_img), Vector(p.hidden)};
    p.norm1_gain.resize(p.hidden);
    p.norm1_bias.resize(p.hidden);
    p.fc2 = Linear{Matrix(p.dim_txt, p.hidden), Vector(p.dim_txt)};
    p.norm2_gain.resize(p.dim_txt);
    p.norm2_bias.resize(p.dim_txt);
    if (flags & kHeadFlagProj) {
        p.proj = Matrix(p.dim_txt, p.hidden);
    }
    visit_tensors(p, [&](std::string_view, std::span<double> v, ParamGroup) {
        for (double& x : v) {
            x = reader.get<double>();
        }
    });
    p.validate();
    return p;
}

void save_head(const HeadParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_head(params, out);
    out.flush();
    if (!out) {
        throw IoError("failed to write " + path);
    }
}

HeadParams load_head(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return read_head(in);
}

} // namespace embedfuse

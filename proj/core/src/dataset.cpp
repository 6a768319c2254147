#include "embedfuse/dataset.hpp"

#include "byte_io.hpp"
#include "embedfuse/error.hpp"
#include "embedfuse/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <unordered_set>

namespace embedfuse {

PairedDataset::PairedDataset(std::uint32_t dim_img, std::uint32_t dim_txt, std::vector<PairRecord> records)
    : dim_img_(dim_img), dim_txt_(dim_txt), records_(std::move(records)) {
    if (dim_img_ == 0 || dim_txt_ == 0) {
        throw DimensionError("dataset dimensions must be positive");
    }
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(records_.size());
    for (const auto& rec : records_) {
        if (rec.image.size() != dim_img_ || rec.text.size() != dim_txt_) {
            throw DimensionError("record " + std::to_string(rec.id) + " does not match dataset dimensions " +
                                 std::to_string(dim_img_) + "/" + std::to_string(dim_txt_));
        }
        for (float x : rec.image) {
            if (!std::isfinite(x)) {
                throw DataError("record " + std::to_string(rec.id) + ": non-finite image value");
            }
        }
        for (float x : rec.text) {
            if (!std::isfinite(x)) {
                throw DataError("record " + std::to_string(rec.id) + ": non-finite text value");
            }
        }
        if (!seen.insert(rec.id).second) {
            throw DataError("duplicate record id " + std::to_string(rec.id));
        }
    }
}

std::vector<std::uint64_t> PairedDataset::ids() const {
    std::vector<std::uint64_t> out;
    out.reserve(records_.size());
    for (const auto& rec : records_) {
        out.push_back(rec.id);
    }
    return out;
}

Matrix PairedDataset::image_matrix() const {
    Matrix out(records_.size(), dim_img_);
    for (std::size_t i = 0; i < records_.size(); ++i) {
        std::copy(records_[i].image.begin(), records_[i].image.end(), out.row(i).begin());
    }
    return out;
}

Matrix PairedDataset::text_matrix() const {
    Matrix out(records_.size(), dim_txt_);
    for (std::size_t i = 0; i < records_.size(); ++i) {
        std::copy(records_[i].text.begin(), records_[i].text.end(), out.row(i).begin());
    }
    return out;
}

PairedDataset PairedDataset::select(const std::vector<std::size_t>& indices) const {
    std::vector<PairRecord> subset;
    subset.reserve(indices.size());
    for (std::size_t i : indices) {
        subset.push_back(records_.at(i));
    }
    return PairedDataset(dim_img_, dim_txt_, std::move(subset));
}

PairedDataset make_dataset(const std::vector<std::uint64_t>& ids, const Matrix& image, const Matrix& text) {
    if (ids.size() != image.rows() || ids.size() != text.rows()) {
        throw DimensionError("make_dataset: ids, image rows and text rows differ in length");
    }
    std::vector<PairRecord> records(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        records[i].id = ids[i];
        const auto img = image.row(i);
        const auto txt = text.row(i);
        records[i].image.assign(img.begin(), img.end());
        records[i].text.assign(txt.begin(), txt.end());
    }
    return PairedDataset(static_cast<std::uint32_t>(image.cols()), static_cast<std::uint32_t>(text.cols()),
                         std::move(records));
}

using detail::get_le;
using detail::put_le;

std::size_t embp_record_bytes(std::uint32_t dim_img, std::uint32_t dim_txt) {
    return 8 + 4 * (static_cast<std::size_t>(dim_img) + dim_txt);
}

std::size_t write_pairs(const PairedDataset& dataset, std::ostream& out) {
    std::vector<unsigned char> buf;
    buf.reserve(kEmbpHeaderBytes + dataset.size() * embp_record_bytes(dataset.dim_img(), dataset.dim_txt()));
    buf.insert(buf.end(), std::begin(kEmbpMagic), std::end(kEmbpMagic));
    put_le<std::uint16_t>(buf, kEmbpVersion);
    put_le<std::uint32_t>(buf, dataset.dim_img());
    put_le<std::uint32_t>(buf, dataset.dim_txt());
    put_le<std::uint64_t>(buf, dataset.size());
    for (const auto& rec : dataset.records()) {
        put_le<std::uint64_t>(buf, rec.id);
        for (float x : rec.image) {
            put_le<float>(buf, x);
        }
        for (float x : rec.text) {
            put_le<float>(buf, x);
        }
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw IoError("failed to write EMBP stream");
    }
    return buf.size();
}

PairedDataset read_pairs(std::istream& in) {
    const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 || std::memcmp(buf.data(), kEmbpMagic, 4) != 0) {
        throw FormatError("not an EMBP stream (bad magic)");
    }
    if (buf.size() < kEmbpHeaderBytes) {
        throw TruncationError("EMBP header truncated: expected " + std::to_string(kEmbpHeaderBytes) +
                              " bytes, got " + std::to_string(buf.size()));
    }
    const auto version = get_le<std::uint16_t>(buf.data() + 4);
    if (version != kEmbpVersion) {
        throw FormatError("unsupported EMBP version " + std::to_string(version));
    }
    const auto dim_img = get_le<std::uint32_t>(buf.data() + 6);
    const auto dim_txt = get_le<std::uint32_t>(buf.data() + 10);
    const auto count = get_le<std::uint64_t>(buf.data() + 14);
    if (dim_img == 0 || dim_txt == 0) {
        throw FormatError("EMBP dimensions must be positive");
    }

    const std::size_t record_bytes = embp_record_bytes(dim_img, dim_txt);
    const std::size_t payload = buf.size() - kEmbpHeaderBytes;
    if (payload % record_bytes != 0 || payload / record_bytes != count) {
        const long double expected = static_cast<long double>(kEmbpHeaderBytes) +
                                     static_cast<long double>(count) * static_cast<long double>(record_bytes);
        throw TruncationError("EMBP size mismatch: header declares " + std::to_string(count) + " records, expected " +
                              std::to_string(static_cast<unsigned long long>(expected)) + " bytes, got " +
                              std::to_string(buf.size()));
    }

    std::vector<PairRecord> records(count);
    const unsigned char* p = buf.data() + kEmbpHeaderBytes;
    for (auto& rec : records) {
        rec.id = get_le<std::uint64_t>(p);
        p += 8;
        rec.image.resize(dim_img);
        for (auto& x : rec.image) {
            x = get_le<float>(p);
            p += 4;
        }
        rec.text.resize(dim_txt);
        for (auto& x : rec.text) {
            x = get_le<float>(p);
            p += 4;
        }
    }
    return PairedDataset(dim_img, dim_txt, std::move(records));
}

void save_pairs(const PairedDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_pairs(dataset, out);
    out.flush();
    if (!out) {
        throw IoError("failed to write " + path);
    }
}

PairedDataset load_pairs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return read_pairs(in);
}

void SynthConfig::validate() const {
    if (count < 1) {
        throw ConfigError("count", "must be at least 1");
    }
    if (dim_img < 1) {
        throw ConfigError("dim_img", "must be positive");
    }
    if (dim_txt < 1) {
        throw ConfigError("dim_txt", "must be positive");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ConfigError("noise_sigma", "must be finite and non-negative");
    }
}

SyntheticData generate_synthetic(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);

    Matrix map(config.dim_txt, config.dim_img);
    for (double& x : map.values()) {
        x = rng.normal();
    }

    std::vector<PairRecord> records(config.count);
    Vector draw_img(config.dim_img);
    Vector stored_img(config.dim_img);
    Vector text(config.dim_txt);
    for (std::size_t i = 0; i < config.count; ++i) {
        auto& rec = records[i];
        rec.id = i;

        // Resample on the (practically impossible) all-zero draw.
        double norm = 0.0;
        do {
            for (double& x : draw_img) {
                x = rng.normal();
            }
            norm = l2_norm(draw_img);
        } while (norm == 0.0);
        rec.image.resize(config.dim_img);
        for (std::size_t k = 0; k < config.dim_img; ++k) {
            rec.image[k] = static_cast<float>(draw_img[k] / norm);
            stored_img[k] = rec.image[k];
        }

        affine(map, {}, stored_img, text);
        for (double& x : text) {
            x += config.noise_sigma * rng.normal();
        }
        const Vector unit = l2_normalize(text);
        rec.text.assign(unit.begin(), unit.end());
    }

    return {PairedDataset(config.dim_img, config.dim_txt, std::move(records)), std::move(map)};
}

DatasetSplit split_dataset(const PairedDataset& dataset, const SplitFractions& fractions, std::uint64_t seed) {
    if (!(fractions.train > 0.0)) {
        throw ConfigError("fractions.train", "must be positive");
    }
    if (!(fractions.val > 0.0)) {
        throw ConfigError("fractions.val", "must be positive");
    }
    if (!(fractions.test > 0.0)) {
        throw ConfigError("fractions.test", "must be positive");
    }
    if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
        throw ConfigError("fractions", "must sum to 1");
    }

    const std::size_t n = dataset.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(std::span<std::size_t>(order), rng);

    auto share = [n](double f) { return static_cast<std::size_t>(std::llround(static_cast<double>(n) * f)); };
    const std::size_t n_val = std::min(n, share(fractions.val));
    const std::size_t n_test = std::min(n - n_val, share(fractions.test));
    const std::size_t n_train = n - n_val - n_test;

    auto slice = [&](std::size_t begin, std::size_t len) {
        return dataset.select(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                                       order.begin() + static_cast<std::ptrdiff_t>(begin + len)));
    };
    return {slice(0, n_train), slice(n_train, n_val), slice(n_train + n_val, n_test)};
}

} // namespace embedfuse

#ifndef EMBEDFUSE_DATASET_HPP
#define EMBEDFUSE_DATASET_HPP

#include "embedfuse/vector_ops.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace embedfuse {

/// One image/text embedding pair. Values are stored in the on-disk precision.
struct PairRecord {
    std::uint64_t id = 0;
    std::vector<float> image;
    std::vector<float> text;

    friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

/**
 * @brief Ordered, validated collection of PairRecords.
 *
 * Construction checks that every record matches the declared dimensions,
 * that all values are finite and that ids are unique. Record order is kept
 * as given; the dedup filter and the splitter both depend on it.
 */
class PairedDataset {
public:
    PairedDataset(std::uint32_t dim_img, std::uint32_t dim_txt, std::vector<PairRecord> records = {});

    std::uint32_t dim_img() const { return dim_img_; }
    std::uint32_t dim_txt() const { return dim_txt_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    const std::vector<PairRecord>& records() const { return records_; }
    const PairRecord& operator[](std::size_t i) const { return records_[i]; }

    std::vector<std::uint64_t> ids() const;
    Matrix image_matrix() const;
    Matrix text_matrix() const;

    /// Subset in the order given by `indices`.
    PairedDataset select(const std::vector<std::size_t>& indices) const;

    friend bool operator==(const PairedDataset&, const PairedDataset&) = default;

private:
    std::uint32_t dim_img_;
    std::uint32_t dim_txt_;
    std::vector<PairRecord> records_;
};

/// Builds a dataset from double-precision matrices, rounding to float.
PairedDataset make_dataset(const std::vector<std::uint64_t>& ids, const Matrix& image, const Matrix& text);

// EMBP container: "EMBP", u16 version, u32 dim_img, u32 dim_txt, u64 count,
// then per record u64 id, dim_img f32, dim_txt f32. Little-endian, unpadded.
inline constexpr char kEmbpMagic[4] = {'E', 'M', 'B', 'P'};
inline constexpr std::uint16_t kEmbpVersion = 1;
inline constexpr std::size_t kEmbpHeaderBytes = 4 + 2 + 4 + 4 + 8;

std::size_t embp_record_bytes(std::uint32_t dim_img, std::uint32_t dim_txt);

/// Returns the number of bytes written.
std::size_t write_pairs(const PairedDataset& dataset, std::ostream& out);
PairedDataset read_pairs(std::istream& in);

void save_pairs(const PairedDataset& dataset, const std::string& path);
PairedDataset load_pairs(const std::string& path);

struct SynthConfig {
    std::size_t count = 1000;
    std::uint32_t dim_img = 16;
    std::uint32_t dim_txt = 16;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticData {
    PairedDataset dataset;
    /// dim_txt x dim_img map used to produce the text embeddings.
    Matrix ground_truth_map;
};

/**
 * Deterministic synthetic pairs. Draw order from a single Rng(seed):
 * the map M row-major, then per record dim_img normals (normalised into the
 * image embedding) followed by dim_txt normals of noise. The text embedding is
 * l2_normalize(M * image + sigma * noise), where `image` is the float-rounded
 * value that is stored.
 */
SyntheticData generate_synthetic(const SynthConfig& config);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct DatasetSplit {
    PairedDataset train;
    PairedDataset val;
    PairedDataset test;
};

/// Seeded shuffle then partition. Val and test get round(count * fraction)
/// records; train takes the remainder.
DatasetSplit split_dataset(const PairedDataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

} // namespace embedfuse

#endif

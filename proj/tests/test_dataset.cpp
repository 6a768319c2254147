#include "embedfuse/dataset.hpp"
#include "embedfuse/error.hpp"
#include "embedfuse/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <limits>
#include <set>
#include <sstream>

using namespace embedfuse;

namespace {

std::string to_bytes(const PairedDataset& d) {
    std::ostringstream out;
    write_pairs(d, out);
    return out.str();
}

PairedDataset from_bytes(const std::string& bytes) {
    std::istringstream in(bytes);
    return read_pairs(in);
}

PairedDataset random_dataset(Rng& rng) {
    const auto dim_img = static_cast<std::uint32_t>(1 + rng.below(12));
    const auto dim_txt = static_cast<std::uint32_t>(1 + rng.below(12));
    const std::size_t count = rng.below(30);
    std::vector<PairRecord> records;
    std::set<std::uint64_t> used;
    while (records.size() < count) {
        const std::uint64_t id = rng.next_u64();
        if (!used.insert(id).second) {
            continue;
        }
        PairRecord r;
        r.id = id;
        for (std::uint32_t k = 0; k < dim_img; ++k) r.image.push_back(static_cast<float>(rng.normal() * 1e3));
        for (std::uint32_t k = 0; k < dim_txt; ++k) r.text.push_back(static_cast<float>(rng.normal() * 1e-3));
        records.push_back(std::move(r));
    }
    return PairedDataset(dim_img, dim_txt, std::move(records));
}

} // namespace

TEST(Embp, EmptyDatasetHeaderIs22Bytes) {
    const std::string bytes = to_bytes(PairedDataset(4, 4));
    ASSERT_EQ(bytes.size(), 22u);
    EXPECT_EQ(bytes.substr(0, 4), "EMBP");
    const unsigned char expected[] = {0x45, 0x4D, 0x42, 0x50, 1, 0, 4, 0, 0, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_EQ(std::memcmp(bytes.data(), expected, sizeof(expected)), 0);
}

TEST(Embp, OneRecordLayout) {
    PairRecord r{0x0102030405060708ULL, {1.0f, -2.0f}, {0.5f, 0.25f, 3.0f}};
    const std::string bytes = to_bytes(PairedDataset(2, 3, {r}));
    ASSERT_EQ(bytes.size(), 50u);
    // id little-endian right after the header
    EXPECT_EQ(static_cast<unsigned char>(bytes[22]), 0x08);
    EXPECT_EQ(static_cast<unsigned char>(bytes[29]), 0x01);
    // 1.0f = 0x3F800000
    EXPECT_EQ(static_cast<unsigned char>(bytes[30]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(bytes[33]), 0x3F);
}

TEST(Embp, RoundTripIsBitExactOnRandomDatasets) {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const PairedDataset d = random_dataset(rng);
        const std::string bytes = to_bytes(d);
        EXPECT_EQ(bytes.size(), kEmbpHeaderBytes + d.size() * embp_record_bytes(d.dim_img(), d.dim_txt()));
        const PairedDataset back = from_bytes(bytes);
        EXPECT_EQ(back, d);
        EXPECT_EQ(to_bytes(back), bytes);
    }
}

TEST(Embp, RejectsBadMagic) {
    std::string bytes = to_bytes(PairedDataset(4, 4));
    bytes.replace(0, 4, "XXXX");
    EXPECT_THROW(from_bytes(bytes), FormatError);
}

TEST(Embp, RejectsUnknownVersion) {
    std::string bytes = to_bytes(PairedDataset(4, 4));
    bytes[4] = 2;
    EXPECT_THROW(from_bytes(bytes), FormatError);
}

TEST(Embp, TruncatedRecordNamesByteCounts) {
    PairRecord r{1, {1.0f, 2.0f}, {3.0f, 4.0f, 5.0f}};
    std::string bytes = to_bytes(PairedDataset(2, 3, {r}));
    bytes.resize(bytes.size() - 3);
    try {
        from_bytes(bytes);
        FAIL() << "expected TruncationError";
    } catch (const TruncationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("50"), std::string::npos) << msg;
        EXPECT_NE(msg.find("47"), std::string::npos) << msg;
    }
}

TEST(Embp, RejectsNonFinitePayload) {
    PairRecord r{1, {1.0f, 2.0f}, {3.0f}};
    std::string bytes = to_bytes(PairedDataset(2, 1, {r}));
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(&bytes[30], &nan, 4);
    EXPECT_THROW(from_bytes(bytes), DataError);
}

TEST(Embp, RejectsDuplicateIds) {
    PairRecord r{7, {1.0f}, {1.0f}};
    std::string bytes = to_bytes(PairedDataset(1, 1, {r}));
    // Append the same record and bump the count to 2.
    bytes += bytes.substr(22);
    bytes[14] = 2;
    EXPECT_THROW(from_bytes(bytes), DataError);
}

TEST(PairedDataset, ValidatesDimensions) {
    EXPECT_THROW(PairedDataset(2, 2, {PairRecord{0, {1.0f}, {1.0f, 2.0f}}}), DimensionError);
    EXPECT_THROW(PairedDataset(0, 2), DimensionError);
}

TEST(Synthetic, SameSeedSameBytes) {
    SynthConfig c;
    c.count = 100;
    c.seed = 7;
    EXPECT_EQ(to_bytes(generate_synthetic(c).dataset), to_bytes(generate_synthetic(c).dataset));
    c.seed = 8;
    SynthConfig c7 = c;
    c7.seed = 7;
    EXPECT_NE(to_bytes(generate_synthetic(c).dataset), to_bytes(generate_synthetic(c7).dataset));
}

TEST(Synthetic, NoiselessTextIsNormalizedMapOfImage) {
    SynthConfig c;
    c.count = 200;
    c.dim_img = 8;
    c.dim_txt = 12;
    c.noise_sigma = 0.0;
    c.seed = 3;
    const auto synth = generate_synthetic(c);
    ASSERT_EQ(synth.ground_truth_map.rows(), 12u);
    ASSERT_EQ(synth.ground_truth_map.cols(), 8u);
    for (std::size_t i = 0; i < synth.dataset.size(); ++i) {
        const auto& rec = synth.dataset[i];
        EXPECT_EQ(rec.id, i);
        Vector mapped(12);
        affine(synth.ground_truth_map, {}, to_vector(rec.image), mapped);
        EXPECT_NEAR(cosine_similarity(l2_normalize(mapped), to_vector(rec.text)), 1.0, 1e-6);
        EXPECT_NEAR(l2_norm(to_vector(rec.image)), 1.0, 1e-6);
        EXPECT_NEAR(l2_norm(to_vector(rec.text)), 1.0, 1e-6);
    }
}

TEST(Synthetic, LeastSquaresOracleScoreIsFrozen) {
    // Affine normal-equations fit on all pairs, scored in sample.
    SynthConfig c;
    c.count = 1000;
    c.noise_sigma = 0.1;
    c.seed = 7;
    const auto d = generate_synthetic(c).dataset;
    const double score = oracle::least_squares_avg_cossim(d, d);
    EXPECT_GE(score, 0.95);
    EXPECT_NEAR(score, 0.99314801365233152, 1e-9);
}

TEST(Synthetic, RejectsInvalidConfig) {
    SynthConfig c;
    c.count = 0;
    EXPECT_THROW(generate_synthetic(c), ConfigError);
    c.count = 5;
    c.noise_sigma = -1.0;
    EXPECT_THROW(generate_synthetic(c), ConfigError);
}

TEST(Split, SizesFollowRounding) {
    SynthConfig c;
    c.count = 10;
    const auto d = generate_synthetic(c).dataset;
    const auto s = split_dataset(d, {0.8, 0.1, 0.1}, 1);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.val.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, IsAPartitionOfIds) {
    SynthConfig c;
    c.count = 537;
    const auto d = generate_synthetic(c).dataset;
    const auto s = split_dataset(d, {0.7, 0.2, 0.1}, 99);
    std::multiset<std::uint64_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
        for (auto id : part->ids()) all.insert(id);
    }
    const auto ids = d.ids();
    EXPECT_EQ(all, std::multiset<std::uint64_t>(ids.begin(), ids.end()));
    EXPECT_EQ(std::set<std::uint64_t>(all.begin(), all.end()).size(), all.size());
}

TEST(Split, DeterministicBySeed) {
    SynthConfig c;
    c.count = 150;
    const auto d = generate_synthetic(c).dataset;
    const auto a = split_dataset(d, {0.8, 0.1, 0.1}, 5);
    const auto b = split_dataset(d, {0.8, 0.1, 0.1}, 5);
    const auto other = split_dataset(d, {0.8, 0.1, 0.1}, 6);
    EXPECT_EQ(a.train.ids(), b.train.ids());
    EXPECT_EQ(a.val.ids(), b.val.ids());
    EXPECT_NE(a.train.ids(), other.train.ids());
}

TEST(Split, RejectsBadFractions) {
    SynthConfig c;
    c.count = 10;
    const auto d = generate_synthetic(c).dataset;
    EXPECT_THROW(split_dataset(d, {1.0, 0.0, 0.0}, 1), ConfigError);
    EXPECT_THROW(split_dataset(d, {0.8, -0.1, 0.3}, 1), ConfigError);
    EXPECT_THROW(split_dataset(d, {0.5, 0.1, 0.1}, 1), ConfigError);
}

#ifndef EMBEDFUSE_SRC_BYTE_IO_HPP
#define EMBEDFUSE_SRC_BYTE_IO_HPP

#include "embedfuse/error.hpp"

#include <bit>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

namespace embedfuse::detail {

template <typename T>
using UintOf = std::conditional_t<
    sizeof(T) == 8, std::uint64_t,
    std::conditional_t<sizeof(T) == 4, std::uint32_t, std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;

template <typename T>
void put_le(std::vector<unsigned char>& buf, T value) {
    const auto bits = std::bit_cast<UintOf<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
    }
}

template <typename T>
T get_le(const unsigned char* p) {
    UintOf<T> bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits = static_cast<UintOf<T>>(bits | static_cast<UintOf<T>>(static_cast<UintOf<T>>(p[i]) << (8 * i)));
    }
    return std::bit_cast<T>(bits);
}

/// Sequential little-endian reader that raises TruncationError on overrun.
class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& buf, std::string label, std::size_t start = 0)
        : buf_(buf), label_(std::move(label)), pos_(start) {}

    template <typename T>
    T get() {
        if (buf_.size() - pos_ < sizeof(T)) {
            throw TruncationError(label_ + " truncated at byte " + std::to_string(pos_) + " of " +
                                  std::to_string(buf_.size()));
        }
        const T value = get_le<T>(buf_.data() + pos_);
        pos_ += sizeof(T);
        return value;
    }

    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    const std::vector<unsigned char>& buf_;
    std::string label_;
    std::size_t pos_;
};

} // namespace embedfuse::detail

#endif

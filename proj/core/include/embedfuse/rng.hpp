#ifndef EMBEDFUSE_RNG_HPP
#define EMBEDFUSE_RNG_HPP

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace embedfuse {

/**
 * @brief Portable seeded generator.
 *
 * Raw bits come from std::mt19937_64, whose output sequence is fixed by the
 * C++ standard. The standard distributions are implementation-defined, so the
 * conversions to uniform and normal variates are done here:
 *
 * - uniform(): top 53 bits of one draw, scaled by 2^-53, giving [0, 1).
 * - normal(): Box-Muller on two uniforms, u1 mapped to (0, 1] via 1 - u; both
 *   outputs of a pair are used, cosine branch first.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    /// Uniform integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fisher-Yates, last index first. std::shuffle is not reproducible across
/// standard libraries.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace embedfuse

#endif

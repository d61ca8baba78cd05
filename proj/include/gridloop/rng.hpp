#pragma once

#include <cstdint>
#include <string_view>

namespace gridloop {

/// Counter-based 64-bit generator. Draw `i` of a stream is a pure
/// function of (key, i): the SplitMix64 finalizer applied to
/// key + i * golden-gamma. Streams never share state, so giving each
/// module its own key keeps its draws independent of every other module.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

    /// Key for the stream owned by `module` inside scenario `seed`.
    static std::uint64_t stream_key(std::uint64_t seed, std::string_view module) noexcept;

    static std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() noexcept { return mix(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

    /// Standard normal deviate. Box-Muller (cosine branch only, two draws
    /// per deviate) with the result rounded to the nearest multiple of
    /// 2^-32, which absorbs last-ulp differences between libm builds.
    double normal() noexcept;

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }
    void seek(std::uint64_t counter) noexcept { counter_ = counter; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// 64-bit FNV-1a; used for stream keys and trace digests.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xCBF29CE484222325ULL) noexcept;

}  // namespace gridloop

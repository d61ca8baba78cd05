#include "gridloop/rng.hpp"

#include <cmath>
#include <numbers>

namespace gridloop {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t CounterRng::stream_key(std::uint64_t seed, std::string_view module) noexcept {
    return mix(mix(seed) ^ fnv1a64(module));
}

double CounterRng::normal() noexcept {
    // u1 in (0, 1] so the log is finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return std::nearbyint(z * 0x1p32) * 0x1p-32;
}

}  // namespace gridloop

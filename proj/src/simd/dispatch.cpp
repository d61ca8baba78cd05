#include <atomic>
#include <cstdlib>
#include <cstring>

#include "gridloop/error.hpp"
#include "gridloop/simd.hpp"

namespace gridloop::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(GRIDLOOP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa initial_isa() noexcept {
    const char* env = std::getenv("GRIDLOOP_ISA");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::scalar;
    return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() noexcept {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

bool isa_available(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2: return cpu_has_avx2();
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!isa_available(isa))
        throw InvalidArgument("SIMD variant not available: " + std::string(isa_name(isa)));
#if defined(GRIDLOOP_HAVE_AVX2)
    if (isa == Isa::avx2) return detail::avx2_table();
#endif
    return detail::scalar_table();
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    if (!isa_available(isa))
        throw InvalidArgument("SIMD variant not available: " + std::string(isa_name(isa)));
    current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

const KernelTable& detail::active() noexcept {
#if defined(GRIDLOOP_HAVE_AVX2)
    if (active_isa() == Isa::avx2) return avx2_table();
#endif
    return scalar_table();
}

}  // namespace gridloop::simd

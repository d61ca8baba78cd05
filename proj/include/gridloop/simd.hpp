#pragma once

// Data-parallel inner loops shared by the solvers. Every kernel has a
// scalar reference implementation and, on x86-64, an AVX2 variant picked
// at runtime. The variants are bit-identical: reductions use four fixed
// lanes combined as (l0 + l1) + (l2 + l3) in both, and the build disables
// floating-point contraction so no FMA sneaks into either path.

#include <cstddef>
#include <span>
#include <string_view>

namespace gridloop::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    // out[i] = min(max(t[i] + shift, 0), ub[i])
    void (*clip_shift)(const double* t, const double* ub, double shift, double* out, std::size_t n);
    // sum_i min(max(t[i] + shift, 0), ub[i])
    double (*clip_sum)(const double* t, const double* ub, double shift, std::size_t n);
    // theta[i] += h * (alpha[i] * (ambient - theta[i]) - gain[i] * on[i])
    void (*thermal_step)(double* theta, const double* alpha, const double* gain, const double* on,
                         double ambient, double h, std::size_t n);
};

/// True when this binary carries the variant and the CPU can run it.
bool isa_available(Isa isa) noexcept;

/// Kernel table for a specific variant. Throws InvalidArgument when the
/// variant is unavailable.
const KernelTable& table(Isa isa);

/// Variant used by the free functions below. Chosen once on first use:
/// the best available unless GRIDLOOP_ISA=scalar is set in the environment.
Isa active_isa() noexcept;
void set_active_isa(Isa isa);
std::string_view isa_name(Isa isa) noexcept;

namespace detail {
const KernelTable& active() noexcept;
const KernelTable& scalar_table() noexcept;
#if defined(GRIDLOOP_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
}  // namespace detail

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    detail::active().axpy(a, x.data(), y.data(), x.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
    return detail::active().dot(x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) { return detail::active().sum(x.data(), x.size()); }
inline void clip_shift(std::span<const double> t, std::span<const double> ub, double shift,
                       std::span<double> out) {
    detail::active().clip_shift(t.data(), ub.data(), shift, out.data(), t.size());
}
inline double clip_sum(std::span<const double> t, std::span<const double> ub, double shift) {
    return detail::active().clip_sum(t.data(), ub.data(), shift, t.size());
}
inline void thermal_step(std::span<double> theta, std::span<const double> alpha,
                         std::span<const double> gain, std::span<const double> on, double ambient,
                         double h) {
    detail::active().thermal_step(theta.data(), alpha.data(), gain.data(), on.data(), ambient, h,
                                  theta.size());
}

}  // namespace gridloop::simd

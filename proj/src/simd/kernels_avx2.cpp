// Compiled with -mavx2 only; callers reach it through the dispatch table
// after a runtime CPU check.
#include <immintrin.h>

#include "gridloop/simd.hpp"

namespace gridloop::simd::detail {
namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

inline double combine(__m256d acc, const double* tail, std::size_t rem) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (std::size_t l = 0; l < rem; ++l) lanes[l] = lanes[l] + tail[l];
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    double tail[4];
    const std::size_t rem = n - i;
    for (std::size_t l = 0; l < rem; ++l) tail[l] = x[i + l] * y[i + l];
    return combine(acc, tail, rem);
}

double sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    return combine(acc, x + i, n - i);
}

inline double clip1(double v, double ub) {
    v = v > 0.0 ? v : 0.0;
    return v < ub ? v : ub;
}

inline __m256d clip4(__m256d v, __m256d ub) {
    return _mm256_min_pd(_mm256_max_pd(v, _mm256_setzero_pd()), ub);
}

void clip_shift(const double* t, const double* ub, double shift, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(shift);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i,
                         clip4(_mm256_add_pd(_mm256_loadu_pd(t + i), vs), _mm256_loadu_pd(ub + i)));
    for (; i < n; ++i) out[i] = clip1(t[i] + shift, ub[i]);
}

double clip_sum(const double* t, const double* ub, double shift, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(shift);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(
            acc, clip4(_mm256_add_pd(_mm256_loadu_pd(t + i), vs), _mm256_loadu_pd(ub + i)));
    double tail[4];
    const std::size_t rem = n - i;
    for (std::size_t l = 0; l < rem; ++l) tail[l] = clip1(t[i + l] + shift, ub[i + l]);
    return combine(acc, tail, rem);
}

void thermal_step(double* theta, const double* alpha, const double* gain, const double* on,
                  double ambient, double h, std::size_t n) {
    const __m256d va = _mm256_set1_pd(ambient);
    const __m256d vh = _mm256_set1_pd(h);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d th = _mm256_loadu_pd(theta + i);
        const __m256d coupling = _mm256_mul_pd(_mm256_loadu_pd(alpha + i), _mm256_sub_pd(va, th));
        const __m256d cooling = _mm256_mul_pd(_mm256_loadu_pd(gain + i), _mm256_loadu_pd(on + i));
        const __m256d drift = _mm256_sub_pd(coupling, cooling);
        _mm256_storeu_pd(theta + i, _mm256_add_pd(th, _mm256_mul_pd(vh, drift)));
    }
    for (; i < n; ++i) {
        const double drift = alpha[i] * (ambient - theta[i]) - gain[i] * on[i];
        theta[i] = theta[i] + h * drift;
    }
}

}  // namespace

const KernelTable& avx2_table() noexcept {
    static const KernelTable t{axpy, dot, sum, clip_shift, clip_sum, thermal_step};
    return t;
}

}  // namespace gridloop::simd::detail

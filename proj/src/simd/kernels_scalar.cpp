#include "gridloop/simd.hpp"

namespace gridloop::simd::detail {
namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

inline double combine(const double* acc) { return (acc[0] + acc[1]) + (acc[2] + acc[3]); }

double dot(const double* x, const double* y, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (std::size_t l = 0; l < 4; ++l) acc[l] = acc[l] + x[i + l] * y[i + l];
    for (std::size_t l = 0; i + l < n; ++l) acc[l] = acc[l] + x[i + l] * y[i + l];
    return combine(acc);
}

double sum(const double* x, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (std::size_t l = 0; l < 4; ++l) acc[l] = acc[l] + x[i + l];
    for (std::size_t l = 0; i + l < n; ++l) acc[l] = acc[l] + x[i + l];
    return combine(acc);
}

// Same operand order as MAXPD/MINPD: ties and signed zeros resolve to the
// second operand.
inline double clip(double v, double ub) {
    v = v > 0.0 ? v : 0.0;
    return v < ub ? v : ub;
}

void clip_shift(const double* t, const double* ub, double shift, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = clip(t[i] + shift, ub[i]);
}

double clip_sum(const double* t, const double* ub, double shift, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (std::size_t l = 0; l < 4; ++l) acc[l] = acc[l] + clip(t[i + l] + shift, ub[i + l]);
    for (std::size_t l = 0; i + l < n; ++l) acc[l] = acc[l] + clip(t[i + l] + shift, ub[i + l]);
    return combine(acc);
}

void thermal_step(double* theta, const double* alpha, const double* gain, const double* on,
                  double ambient, double h, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double drift = alpha[i] * (ambient - theta[i]) - gain[i] * on[i];
        theta[i] = theta[i] + h * drift;
    }
}

}  // namespace

const KernelTable& scalar_table() noexcept {
    static const KernelTable t{axpy, dot, sum, clip_shift, clip_sum, thermal_step};
    return t;
}

}  // namespace gridloop::simd::detail

#include "microseg/core/kernels.hpp"

#include <arm_neon.h>

#include <limits>

// NEON variants (aarch64, 2-wide float64). Same contract as the AVX2 file:
// no FMA, reductions differ from scalar only in accumulation order.

namespace microseg::kernels {

namespace {

double dot_neon(const double* a, const double* b, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

void axpy_neon(double alpha, const double* x, double* y, size_t n) {
    float64x2_t va = vdupq_n_f64(alpha);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_neon(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_neon(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_neon(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_neon(double alpha, const double* a, double* out, size_t n) {
    float64x2_t va = vdupq_n_f64(alpha);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(va, vld1q_f64(a + i)));
    for (; i < n; ++i) out[i] = alpha * a[i];
}

double sum_neon(const double* a, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
    double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) r += a[i];
    return r;
}

double max_neon(const double* a, size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    size_t i = 0;
    if (n >= 2) {
        float64x2_t vm = vld1q_f64(a);
        for (i = 2; i + 2 <= n; i += 2) vm = vmaxq_f64(vm, vld1q_f64(a + i));
        m = vgetq_lane_f64(vm, 0);
        double hi = vgetq_lane_f64(vm, 1);
        if (hi > m) m = hi;
    }
    for (; i < n; ++i)
        if (a[i] > m) m = a[i];
    return m;
}

const KernelTable kNeon = {
    "neon",   dot_neon, axpy_neon, add_neon,
    sub_neon, mul_neon, scale_neon, sum_neon, max_neon,
};

} // namespace

const KernelTable& neon_table() { return kNeon; }

} // namespace microseg::kernels

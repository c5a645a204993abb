#include "microseg/core/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <limits>

namespace microseg::kernels {

namespace {

double dot_scalar(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(double alpha, const double* a, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = alpha * a[i];
}

double sum_scalar(const double* a, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double max_scalar(const double* a, size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i)
        if (a[i] > m) m = a[i];
    return m;
}

const KernelTable kScalar = {
    "scalar",    dot_scalar, axpy_scalar, add_scalar,
    sub_scalar,  mul_scalar, scale_scalar, sum_scalar, max_scalar,
};

const KernelTable& select() {
    const char* force = std::getenv("MICROSEG_KERNELS");
    if (force && std::strcmp(force, "scalar") == 0) return kScalar;
#if defined(MICROSEG_HAVE_AVX2)
    if (force && std::strcmp(force, "avx2") == 0)
        return avx2_supported() ? avx2_table() : kScalar;
    if (!force && avx2_supported()) return avx2_table();
#endif
#if defined(MICROSEG_HAVE_NEON)
    if (!force || std::strcmp(force, "neon") == 0) return neon_table();
#endif
    return kScalar;
}

} // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable& active() {
    static const KernelTable& chosen = select();
    return chosen;
}

} // namespace microseg::kernels

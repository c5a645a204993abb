#pragma once

#include <cstddef>
#include <string>

namespace microseg::kernels {

// Data-parallel inner loops behind the tensor ops. Scalar reference
// implementations define the semantics; the AVX2/NEON variants are selected
// once at startup and must agree with the reference within summation-order
// rounding (equivalence-tested). SIMD variants avoid fused multiply-add so
// the only difference from scalar is reduction order.
struct KernelTable {
    const char* name;
    double (*dot)(const double* a, const double* b, size_t n);
    void (*axpy)(double alpha, const double* x, double* y, size_t n);
    void (*add)(const double* a, const double* b, double* out, size_t n);
    void (*sub)(const double* a, const double* b, double* out, size_t n);
    void (*mul)(const double* a, const double* b, double* out, size_t n);
    void (*scale)(double alpha, const double* a, double* out, size_t n);
    double (*sum)(const double* a, size_t n);
    double (*max)(const double* a, size_t n);
};

const KernelTable& scalar_table();

// Active table: scalar unless the CPU supports a compiled SIMD variant.
// MICROSEG_KERNELS=scalar|avx2|neon forces a path (unsupported -> scalar).
const KernelTable& active();

#if defined(MICROSEG_HAVE_AVX2)
const KernelTable& avx2_table();
bool avx2_supported();
#endif
#if defined(MICROSEG_HAVE_NEON)
const KernelTable& neon_table();
#endif

} // namespace microseg::kernels

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Inner-loop arithmetic kernels with a scalar reference implementation and
// SIMD variants (AVX2+FMA on x86-64, NEON on aarch64) selected at runtime.
// Every variant of a kernel computes the same reduction up to floating-point
// reassociation; the scalar version is the semantic reference and the SIMD
// versions are equivalence-tested against it.
//
// Dot products of f32 inputs accumulate in f64: an f32*f32 product is exact
// in f64, so backends differ only in summation order.

namespace lire::kern {

enum class Backend { scalar, avx2, neon };

struct MaxDot {
    double value;
    size_t index; // lowest index on exact ties
};

struct Ops {
    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, size_t n);
    // f32 inputs, f64 accumulation
    double (*dot_f32)(const float* a, const float* b, size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double* y, double alpha, const double* x, size_t n);
    // max over rows r of dot(q, rows + r*d); ties resolve to the lowest r
    MaxDot (*max_dot)(const double* q, const double* rows, size_t nrows, size_t d);
    MaxDot (*max_dot_f32)(const float* q, const float* rows, size_t nrows, size_t d);
    Backend backend;
};

extern const Ops scalar_ops;
#if defined(__x86_64__) || defined(_M_X64)
extern const Ops avx2_ops;
#endif
#if defined(__aarch64__)
extern const Ops neon_ops;
#endif

/// Active kernel table. Resolved once on first use: the best backend the CPU
/// supports, unless overridden by force_backend() or the LIRE_KERNELS
/// environment variable (scalar|avx2|neon|auto).
const Ops& active();

/// Overrides backend selection for the process. Throws Err::BadConfig if the
/// CPU lacks the requested instruction set.
void force_backend(const std::string& name);

bool cpu_has_avx2();
const char* backend_name();

inline double dot(const double* a, const double* b, size_t n) { return active().dot(a, b, n); }
inline double dot_f32(const float* a, const float* b, size_t n) { return active().dot_f32(a, b, n); }
inline void axpy(double* y, double alpha, const double* x, size_t n) { active().axpy(y, alpha, x, n); }
inline MaxDot max_dot(const double* q, const double* rows, size_t nrows, size_t d) {
    return active().max_dot(q, rows, nrows, d);
}
inline MaxDot max_dot_f32(const float* q, const float* rows, size_t nrows, size_t d) {
    return active().max_dot_f32(q, rows, nrows, d);
}

} // namespace lire::kern

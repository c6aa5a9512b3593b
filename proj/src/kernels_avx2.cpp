// AVX2+FMA kernels. Compiled with -mavx2 -mfma and only ever dispatched to
// after a cpuid check, so the unguarded intrinsics here are safe.
//
// Dots run four f64 lanes wide with four independent accumulators to break
// the FMA dependency chain; f32 inputs are widened to f64 before the FMA so
// the products are exact and only the summation order differs from the
// scalar reference.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "lire/kernels.hpp"

namespace lire::kern {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swap = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

double dot_avx2(const double* a, const double* b, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc0 = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
    double s = hsum(acc0);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot_f32_avx2(const float* a, const float* b, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m128 af = _mm_loadu_ps(a + i);
        __m128 bf = _mm_loadu_ps(b + i);
        __m128 af2 = _mm_loadu_ps(a + i + 4);
        __m128 bf2 = _mm_loadu_ps(b + i + 4);
        acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(af), _mm256_cvtps_pd(bf), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(af2), _mm256_cvtps_pd(bf2), acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

void axpy_avx2(double* y, double alpha, const double* x, size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

MaxDot max_dot_avx2(const double* q, const double* rows, size_t nrows, size_t d) {
    MaxDot best{-1e300, 0};
    for (size_t r = 0; r < nrows; ++r) {
        double s = dot_avx2(q, rows + r * d, d);
        if (s > best.value) {
            best.value = s;
            best.index = r;
        }
    }
    return best;
}

MaxDot max_dot_f32_avx2(const float* q, const float* rows, size_t nrows, size_t d) {
    MaxDot best{-1e300, 0};
    for (size_t r = 0; r < nrows; ++r) {
        double s = dot_f32_avx2(q, rows + r * d, d);
        if (s > best.value) {
            best.value = s;
            best.index = r;
        }
    }
    return best;
}

} // namespace

const Ops avx2_ops = {
    dot_avx2, dot_f32_avx2, axpy_avx2, max_dot_avx2, max_dot_f32_avx2,
    Backend::avx2,
};

} // namespace lire::kern

#endif // x86-64

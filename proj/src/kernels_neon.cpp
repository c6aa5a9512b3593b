// NEON kernels for aarch64. Two f64 lanes per vector; f32 inputs are widened
// with vcvt before the FMA, mirroring the AVX2 backend.

#if defined(__aarch64__)

#include <arm_neon.h>

#include "lire/kernels.hpp"

namespace lire::kern {

namespace {

double dot_neon(const double* a, const double* b, size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot_f32_neon(const float* a, const float* b, size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t af = vld1q_f32(a + i);
        float32x4_t bf = vld1q_f32(b + i);
        acc0 = vfmaq_f64(acc0, vcvt_f64_f32(vget_low_f32(af)), vcvt_f64_f32(vget_low_f32(bf)));
        acc1 = vfmaq_f64(acc1, vcvt_f64_f32(vget_high_f32(af)), vcvt_f64_f32(vget_high_f32(bf)));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

void axpy_neon(double* y, double alpha, const double* x, size_t n) {
    float64x2_t va = vdupq_n_f64(alpha);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

MaxDot max_dot_neon(const double* q, const double* rows, size_t nrows, size_t d) {
    MaxDot best{-1e300, 0};
    for (size_t r = 0; r < nrows; ++r) {
        double s = dot_neon(q, rows + r * d, d);
        if (s > best.value) {
            best.value = s;
            best.index = r;
        }
    }
    return best;
}

MaxDot max_dot_f32_neon(const float* q, const float* rows, size_t nrows, size_t d) {
    MaxDot best{-1e300, 0};
    for (size_t r = 0; r < nrows; ++r) {
        double s = dot_f32_neon(q, rows + r * d, d);
        if (s > best.value) {
            best.value = s;
            best.index = r;
        }
    }
    return best;
}

} // namespace

const Ops neon_ops = {
    dot_neon, dot_f32_neon, axpy_neon, max_dot_neon, max_dot_f32_neon,
    Backend::neon,
};

} // namespace lire::kern

#endif // aarch64

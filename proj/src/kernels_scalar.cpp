// Scalar reference kernels. Plain sequential loops; the SIMD backends must
// match these up to floating-point reassociation.

#include "lire/kernels.hpp"

namespace lire::kern {

namespace {

double dot_scalar(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot_f32_scalar(const float* a, const float* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

void axpy_scalar(double* y, double alpha, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

MaxDot max_dot_scalar(const double* q, const double* rows, size_t nrows, size_t d) {
    MaxDot best{-1e300, 0};
    for (size_t r = 0; r < nrows; ++r) {
        double s = dot_scalar(q, rows + r * d, d);
        if (s > best.value) {
            best.value = s;
            best.index = r;
        }
    }
    return best;
}

MaxDot max_dot_f32_scalar(const float* q, const float* rows, size_t nrows, size_t d) {
    MaxDot best{-1e300, 0};
    for (size_t r = 0; r < nrows; ++r) {
        double s = dot_f32_scalar(q, rows + r * d, d);
        if (s > best.value) {
            best.value = s;
            best.index = r;
        }
    }
    return best;
}

} // namespace

const Ops scalar_ops = {
    dot_scalar, dot_f32_scalar, axpy_scalar, max_dot_scalar, max_dot_f32_scalar,
    Backend::scalar,
};

} // namespace lire::kern

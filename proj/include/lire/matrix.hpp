#pragma once

#include <cstddef>
#include <vector>

namespace lire {

/// Dense row-major matrix of doubles. All training and scoring math runs at
/// double precision; 32-bit floats appear only in serialized artifacts.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double* row(size_t i) { return a.data() + i * cols; }
    const double* row(size_t i) const { return a.data() + i * cols; }

    double& at(size_t i, size_t j) { return a[i * cols + j]; }
    double at(size_t i, size_t j) const { return a[i * cols + j]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }
};

/// Per-token embeddings, one unit-norm row per token (rows x d).
using TokenMatrix = Matrix;

} // namespace lire

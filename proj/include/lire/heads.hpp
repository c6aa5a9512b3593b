#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lire/matrix.hpp"

namespace lire {

enum class HeadMode { mrl, mrl_e };

const char* to_string(HeadMode m);
HeadMode head_mode_from(const std::string& s);

inline const std::vector<int> kDefaultDims = {64, 96, 128, 256, 512, 768};

/// Trainable projection layer. `mrl` keeps one (dim x hidden) matrix per
/// output dimension, trained jointly; `mrl_e` keeps a single
/// (max(dims) x hidden) matrix and serves smaller dims as row prefixes, so
/// small embeddings are truncations of the large one. No bias terms.
struct ProjectionHeads {
    HeadMode mode = HeadMode::mrl;
    std::vector<int> dims = kDefaultDims; // strictly increasing
    int hidden_dim = 128;
    std::vector<Matrix> weights; // mrl: one per dim; mrl_e: exactly one

    int max_dim() const { return dims.back(); }
    bool has_dim(int d) const;
    /// Index into `weights` for dim d (always 0 in mrl_e mode).
    size_t weight_index(int d) const;

    size_t parameter_count() const;
};

/// Gradient (or any per-parameter) buffers shaped exactly like
/// ProjectionHeads::weights.
struct HeadGradients {
    std::vector<Matrix> g;

    static HeadGradients zeros_like(const ProjectionHeads& heads);
    void add_scaled(const HeadGradients& other, double scale);
    void scale(double s);
    double max_abs() const;
    bool all_finite() const;
};

/// Seeded uniform init on [-1/sqrt(hidden_dim), +1/sqrt(hidden_dim)].
ProjectionHeads init_heads(HeadMode mode, const std::vector<int>& dims, int hidden_dim,
                           uint64_t seed);

/// Projects base features (rows x hidden_dim) to unit-norm token embeddings
/// at dim d. Rows whose pre-normalization norm falls below 1e-8 raise
/// Err::DegenerateToken.
TokenMatrix project(const Matrix& base, const ProjectionHeads& heads, int d);

/// Same, without the final row normalization. MRL-E truncation consistency
/// holds exactly on these raw values.
Matrix project_raw(const Matrix& base, const ProjectionHeads& heads, int d);

// Checkpoint format: magic "JCHD" | version u32=1 | mode u8 (0=mrl, 1=mrl_e)
// | ndims u32 | dims u32[] | hidden_dim u32 | matrices as f32 LE row-major
// in dims order (one matrix total in mrl_e mode). Weights are stored at
// 32-bit precision.
void save_heads(const ProjectionHeads& heads, const std::string& path);
ProjectionHeads load_heads(const std::string& path);

} // namespace lire

#include "lire/heads.hpp"

#include <cmath>
#include <cstring>

#include "lire/error.hpp"
#include "lire/io.hpp"
#include "lire/kernels.hpp"
#include "lire/rng.hpp"

namespace lire {

namespace {

constexpr double kMinPreNorm = 1e-8;
constexpr uint32_t kHeadsVersion = 1;
const char kHeadsMagic[4] = {'J', 'C', 'H', 'D'};

void validate_dims(const std::vector<int>& dims, int hidden_dim) {
    if (dims.empty()) throw Error(Err::BadConfig, "empty dim list");
    if (hidden_dim < 1) throw Error(Err::BadConfig, "hidden_dim must be positive");
    int prev = 0;
    for (int d : dims) {
        if (d <= prev)
            throw Error(Err::NonIncreasingDims,
                        "dims must be strictly increasing, got " + std::to_string(prev) +
                            " then " + std::to_string(d));
        prev = d;
    }
}

} // namespace

const char* to_string(HeadMode m) { return m == HeadMode::mrl ? "mrl" : "mrl_e"; }

HeadMode head_mode_from(const std::string& s) {
    if (s == "mrl") return HeadMode::mrl;
    if (s == "mrl_e") return HeadMode::mrl_e;
    throw Error(Err::BadConfig, "unknown head mode '" + s + "'");
}

bool ProjectionHeads::has_dim(int d) const {
    for (int x : dims)
        if (x == d) return true;
    return false;
}

size_t ProjectionHeads::weight_index(int d) const {
    if (mode == HeadMode::mrl_e) return 0;
    for (size_t i = 0; i < dims.size(); ++i)
        if (dims[i] == d) return i;
    throw Error(Err::UnknownDim, std::to_string(d));
}

size_t ProjectionHeads::parameter_count() const {
    size_t n = 0;
    for (const auto& w : weights) n += w.a.size();
    return n;
}

HeadGradients HeadGradients::zeros_like(const ProjectionHeads& heads) {
    HeadGradients g;
    g.g.reserve(heads.weights.size());
    for (const auto& w : heads.weights) g.g.emplace_back(w.rows, w.cols);
    return g;
}

void HeadGradients::add_scaled(const HeadGradients& other, double scale) {
    for (size_t i = 0; i < g.size(); ++i)
        kern::axpy(g[i].a.data(), scale, other.g[i].a.data(), g[i].a.size());
}

void HeadGradients::scale(double s) {
    for (auto& m : g)
        for (auto& x : m.a) x *= s;
}

double HeadGradients::max_abs() const {
    double m = 0.0;
    for (const auto& mat : g)
        for (double x : mat.a) m = std::max(m, std::fabs(x));
    return m;
}

bool HeadGradients::all_finite() const {
    for (const auto& mat : g)
        for (double x : mat.a)
            if (!std::isfinite(x)) return false;
    return true;
}

ProjectionHeads init_heads(HeadMode mode, const std::vector<int>& dims, int hidden_dim,
                           uint64_t seed) {
    validate_dims(dims, hidden_dim);
    ProjectionHeads heads;
    heads.mode = mode;
    heads.dims = dims;
    heads.hidden_dim = hidden_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    Rng rng = rng_stream(seed, "heads.init");
    auto make = [&](int d) {
        Matrix w(static_cast<size_t>(d), static_cast<size_t>(hidden_dim));
        for (auto& x : w.a) x = rng.uniform(-bound, bound);
        return w;
    };
    if (mode == HeadMode::mrl) {
        for (int d : dims) heads.weights.push_back(make(d));
    } else {
        heads.weights.push_back(make(dims.back()));
    }
    return heads;
}

Matrix project_raw(const Matrix& base, const ProjectionHeads& heads, int d) {
    if (!heads.has_dim(d)) throw Error(Err::UnknownDim, std::to_string(d));
    if (static_cast<int>(base.cols) != heads.hidden_dim)
        throw Error(Err::DimMismatch, "base features have " + std::to_string(base.cols) +
                                          " columns, heads expect " +
                                          std::to_string(heads.hidden_dim));
    const Matrix& w = heads.weights[heads.weight_index(d)];
    const auto dd = static_cast<size_t>(d);
    Matrix out(base.rows, dd);
    for (size_t t = 0; t < base.rows; ++t) {
        const double* x = base.row(t);
        double* z = out.row(t);
        for (size_t r = 0; r < dd; ++r) z[r] = kern::dot(w.row(r), x, base.cols);
    }
    return out;
}

TokenMatrix project(const Matrix& base, const ProjectionHeads& heads, int d) {
    Matrix out = project_raw(base, heads, d);
    for (size_t t = 0; t < out.rows; ++t) {
        double* z = out.row(t);
        double norm = std::sqrt(kern::dot(z, z, out.cols));
        if (!(norm >= kMinPreNorm))
            throw Error(Err::DegenerateToken,
                        "row " + std::to_string(t) + " pre-normalization norm " +
                            std::to_string(norm));
        for (size_t j = 0; j < out.cols; ++j) z[j] /= norm;
    }
    return out;
}

void save_heads(const ProjectionHeads& heads, const std::string& path) {
    BinWriter w;
    w.bytes(kHeadsMagic, 4);
    w.u32(kHeadsVersion);
    w.u8(heads.mode == HeadMode::mrl ? 0 : 1);
    w.u32(static_cast<uint32_t>(heads.dims.size()));
    for (int d : heads.dims) w.u32(static_cast<uint32_t>(d));
    w.u32(static_cast<uint32_t>(heads.hidden_dim));
    for (const auto& m : heads.weights)
        for (double x : m.a) w.f32(static_cast<float>(x));
    write_file_atomic(path, w.data().data(), w.size());
}

ProjectionHeads load_heads(const std::string& path) {
    auto bytes = read_file_bytes(path);
    BinReader r(bytes.data(), bytes.size());
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kHeadsMagic, 4) != 0)
        throw Error(Err::CorruptIndex, path + ": bad checkpoint magic");
    uint32_t version = r.u32();
    if (version != kHeadsVersion)
        throw Error(Err::CorruptIndex, path + ": unsupported version " + std::to_string(version));
    ProjectionHeads heads;
    uint8_t mode = r.u8();
    if (mode > 1) throw Error(Err::CorruptIndex, path + ": bad mode byte");
    heads.mode = mode == 0 ? HeadMode::mrl : HeadMode::mrl_e;
    uint32_t ndims = r.u32();
    heads.dims.clear();
    for (uint32_t i = 0; i < ndims; ++i) heads.dims.push_back(static_cast<int>(r.u32()));
    heads.hidden_dim = static_cast<int>(r.u32());
    validate_dims(heads.dims, heads.hidden_dim);
    auto read_matrix = [&](int rows) {
        Matrix m(static_cast<size_t>(rows), static_cast<size_t>(heads.hidden_dim));
        for (auto& x : m.a) x = static_cast<double>(r.f32());
        return m;
    };
    if (heads.mode == HeadMode::mrl) {
        for (int d : heads.dims) heads.weights.push_back(read_matrix(d));
    } else {
        heads.weights.push_back(read_matrix(heads.dims.back()));
    }
    if (r.remaining() != 0)
        throw Error(Err::CorruptIndex, path + ": trailing bytes in checkpoint");
    return heads;
}

} // namespace lire

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lire/error.hpp"
#include "lire/heads.hpp"
#include "lire/io.hpp"
#include "lire/kernels.hpp"
#include "lire/rng.hpp"
#include "testutil.hpp"

using namespace lire;

namespace {

ProjectionHeads identity_heads(int d) {
    ProjectionHeads heads;
    heads.mode = HeadMode::mrl;
    heads.dims = {d};
    heads.hidden_dim = d;
    Matrix w(static_cast<size_t>(d), static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) w.at(static_cast<size_t>(i), static_cast<size_t>(i)) = 1.0;
    heads.weights.push_back(std::move(w));
    return heads;
}

} // namespace

TEST_CASE("identity projection normalizes rows: (3,4,0,...) -> (0.6,0.8,0,...)") {
    auto heads = identity_heads(4);
    Matrix base(1, 4);
    base.at(0, 0) = 3.0;
    base.at(0, 1) = 4.0;
    TokenMatrix out = project(base, heads, 4);
    CHECK(out.at(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(out.at(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(out.at(0, 2) == 0.0);
    CHECK(out.at(0, 3) == 0.0);
}

TEST_CASE("mrl_e truncates then normalizes: full (1,1,1,1) at d=2 -> (1/sqrt2, 1/sqrt2)") {
    ProjectionHeads heads;
    heads.mode = HeadMode::mrl_e;
    heads.dims = {2, 4};
    heads.hidden_dim = 4;
    Matrix w(4, 4);
    for (int i = 0; i < 4; ++i) w.at(static_cast<size_t>(i), static_cast<size_t>(i)) = 1.0;
    heads.weights.push_back(std::move(w));

    Matrix base(1, 4);
    base.fill(1.0); // full projection is (1,1,1,1)
    TokenMatrix out = project(base, heads, 2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(out.at(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-15));
    CHECK(out.at(0, 1) == doctest::Approx(inv_sqrt2).epsilon(1e-15));
}

TEST_CASE("unknown dim is rejected before any work") {
    auto heads = init_heads(HeadMode::mrl, kDefaultDims, 128, 1);
    Matrix base(1, 128);
    base.fill(0.5);
    try {
        project(base, heads, 100);
        FAIL("expected UnknownDim");
    } catch (const Error& e) {
        CHECK(e.code() == Err::UnknownDim);
    }
}

TEST_CASE("init_heads is deterministic per seed and shapes mrl per dim") {
    auto a = init_heads(HeadMode::mrl, {4, 8, 16}, 32, 9);
    auto b = init_heads(HeadMode::mrl, {4, 8, 16}, 32, 9);
    auto c = init_heads(HeadMode::mrl, {4, 8, 16}, 32, 10);
    REQUIRE(a.weights.size() == 3);
    CHECK(a.weights[0].rows == 4);
    CHECK(a.weights[1].rows == 8);
    CHECK(a.weights[2].rows == 16);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(a.weights[i].a == b.weights[i].a);
        CHECK(a.weights[i].cols == 32);
    }
    CHECK(a.weights[0].a != c.weights[0].a);

    const double bound = 1.0 / std::sqrt(32.0);
    for (double x : a.weights[2].a) {
        CHECK(x >= -bound);
        CHECK(x <= bound);
    }
}

TEST_CASE("non-increasing dims are rejected") {
    try {
        init_heads(HeadMode::mrl, {64, 64}, 128, 0);
        FAIL("expected NonIncreasingDims");
    } catch (const Error& e) {
        CHECK(e.code() == Err::NonIncreasingDims);
    }
    CHECK_THROWS_AS(init_heads(HeadMode::mrl, {96, 64}, 128, 0), Error);
}

TEST_CASE("mrl_e keeps exactly one matrix shaped by the largest dim") {
    auto heads = init_heads(HeadMode::mrl_e, {4, 8, 16}, 32, 3);
    REQUIRE(heads.weights.size() == 1);
    CHECK(heads.weights[0].rows == 16);
}

TEST_CASE("row-norm invariant holds for random inputs at every dim") {
    Rng rng(77);
    auto heads = init_heads(HeadMode::mrl, {4, 8, 16}, 24, 5);
    Matrix base(10, 24);
    for (auto& x : base.a) x = rng.uniform(-2.0, 2.0);
    for (int d : heads.dims) {
        TokenMatrix out = project(base, heads, d);
        for (size_t r = 0; r < out.rows; ++r) {
            double norm = std::sqrt(kern::dot(out.row(r), out.row(r), out.cols));
            CHECK(std::fabs(norm - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("mrl_e prefix consistency is exact on raw projections") {
    Rng rng(78);
    auto heads = init_heads(HeadMode::mrl_e, {4, 8, 16}, 24, 6);
    Matrix base(7, 24);
    for (auto& x : base.a) x = rng.uniform(-2.0, 2.0);

    Matrix full = project_raw(base, heads, 16);
    for (int d : {4, 8}) {
        Matrix small = project_raw(base, heads, d);
        for (size_t r = 0; r < base.rows; ++r)
            for (int c = 0; c < d; ++c)
                CHECK(small.at(r, static_cast<size_t>(c)) ==
                      full.at(r, static_cast<size_t>(c))); // bitwise
    }
}

TEST_CASE("projection is scale invariant after normalization") {
    Rng rng(79);
    auto heads = init_heads(HeadMode::mrl, {8}, 16, 7);
    Matrix base(5, 16);
    for (auto& x : base.a) x = rng.uniform(-1.0, 1.0);
    Matrix scaled = base;
    for (auto& x : scaled.a) x *= 3.7;

    TokenMatrix a = project(base, heads, 8);
    TokenMatrix b = project(scaled, heads, 8);
    for (size_t i = 0; i < a.a.size(); ++i)
        CHECK(a.a[i] == doctest::Approx(b.a[i]).epsilon(1e-12));
}

TEST_CASE("degenerate pre-normalization vectors raise DegenerateToken") {
    auto heads = identity_heads(4);
    Matrix base(1, 4); // zero row
    try {
        project(base, heads, 4);
        FAIL("expected DegenerateToken");
    } catch (const Error& e) {
        CHECK(e.code() == Err::DegenerateToken);
    }
}

TEST_CASE("checkpoint round trip preserves mode, dims, and f32 weights") {
    auto dir = testutil::fresh_temp_dir("heads");
    for (HeadMode mode : {HeadMode::mrl, HeadMode::mrl_e}) {
        auto heads = init_heads(mode, {4, 8}, 16, 42);
        auto path = dir + "/h_" + to_string(mode) + std::string(".jchd");
        save_heads(heads, path);
        auto back = load_heads(path);
        CHECK(back.mode == heads.mode);
        CHECK(back.dims == heads.dims);
        CHECK(back.hidden_dim == heads.hidden_dim);
        REQUIRE(back.weights.size() == heads.weights.size());
        for (size_t i = 0; i < heads.weights.size(); ++i) {
            REQUIRE(back.weights[i].same_shape(heads.weights[i]));
            for (size_t e = 0; e < heads.weights[i].a.size(); ++e)
                CHECK(back.weights[i].a[e] ==
                      static_cast<double>(static_cast<float>(heads.weights[i].a[e])));
        }
        // Saving the loaded heads again is byte-identical.
        auto path2 = path + ".again";
        save_heads(back, path2);
        CHECK(read_file_bytes(path) == read_file_bytes(path2));
    }
}

TEST_CASE("checkpoint loader rejects a bad magic") {
    auto dir = testutil::fresh_temp_dir("heads_bad");
    auto path = dir + "/h.jchd";
    std::string junk = "NOPEjunkjunkjunk";
    write_file_atomic(path, junk);
    CHECK_THROWS_AS(load_heads(path), Error);
}

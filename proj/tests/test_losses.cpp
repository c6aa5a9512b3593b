#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lire/error.hpp"
#include "lire/gradcheck.hpp"
#include "lire/losses.hpp"
#include "lire/rng.hpp"
#include "testutil.hpp"

using namespace lire;

namespace {

Matrix rows(std::initializer_list<std::vector<double>> rs) {
    Matrix m(rs.size(), rs.begin()->size());
    size_t i = 0;
    for (const auto& r : rs) {
        std::copy(r.begin(), r.end(), m.row(i));
        ++i;
    }
    return m;
}

EncodeConfig tiny_cfg(int hidden, uint64_t seed) {
    EncodeConfig cfg;
    cfg.hidden_dim = hidden;
    cfg.max_query_len = 4;
    cfg.max_doc_len = 6;
    cfg.augmentation = AugmentationMode::off;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("pooling: a single row is returned unchanged") {
    auto m = rows({{0.6, 0.8}});
    auto p = pool_single_vector(m);
    CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("pooling: (1,0) and (0,1) average to the diagonal unit vector") {
    auto m = rows({{1.0, 0.0}, {0.0, 1.0}});
    auto p = pool_single_vector(m);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0); // mean (0.5,0.5), norm 1/sqrt2
    CHECK(p[0] == doctest::Approx(inv_sqrt2).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(inv_sqrt2).epsilon(1e-15));
}

TEST_CASE("pooling: cancelling rows degenerate") {
    auto m = rows({{1.0, 0.0}, {-1.0, 0.0}});
    try {
        pool_single_vector(m);
        FAIL("expected DegeneratePool");
    } catch (const Error& e) {
        CHECK(e.code() == Err::DegeneratePool);
    }
}

TEST_CASE("InfoNCE with a single pair is exactly zero") {
    auto l = rows({{1.0, 0.0}});
    auto r = rows({{0.0, 1.0}});
    Matrix dl, dr;
    CHECK(infonce_on_vectors(l, r, 0.02, &dl, &dr) == 0.0);
    for (double g : dl.a) CHECK(g == 0.0);
    for (double g : dr.a) CHECK(g == 0.0);
}

TEST_CASE("InfoNCE hand case: orthonormal 2-batch at tau=1 gives log(1+e)-1") {
    auto l = rows({{1.0, 0.0}, {0.0, 1.0}});
    auto r = rows({{1.0, 0.0}, {0.0, 1.0}});
    // Scalar oracle: each direction's per-row loss is lse([1,0]) - 1.
    double expected = std::log(std::exp(1.0) + 1.0) - 1.0;
    double got = infonce_on_vectors(l, r, 1.0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-14));
    CHECK(got == doctest::Approx(0.313262).epsilon(1e-5));

    // Sharper temperature strictly decreases the loss here.
    double sharper = infonce_on_vectors(l, r, 0.5);
    CHECK(sharper == doctest::Approx(std::log(std::exp(2.0) + 1.0) - 2.0).epsilon(1e-14));
    CHECK(sharper < got);
}

TEST_CASE("InfoNCE is symmetric under swapping sides") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        size_t n = 2 + rng.next_below(5);
        Matrix l(n, 6), r(n, 6);
        auto fill_unit = [&](Matrix& m) {
            for (size_t i = 0; i < m.rows; ++i) {
                double norm = 0.0;
                for (size_t c = 0; c < m.cols; ++c) {
                    m.at(i, c) = rng.uniform(-1.0, 1.0);
                    norm += m.at(i, c) * m.at(i, c);
                }
                norm = std::sqrt(norm);
                for (size_t c = 0; c < m.cols; ++c) m.at(i, c) /= norm;
            }
        };
        fill_unit(l);
        fill_unit(r);
        double ab = infonce_on_vectors(l, r, 0.1);
        double ba = infonce_on_vectors(r, l, 0.1);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("InfoNCE rejects non-positive temperatures") {
    auto l = rows({{1.0, 0.0}});
    try {
        infonce_on_vectors(l, l, 0.0);
        FAIL("expected BadTemperature");
    } catch (const Error& e) {
        CHECK(e.code() == Err::BadTemperature);
    }
}

TEST_CASE("KL distillation is zero at equality and positive otherwise") {
    std::vector<double> s = {1.0, 0.5, -0.2, 3.0};
    CHECK(kl_distill(s, s, false) == 0.0);
    CHECK(kl_distill(s, s, true) == 0.0);

    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(8), b(8);
        for (auto& x : a) x = rng.uniform(-2.0, 2.0);
        for (auto& x : b) x = rng.uniform(-2.0, 2.0);
        CHECK(kl_distill(a, b, false) >= 0.0);
        CHECK(kl_distill(a, b, true) >= 0.0);
    }
}

TEST_CASE("KL hand case: p=(0.7,0.3) against uniform student") {
    // Teacher logits chosen so softmax(teacher) = (0.7, 0.3).
    std::vector<double> teacher = {std::log(0.7), std::log(0.3)};
    std::vector<double> student = {0.0, 0.0};
    double expected = 0.7 * std::log(0.7 / 0.5) + 0.3 * std::log(0.3 / 0.5);
    double got = kl_distill(student, teacher, false);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.082282).epsilon(1e-4));
}

TEST_CASE("min-max normalization makes the KL invariant to teacher affine shifts") {
    Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> s(8), t(8);
        for (auto& x : s) x = rng.uniform(-3.0, 3.0);
        for (auto& x : t) x = rng.uniform(-3.0, 3.0);
        double a = rng.uniform(0.2, 5.0);
        double b = rng.uniform(-4.0, 4.0);
        std::vector<double> t2(8);
        for (size_t i = 0; i < 8; ++i) t2[i] = a * t[i] + b;
        double l1 = kl_distill(s, t, true);
        double l2 = kl_distill(s, t2, true);
        CHECK(std::fabs(l1 - l2) < 1e-10);
    }
}

TEST_CASE("KL gradient matches finite differences on the student scores") {
    std::vector<double> s = {0.3, -0.8, 1.2, 0.05, 2.0, -1.0, 0.4, 0.9};
    std::vector<double> t = {2.0, 0.1, -0.3, 0.7, 1.1, -0.9, 0.0, 0.35};
    for (bool normalize : {false, true}) {
        std::vector<double> grad;
        kl_distill(s, t, normalize, 1.0, &grad);
        const double h = 1e-6;
        for (size_t k = 0; k < s.size(); ++k) {
            auto sp = s, sm = s;
            sp[k] += h;
            sm[k] -= h;
            double fd =
                (kl_distill(sp, t, normalize) - kl_distill(sm, t, normalize)) / (2.0 * h);
            CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("mrl_aggregate is the weighted sum with matching shapes") {
    auto heads = init_heads(HeadMode::mrl, {2, 3}, 4, 1);
    LossValue a;
    a.value = 0.7;
    a.grads = HeadGradients::zeros_like(heads);
    a.grads.g[0].at(0, 0) = 2.0;
    LossValue b;
    b.value = 0.7;
    b.grads = HeadGradients::zeros_like(heads);
    b.grads.g[1].at(2, 1) = -1.0;

    SUBCASE("single dim with weight 1 is the identity") {
        std::map<int, LossValue> at_dim;
        at_dim.emplace(2, a);
        auto out = mrl_aggregate(at_dim, {{2, 1.0}});
        CHECK(out.value == 0.7);
        CHECK(out.grads.g[0].at(0, 0) == 2.0);
    }
    SUBCASE("equal losses with unit weights double the value") {
        std::map<int, LossValue> at_dim;
        at_dim.emplace(2, a);
        at_dim.emplace(3, b);
        auto out = mrl_aggregate(at_dim, {{2, 1.0}, {3, 1.0}});
        CHECK(out.value == doctest::Approx(1.4).epsilon(1e-15));
        CHECK(out.grads.g[0].at(0, 0) == 2.0);
        CHECK(out.grads.g[1].at(2, 1) == -1.0);
    }
    SUBCASE("dim mismatch between losses and weights is an error") {
        std::map<int, LossValue> at_dim;
        at_dim.emplace(2, a);
        CHECK_THROWS_AS(mrl_aggregate(at_dim, {{3, 1.0}}), Error);
    }
    SUBCASE("non-positive weights are rejected") {
        std::map<int, LossValue> at_dim;
        at_dim.emplace(2, a);
        CHECK_THROWS_AS(mrl_aggregate(at_dim, {{2, 0.0}}), Error);
    }
}

TEST_CASE("grad_check on a pure linear function is exact to roundoff") {
    auto heads = init_heads(HeadMode::mrl, {2, 3}, 4, 2);
    Rng rng(24);
    std::vector<Matrix> coeffs;
    for (const auto& w : heads.weights) {
        Matrix c(w.rows, w.cols);
        for (auto& x : c.a) x = rng.uniform(-1.0, 1.0);
        coeffs.push_back(std::move(c));
    }
    LossFn linear = [&](const ProjectionHeads& h) {
        LossValue lv;
        lv.grads = HeadGradients::zeros_like(h);
        for (size_t m = 0; m < h.weights.size(); ++m) {
            for (size_t e = 0; e < h.weights[m].a.size(); ++e) {
                lv.value += coeffs[m].a[e] * h.weights[m].a[e];
                lv.grads.g[m].a[e] = coeffs[m].a[e];
            }
        }
        return lv;
    };
    auto report = grad_check(linear, heads, 1e-4, 1e-4);
    CHECK(report.pass);
    CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("MRL-E per-dim gradients touch only the first d rows of the shared matrix") {
    // 3x2 toy weight: dims {2,3}, hidden 2.
    auto cfg = tiny_cfg(2, 31);
    Featurizer featurizer(cfg);
    std::vector<PairExample> pairs = {{"aa bb", "cc dd"}, {"ee ff", "gg hh"}};
    PairBatch batch = make_pair_batch(pairs, featurizer);
    auto heads = init_heads(HeadMode::mrl_e, {2, 3}, 2, 3);

    LossValue at2 = infonce_bidirectional(batch, heads, 2, InfoNceOpts{0.5});
    REQUIRE(at2.grads.g.size() == 1);
    for (size_t c = 0; c < 2; ++c) CHECK(at2.grads.g[0].at(2, c) == 0.0);

    // And the aggregate over both dims passes a finite-difference check.
    LossFn fn = [&](const ProjectionHeads& h) {
        std::map<int, LossValue> per_dim;
        per_dim.emplace(2, infonce_bidirectional(batch, h, 2, InfoNceOpts{0.5}));
        per_dim.emplace(3, infonce_bidirectional(batch, h, 3, InfoNceOpts{0.5}));
        return mrl_aggregate(per_dim, {{2, 1.0}, {3, 1.0}});
    };
    auto report = grad_check(fn, heads, 1e-4, 1e-4);
    CHECK(report.pass);
}

TEST_CASE("corrupted gradients fail the comparison (negative control)") {
    auto heads = init_heads(HeadMode::mrl, {2, 3}, 4, 5);
    LossFn quadratic = [](const ProjectionHeads& h) {
        LossValue lv;
        lv.grads = HeadGradients::zeros_like(h);
        for (size_t m = 0; m < h.weights.size(); ++m)
            for (size_t e = 0; e < h.weights[m].a.size(); ++e) {
                lv.value += h.weights[m].a[e] * h.weights[m].a[e];
                lv.grads.g[m].a[e] = 2.0 * h.weights[m].a[e];
            }
        return lv;
    };
    LossValue analytic = quadratic(heads);
    HeadGradients fd = finite_difference_gradients(quadratic, heads, 1e-4);
    CHECK(compare_gradients(analytic.grads, fd, 1e-4).pass);

    HeadGradients corrupted = analytic.grads;
    corrupted.g[0].a[0] *= 2.0; // one entry doubled
    CHECK_FALSE(compare_gradients(corrupted, fd, 1e-4).pass);
}

TEST_CASE("full gradient harness passes on a quick run") {
    auto run = run_gradient_checks(123, 3, 1e-4, 1e-4);
    CHECK(run.pass);
    CHECK(run.negative_control_detected);
    REQUIRE(run.suites.size() == 4);
    for (const auto& suite : run.suites) {
        CHECK(suite.pass);
        CHECK(suite.cases.size() == 3);
        CHECK(suite.max_rel_err < 1e-4);
    }
}

TEST_CASE("batch losses carry finite gradients shaped like the heads") {
    auto cfg = tiny_cfg(8, 32);
    Featurizer featurizer(cfg);
    std::vector<PairExample> pairs = {{"red apple", "green pear"}, {"blue sky", "gray cloud"}};
    PairBatch pb = make_pair_batch(pairs, featurizer);
    auto heads = init_heads(HeadMode::mrl, {4, 8}, 8, 6);

    LossValue lv = infonce_bidirectional(pb, heads, 4, InfoNceOpts{0.02});
    CHECK(lv.value >= 0.0);
    CHECK(lv.grads.all_finite());
    REQUIRE(lv.grads.g.size() == heads.weights.size());
    for (size_t i = 0; i < lv.grads.g.size(); ++i)
        CHECK(lv.grads.g[i].same_shape(heads.weights[i]));
}

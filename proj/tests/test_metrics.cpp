#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lire/error.hpp"
#include "lire/metrics.hpp"
#include "lire/rng.hpp"
#include "testutil.hpp"

using namespace lire;

namespace {

RunFile run_of(const std::string& qid, std::initializer_list<const char*> docs) {
    RunFile run;
    double score = static_cast<double>(docs.size());
    for (const char* d : docs) run.add(qid, d, score--);
    run.normalize();
    return run;
}

Qrels qrels_of(const std::string& qid,
               std::initializer_list<std::pair<const char*, int>> judged) {
    Qrels q;
    for (const auto& [d, g] : judged) q.by_query[qid][d] = g;
    return q;
}

} // namespace

TEST_CASE("nDCG: single relevant doc at rank 1 scores 1.0") {
    auto run = run_of("q", {"rel", "x", "y"});
    auto qrels = qrels_of("q", {{"rel", 1}});
    CHECK(ndcg_at(run, qrels, 10).per_query.at("q") == 1.0);
}

TEST_CASE("nDCG: single binary-relevant doc at rank 2 scores 1/log2(3)") {
    auto run = run_of("q", {"x", "rel", "y"});
    auto qrels = qrels_of("q", {{"rel", 1}});
    double expected = 1.0 / std::log2(3.0);
    double got = ndcg_at(run, qrels, 10).per_query.at("q");
    CHECK(got == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::fabs(got - 0.630930) < 1e-6);
}

TEST_CASE("nDCG: graded case {A:2, B:1} ranked [B, A]") {
    auto run = run_of("q", {"B", "A"});
    auto qrels = qrels_of("q", {{"A", 2}, {"B", 1}});
    double got = ndcg_at(run, qrels, 10).per_query.at("q");
    // Hand evaluation with linear gain.
    double dcg = 1.0 / std::log2(2.0) + 2.0 / std::log2(3.0);
    double idcg = 2.0 / std::log2(2.0) + 1.0 / std::log2(3.0);
    CHECK(got == doctest::Approx(dcg / idcg).epsilon(1e-14));
    CHECK(std::fabs(got - 0.859720) < 1e-6);

    // Cross-check the ideal DCG against the brute-force best permutation.
    std::map<std::string, int> judged = {{"A", 2}, {"B", 1}};
    CHECK(idcg == doctest::Approx(testutil::RefMetrics::brute_force_ideal_dcg(judged, 10))
                      .epsilon(1e-14));
}

TEST_CASE("MRR at fixed ranks") {
    auto qrels = qrels_of("q", {{"rel", 1}});
    CHECK(mrr_at(run_of("q", {"rel", "a", "b"}), qrels, 10).per_query.at("q") == 1.0);
    CHECK(mrr_at(run_of("q", {"a", "b", "c", "rel"}), qrels, 10).per_query.at("q") == 0.25);

    RunFile run11;
    for (int i = 0; i < 10; ++i) run11.add("q", "junk" + std::to_string(i), 20.0 - i);
    run11.add("q", "rel", 1.0);
    run11.normalize();
    CHECK(mrr_at(run11, qrels, 10).per_query.at("q") == 0.0);
}

TEST_CASE("Success@5 counts queries with any relevant doc in the cutoff") {
    Qrels qrels;
    qrels.by_query["q1"]["rel1"] = 1;
    qrels.by_query["q2"]["rel2"] = 1;

    RunFile run;
    run.add("q1", "rel1", 2.0);
    run.add("q1", "x", 1.0);
    for (int i = 0; i < 5; ++i) run.add("q2", "junk" + std::to_string(i), 10.0 - i);
    run.add("q2", "rel2", 1.0); // rank 6
    run.normalize();

    auto res = success_at(run, qrels, 5);
    CHECK(res.per_query.at("q1") == 1.0);
    CHECK(res.per_query.at("q2") == 0.0);
    CHECK(res.mean == 0.5);
}

TEST_CASE("an ideal run scores 1.0 on all three metrics") {
    Qrels qrels;
    qrels.by_query["q1"] = {{"a", 2}, {"b", 1}};
    qrels.by_query["q2"] = {{"c", 1}};
    RunFile run;
    run.add("q1", "a", 2.0);
    run.add("q1", "b", 1.0);
    run.add("q2", "c", 1.0);
    run.normalize();

    auto report = evaluate(run, qrels, parse_metric_specs("ndcg@10,mrr@10,success@5"));
    for (const auto& [spec, res] : report.metrics) CHECK(res.mean == 1.0);
}

TEST_CASE("reversed oracle on ten docs with one relevant: nDCG@10 = 1/log2(11)") {
    Qrels qrels = qrels_of("q", {{"rel", 1}});
    RunFile run;
    for (int i = 0; i < 9; ++i) run.add("q", "junk" + std::to_string(i), 100.0 - i);
    run.add("q", "rel", 1.0); // rank 10
    run.normalize();
    double got = ndcg_at(run, qrels, 10).per_query.at("q");
    CHECK(got == doctest::Approx(1.0 / std::log2(11.0)).epsilon(1e-14));
    CHECK(std::fabs(got - 0.289065) < 1e-6);
}

TEST_CASE("metrics ignore permutations below the cutoff") {
    Rng rng(60);
    Qrels qrels = qrels_of("q", {{"r1", 2}, {"r2", 1}});
    RunFile base;
    for (int i = 0; i < 20; ++i) base.add("q", "d" + std::to_string(i), 50.0 - i);
    base.add("q", "r1", 100.0);
    base.add("q", "r2", 99.0);
    base.normalize();

    RunFile permuted = base;
    auto& entries = permuted.by_query["q"];
    // Reshuffle the scores of everything past rank 10, keeping them below
    // the rank-10 score.
    std::vector<double> tail_scores;
    for (size_t i = 10; i < entries.size(); ++i) tail_scores.push_back(entries[i].score);
    rng.shuffle(tail_scores);
    for (size_t i = 10; i < entries.size(); ++i) entries[i].score = tail_scores[i - 10];
    permuted.normalize();

    for (const char* metric : {"ndcg@10", "mrr@10", "success@5"}) {
        auto specs = parse_metric_specs(metric);
        auto a = evaluate(base, qrels, specs);
        auto b = evaluate(permuted, qrels, specs);
        CHECK(a.metrics[0].second.mean == b.metrics[0].second.mean);
    }
}

TEST_CASE("nDCG depends only on ranks, not score magnitudes") {
    Qrels qrels = qrels_of("q", {{"r", 3}});
    RunFile a, b;
    a.add("q", "x", 3.0);
    a.add("q", "r", 2.0);
    a.add("q", "y", 1.0);
    b.add("q", "x", 1000.0);
    b.add("q", "r", 500.5);
    b.add("q", "y", 0.25);
    a.normalize();
    b.normalize();
    CHECK(ndcg_at(a, qrels, 10).mean == ndcg_at(b, qrels, 10).mean);
}

TEST_CASE("exponential gain differs from linear only for grades above 1") {
    Qrels binary = qrels_of("q", {{"r", 1}});
    auto run = run_of("q", {"x", "r"});
    CHECK(ndcg_at(run, binary, 10, GainMode::linear).mean ==
          ndcg_at(run, binary, 10, GainMode::exponential).mean);

    Qrels graded = qrels_of("q", {{"r", 3}, {"x", 1}});
    CHECK(ndcg_at(run, graded, 10, GainMode::linear).mean !=
          ndcg_at(run, graded, 10, GainMode::exponential).mean);
}

TEST_CASE("queries without judgments or without relevant docs are skipped with warnings") {
    Qrels qrels;
    qrels.by_query["q1"]["a"] = 1;
    qrels.by_query["q2"]["b"] = 0; // judged but nothing relevant
    RunFile run;
    run.add("q1", "a", 1.0);
    run.add("q2", "b", 1.0);
    run.add("q3", "c", 1.0); // unjudged
    run.normalize();

    Warnings warnings;
    auto res = ndcg_at(run, qrels, 10, GainMode::linear, &warnings);
    CHECK(res.evaluated == 1);
    CHECK(res.skipped == 2);
    CHECK(warnings.size() == 2);
    CHECK(res.mean == 1.0);
}

TEST_CASE("evaluate with no judged queries is an error") {
    Qrels qrels;
    qrels.by_query["other"]["a"] = 1;
    RunFile run;
    run.add("q", "a", 1.0);
    run.normalize();
    try {
        evaluate(run, qrels, parse_metric_specs("ndcg@10"));
        FAIL("expected NoJudgedQueries");
    } catch (const Error& e) {
        CHECK(e.code() == Err::NoJudgedQueries);
    }
}

TEST_CASE("run files reject duplicate docs and re-sort deterministically") {
    RunFile run;
    run.add("q", "a", 1.0);
    run.add("q", "a", 2.0);
    CHECK_THROWS_AS(run.normalize(), Error);

    RunFile ties;
    ties.add("q", "beta", 1.0);
    ties.add("q", "alpha", 1.0);
    ties.add("q", "zed", 2.0);
    ties.normalize();
    CHECK(ties.by_query["q"][0].doc_id == "zed");
    CHECK(ties.by_query["q"][1].doc_id == "alpha"); // doc_id tie-break
    CHECK(ties.by_query["q"][2].doc_id == "beta");
}

TEST_CASE("run file save/load round trip preserves order and scores") {
    auto dir = testutil::fresh_temp_dir("runfile");
    RunFile run;
    Rng rng(61);
    for (int q = 0; q < 3; ++q)
        for (int d = 0; d < 7; ++d)
            run.add("q" + std::to_string(q), "d" + std::to_string(d), rng.uniform(-2.0, 2.0));
    run.normalize();
    save_run(run, dir + "/r.trec", "tag");
    RunFile back = load_run(dir + "/r.trec");
    REQUIRE(back.by_query.size() == run.by_query.size());
    for (const auto& [qid, entries] : run.by_query) {
        const auto& be = back.by_query.at(qid);
        REQUIRE(be.size() == entries.size());
        for (size_t i = 0; i < entries.size(); ++i) {
            CHECK(be[i].doc_id == entries[i].doc_id);
            CHECK(be[i].score == entries[i].score); // %.17g round trip
        }
    }
}

TEST_CASE("metric grammar parses and rejects junk") {
    auto specs = parse_metric_specs("ndcg@10,mrr@10,success@5");
    REQUIRE(specs.size() == 3);
    CHECK(specs[0].label() == "ndcg@10");
    CHECK(specs[2].cutoff == 5);
    CHECK_THROWS_AS(parse_metric_specs("map@10"), Error);
    CHECK_THROWS_AS(parse_metric_specs("ndcg"), Error);
    CHECK_THROWS_AS(parse_metric_specs(""), Error);
}

TEST_CASE("random instances agree exactly with the reference evaluator") {
    Rng rng(62);
    for (int trial = 0; trial < 300; ++trial) {
        size_t ndocs = 1 + rng.next_below(10);
        // Random judgments over a doc pool, random scores over a subset.
        Qrels qrels;
        std::map<std::string, int> judged;
        for (size_t d = 0; d < ndocs; ++d) {
            int grade = static_cast<int>(rng.next_below(4));
            std::string did = "d" + std::to_string(d);
            if (grade > 0 || rng.next_below(2) == 0) {
                qrels.by_query["q"][did] = grade;
                judged[did] = grade;
            }
        }
        bool any_rel = false;
        for (const auto& [_, g] : judged) any_rel |= g > 0;
        if (!any_rel) continue;

        RunFile run;
        size_t nranked = 1 + rng.next_below(ndocs);
        for (size_t d = 0; d < nranked; ++d)
            run.add("q", "d" + std::to_string(d), rng.uniform(-10.0, 10.0));
        run.normalize();

        std::vector<std::string> ranked;
        for (const auto& e : run.by_query["q"]) ranked.push_back(e.doc_id);

        int cutoff = 1 + static_cast<int>(rng.next_below(10));
        CHECK(ndcg_at(run, qrels, cutoff).per_query.at("q") ==
              testutil::RefMetrics::ndcg(ranked, judged, cutoff));
        CHECK(mrr_at(run, qrels, cutoff).per_query.at("q") ==
              testutil::RefMetrics::reciprocal_rank(ranked, judged, cutoff));
        CHECK(success_at(run, qrels, cutoff).per_query.at("q") ==
              testutil::RefMetrics::success(ranked, judged, cutoff));
    }
}

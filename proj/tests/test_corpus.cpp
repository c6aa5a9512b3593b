#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lire/corpus.hpp"
#include "lire/error.hpp"
#include "lire/log.hpp"
#include "testutil.hpp"

using namespace lire;

namespace {

std::string write_lines(const std::string& dir, const std::string& name,
                        const std::string& content) {
    std::string path = dir + "/" + name;
    std::ofstream f(path);
    f << content;
    return path;
}

} // namespace

TEST_CASE("load_corpus parses single records") {
    auto dir = testutil::fresh_temp_dir("corpus1");
    auto path = write_lines(dir, "c.jsonl", R"({"_id":"d1","title":"","text":"hello"})" "\n");
    Corpus c = load_corpus(path);
    REQUIRE(c.size() == 1);
    CHECK(c.docs[0].doc_id == "d1");
    CHECK(c.docs[0].title.empty());
    CHECK(c.docs[0].text == "hello");
}

TEST_CASE("load_corpus rejects an empty file") {
    auto dir = testutil::fresh_temp_dir("corpus2");
    auto path = write_lines(dir, "c.jsonl", "");
    try {
        load_corpus(path);
        FAIL("expected EmptyCorpus");
    } catch (const Error& e) {
        CHECK(e.code() == Err::EmptyCorpus);
    }
}

TEST_CASE("load_corpus rejects duplicate ids, naming the id and line") {
    auto dir = testutil::fresh_temp_dir("corpus3");
    auto path = write_lines(dir, "c.jsonl",
                            R"({"_id":"d1","title":"","text":"a"})" "\n"
                            R"({"_id":"d1","title":"","text":"b"})" "\n");
    try {
        load_corpus(path);
        FAIL("expected DuplicateId");
    } catch (const Error& e) {
        CHECK(e.code() == Err::DuplicateId);
        CHECK(std::string(e.what()).find("d1") != std::string::npos);
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("load_corpus reports malformed lines with their line number") {
    auto dir = testutil::fresh_temp_dir("corpus4");
    auto path = write_lines(dir, "c.jsonl",
                            R"({"_id":"d1","title":"","text":"a"})" "\n" "not json\n");
    try {
        load_corpus(path);
        FAIL("expected MalformedLine");
    } catch (const Error& e) {
        CHECK(e.code() == Err::MalformedLine);
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("load_corpus rejects documents with no content after trim") {
    auto dir = testutil::fresh_temp_dir("corpus5");
    auto path = write_lines(dir, "c.jsonl", R"({"_id":"d1","title":"  ","text":" \t"})" "\n");
    CHECK_THROWS_AS(load_corpus(path), Error);
}

TEST_CASE("qrels parsing, grades, and duplicate handling") {
    auto dir = testutil::fresh_temp_dir("qrels");

    SUBCASE("single record") {
        auto path = write_lines(dir, "q.tsv", "q1 0 d1 2\n");
        Qrels q = load_qrels(path);
        CHECK(q.grade("q1", "d1") == 2);
    }
    SUBCASE("negative grade is an error") {
        auto path = write_lines(dir, "q.tsv", "q1 0 d1 -1\n");
        try {
            load_qrels(path);
            FAIL("expected NegativeGrade");
        } catch (const Error& e) {
            CHECK(e.code() == Err::NegativeGrade);
        }
    }
    SUBCASE("non-integer grade is an error") {
        auto path = write_lines(dir, "q.tsv", "q1 0 d1 two\n");
        CHECK_THROWS_AS(load_qrels(path), Error);
    }
    SUBCASE("duplicates: last wins with a warning") {
        auto path = write_lines(dir, "q.tsv", "q1 0 d1 1\nq1 0 d1 2\n");
        Warnings warnings;
        Qrels q = load_qrels(path, &warnings);
        CHECK(q.grade("q1", "d1") == 2);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("duplicate") != std::string::npos);
    }
    SUBCASE("order-insensitive apart from the duplicate rule") {
        auto a = write_lines(dir, "a.tsv", "q1 0 d1 1\nq2 0 d2 3\nq1 0 d3 0\n");
        auto b = write_lines(dir, "b.tsv", "q1 0 d3 0\nq2 0 d2 3\nq1 0 d1 1\n");
        CHECK(load_qrels(a).by_query == load_qrels(b).by_query);
    }
    SUBCASE("tabs parse like spaces") {
        auto path = write_lines(dir, "q.tsv", "q1\t0\td1\t2\n");
        CHECK(load_qrels(path).grade("q1", "d1") == 2);
    }
}

TEST_CASE("triplet schema enforcement") {
    auto dir = testutil::fresh_temp_dir("triplets");

    SUBCASE("six negatives rejected") {
        std::string line =
            R"({"query":"q","positive":"p","negatives":["a","b","c","d","e","f"],)"
            R"("teacher_scores":[1,2,3,4,5,6,7]})";
        auto path = write_lines(dir, "t.jsonl", line + "\n");
        try {
            load_triplets(path);
            FAIL("expected WrongNegativeCount");
        } catch (const Error& e) {
            CHECK(e.code() == Err::WrongNegativeCount);
            CHECK(std::string(e.what()).find('6') != std::string::npos);
        }
    }
    SUBCASE("seven negatives with eight scores parse") {
        std::string line =
            R"({"query":"q","positive":"p","negatives":["a","b","c","d","e","f","g"],)"
            R"("teacher_scores":[1,2,3,4,5,6,7,8]})";
        auto path = write_lines(dir, "t.jsonl", line + "\n");
        auto ts = load_triplets(path);
        REQUIRE(ts.size() == 1);
        CHECK(ts[0].negatives.size() == 7);
        CHECK(ts[0].teacher_scores.size() == 8);
        CHECK(ts[0].teacher_scores[0] == 1.0);
    }
}

TEST_CASE("pair lines parse") {
    auto dir = testutil::fresh_temp_dir("pairs");
    auto path = write_lines(dir, "p.jsonl", R"({"left":"a","right":"b"})" "\n");
    auto ps = load_pairs(path);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].left_text == "a");
    CHECK(ps[0].right_text == "b");
}

TEST_CASE("corpus round trip is record-equal") {
    auto dir = testutil::fresh_temp_dir("roundtrip");
    Corpus c;
    c.docs.push_back({"d1", "A Title", "body with \"quotes\" and\ttabs"});
    c.docs.push_back({"d2", "", "unicode: こんにちは — ok"});
    c.docs.push_back({"id with space", "t", "x"});
    auto path = dir + "/c.jsonl";
    save_corpus(c, path);
    Corpus back = load_corpus(path);
    REQUIRE(back.size() == c.size());
    for (size_t i = 0; i < c.size(); ++i) CHECK(back.docs[i] == c.docs[i]);

    // Second serialization is byte-identical.
    auto path2 = dir + "/c2.jsonl";
    save_corpus(back, path2);
    std::ifstream f1(path), f2(path2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

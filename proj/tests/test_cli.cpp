#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "lire/io.hpp"
#include "testutil.hpp"

namespace {

std::string lire_bin() {
    const char* env = std::getenv("LIRE_BIN");
    REQUIRE_MESSAGE(env != nullptr, "LIRE_BIN must point at the lire executable");
    return env;
}

struct CmdResult {
    int exit_code;
    std::string output; // stdout + stderr
};

CmdResult run_cmd(const std::string& args) {
    auto dir = std::filesystem::temp_directory_path() / "lire_cli_out.txt";
    std::string cmd = lire_bin() + " " + args + " > " + dir.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream f(dir);
    r.output.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return r;
}

} // namespace

TEST_CASE("unknown flags exit 1 with usage text") {
    auto r = run_cmd("gen-synthetic --no-such-flag");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("--out") != std::string::npos); // usage mentions real flags
}

TEST_CASE("eval without --qrels exits 1 and names the flag") {
    auto r = run_cmd("eval --run nowhere.trec");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("--qrels") != std::string::npos);
}

TEST_CASE("missing input files exit 2") {
    auto dir = testutil::fresh_temp_dir("cli_missing");
    auto r = run_cmd("eval --run " + dir + "/absent.trec --qrels " + dir + "/absent.tsv");
    CHECK(r.exit_code == 2);
}

TEST_CASE("invalid enum values exit 1") {
    auto dir = testutil::fresh_temp_dir("cli_enum");
    auto r = run_cmd("gen-synthetic --out " + dir + " --docs 10 --queries 2 --seed 1");
    REQUIRE(r.exit_code == 0);
    auto r2 = run_cmd("train-pairs --pairs " + dir + "/pairs.jsonl --out " + dir +
                      "/h.jchd --mode bogus --steps 1 --batch-size 2");
    CHECK(r2.exit_code == 1);
}

TEST_CASE("gen-synthetic is byte-deterministic per seed") {
    auto d1 = testutil::fresh_temp_dir("cli_gen1");
    auto d2 = testutil::fresh_temp_dir("cli_gen2");
    std::string flags = " --docs 40 --queries 5 --pairs 32 --triplets 8 --clusters 4 --seed 99";
    REQUIRE(run_cmd("gen-synthetic --out " + d1 + flags).exit_code == 0);
    REQUIRE(run_cmd("gen-synthetic --out " + d2 + flags).exit_code == 0);
    for (const char* name :
         {"corpus.jsonl", "queries.jsonl", "qrels.tsv", "pairs.jsonl", "triplets.jsonl"}) {
        CHECK(lire::read_file_bytes(d1 + "/" + name) == lire::read_file_bytes(d2 + "/" + name));
    }
    // Manifests exist next to every artifact.
    for (const char* name : {"corpus.jsonl", "qrels.tsv"})
        CHECK(std::filesystem::exists(d1 + "/" + std::string(name) + ".manifest.json"));
}

TEST_CASE("full pipeline runs and produces a sane evaluation") {
    auto dir = testutil::fresh_temp_dir("cli_pipe");
    std::string gen = "gen-synthetic --out " + dir +
                      " --docs 60 --queries 6 --pairs 64 --triplets 16 --clusters 4 --seed 3";
    REQUIRE(run_cmd(gen).exit_code == 0);

    std::string enc = " --hidden-dim 48 --dims 16,32 --max-query-len 8 --max-doc-len 16";
    REQUIRE(run_cmd("train-pairs --pairs " + dir + "/pairs.jsonl --out " + dir + "/h1.jchd" +
                    enc + " --steps 30 --batch-size 32 --seed 3 --quiet")
                .exit_code == 0);
    REQUIRE(run_cmd("train-triplets --triplets " + dir + "/triplets.jsonl --init " + dir +
                    "/h1.jchd --out " + dir + "/h2.jchd --steps 10 --batch-size 8 --seed 3 " +
                    "--max-query-len 8 --max-doc-len 16 --quiet")
                .exit_code == 0);
    REQUIRE(run_cmd("index --corpus " + dir + "/corpus.jsonl --heads " + dir +
                    "/h2.jchd --dim 32 --out " + dir + "/i.jcv2 --seed 3 " +
                    "--max-query-len 8 --max-doc-len 16 --quiet")
                .exit_code == 0);
    REQUIRE(run_cmd("search --index " + dir + "/i.jcv2 --heads " + dir + "/h2.jchd --queries " +
                    dir + "/queries.jsonl --k 10 --out " + dir + "/run.trec --quiet")
                .exit_code == 0);

    auto eval = run_cmd("eval --run " + dir + "/run.trec --qrels " + dir +
                        "/qrels.tsv --metric ndcg@10,mrr@10,success@5 --out " + dir +
                        "/eval.json --quiet");
    REQUIRE(eval.exit_code == 0);
    CHECK(eval.output.find("ndcg@10") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/eval.json"));

    // Search twice: identical run files.
    REQUIRE(run_cmd("search --index " + dir + "/i.jcv2 --heads " + dir + "/h2.jchd --queries " +
                    dir + "/queries.jsonl --k 10 --out " + dir + "/run2.trec --quiet")
                .exit_code == 0);
    CHECK(lire::read_file_bytes(dir + "/run.trec") == lire::read_file_bytes(dir + "/run2.trec"));

    // Candidate mode and sampler verbs run.
    REQUIRE(run_cmd("search --index " + dir + "/i.jcv2 --heads " + dir + "/h2.jchd --queries " +
                    dir + "/queries.jsonl --k 10 --mode bm25 --candidates 50 --corpus " + dir +
                    "/corpus.jsonl --out " + dir + "/run3.trec --quiet")
                .exit_code == 0);
    auto sample = run_cmd("sample-corpus --corpus " + dir + "/corpus.jsonl --queries " + dir +
                          "/queries.jsonl --qrels " + dir + "/qrels.tsv --k 5 --out " + dir +
                          "/sampled.jsonl --quiet");
    REQUIRE(sample.exit_code == 0);
    CHECK(sample.output.find("judged=") != std::string::npos);

    // mrl-report emits one row per head dim.
    auto mrl = run_cmd("mrl-report --heads " + dir + "/h2.jchd --corpus " + dir +
                       "/corpus.jsonl --queries " + dir + "/queries.jsonl --qrels " + dir +
                       "/qrels.tsv --seed 3 --max-query-len 8 --max-doc-len 16 --out " + dir +
                       "/mrl.json --quiet");
    REQUIRE(mrl.exit_code == 0);
    CHECK(mrl.output.find("16") != std::string::npos);
    CHECK(mrl.output.find("32") != std::string::npos);
}

TEST_CASE("gradcheck verb writes a report and exits 0 on a quick pass") {
    auto dir = testutil::fresh_temp_dir("cli_gc");
    auto r = run_cmd("gradcheck --seed 5 --instances 2 --out " + dir + "/report.json --quiet");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("negative_control") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/report.json"));
}

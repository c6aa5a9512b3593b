// lire: late-interaction retrieval engine CLI.
//
// Verbs: gen-synthetic, train-pairs, train-triplets, index, search, eval,
// sample-corpus, gradcheck, mrl-report. Exit codes: 0 success, 1 flag or
// config validation error, 2 data/runtime error. All randomness flows from
// --seed; every produced artifact gets a .manifest.json beside it.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lire/bm25.hpp"
#include "lire/corpus.hpp"
#include "lire/error.hpp"
#include "lire/featurizer.hpp"
#include "lire/gradcheck.hpp"
#include "lire/heads.hpp"
#include "lire/io.hpp"
#include "lire/kernels.hpp"
#include "lire/log.hpp"
#include "lire/manifest.hpp"
#include "lire/metrics.hpp"
#include "lire/synthetic.hpp"
#include "lire/trainer.hpp"
#include "lire/vindex.hpp"

namespace {

using lire::Err;
using lire::Error;
using ojson = nlohmann::ordered_json;

std::chrono::steady_clock::time_point g_start;
std::string g_command_line;

lire::RunManifest new_manifest(uint64_t seed, ojson config) {
    lire::RunManifest m;
    m.command_line = g_command_line;
    m.config = std::move(config);
    m.seed = seed;
    m.started_at = lire::iso8601_utc_now();
    return m;
}

void finish_manifest(lire::RunManifest& m, const std::vector<std::string>& artifacts) {
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - g_start).count();
    for (const auto& a : artifacts) m.add_artifact(a);
    for (const auto& a : artifacts) lire::write_manifest(m, a);
}

struct EncodeFlags {
    int max_query_len = 32;
    int max_doc_len = 300;
    std::string prefix_mode = "markers";
    std::string augmentation = "contextual";
    std::string task = "ret";
    std::string instruction;
    int hidden_dim = 128;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--max-query-len", max_query_len, "Query token budget")
            ->capture_default_str();
        cmd->add_option("--max-doc-len", max_doc_len, "Document token budget")
            ->capture_default_str();
        cmd->add_option("--prefix-mode", prefix_mode, "markers|instructions")
            ->capture_default_str();
        cmd->add_option("--augmentation", augmentation, "off|static|contextual")
            ->capture_default_str();
        cmd->add_option("--task", task, "Instruction task: ret|qa|sts")->capture_default_str();
        cmd->add_option("--instruction", instruction, "Override the instruction text");
        cmd->add_option("--hidden-dim", hidden_dim, "Featurizer hidden dimension")
            ->capture_default_str();
    }

    lire::EncodeConfig to_config(uint64_t seed) const {
        lire::EncodeConfig cfg;
        cfg.max_query_len = max_query_len;
        cfg.max_doc_len = max_doc_len;
        cfg.prefix_mode = lire::prefix_mode_from(prefix_mode);
        cfg.augmentation = lire::augmentation_from(augmentation);
        cfg.task = lire::task_from(task);
        cfg.instruction_override = instruction;
        cfg.hidden_dim = hidden_dim;
        cfg.seed = seed;
        return cfg;
    }

    ojson to_json(uint64_t seed) const {
        ojson j;
        j["max_query_len"] = max_query_len;
        j["max_doc_len"] = max_doc_len;
        j["prefix_mode"] = prefix_mode;
        j["augmentation"] = augmentation;
        j["task"] = task;
        j["instruction_override"] = instruction;
        j["hidden_dim"] = hidden_dim;
        j["seed"] = seed;
        return j;
    }
};

std::vector<int> parse_dims(const std::string& csv) {
    std::vector<int> dims;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = lire::trim_whitespace(item);
        if (item.empty()) continue;
        try {
            dims.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw Error(Err::BadConfig, "bad dim '" + item + "' in --dims");
        }
    }
    if (dims.empty()) throw Error(Err::BadConfig, "--dims is empty");
    return dims;
}

lire::GainMode gain_from(const std::string& s) {
    if (s == "linear") return lire::GainMode::linear;
    if (s == "exp") return lire::GainMode::exponential;
    throw Error(Err::BadConfig, "unknown gain '" + s + "' (linear|exp)");
}

// ---- gen-synthetic --------------------------------------------------------

struct GenArgs {
    std::string out_dir;
    lire::SyntheticSpec spec;
};

void cmd_gen_synthetic(const GenArgs& args) {
    namespace fs = std::filesystem;
    fs::create_directories(args.out_dir);
    lire::SyntheticData data = lire::gen_synthetic(args.spec);

    auto path = [&](const char* name) { return (fs::path(args.out_dir) / name).string(); };
    lire::save_corpus(data.corpus, path("corpus.jsonl"));
    lire::save_queries(data.queries, path("queries.jsonl"));
    lire::save_qrels(data.qrels, path("qrels.tsv"));
    lire::save_pairs(data.pairs, path("pairs.jsonl"));
    lire::save_triplets(data.triplets, path("triplets.jsonl"));

    ojson cfg;
    cfg["docs"] = args.spec.docs;
    cfg["queries"] = args.spec.queries;
    cfg["pairs"] = args.spec.pairs;
    cfg["triplets"] = args.spec.triplets;
    cfg["clusters"] = args.spec.clusters;
    auto manifest = new_manifest(args.spec.seed, cfg);
    finish_manifest(manifest, {path("corpus.jsonl"), path("queries.jsonl"), path("qrels.tsv"),
                               path("pairs.jsonl"), path("triplets.jsonl")});
    std::printf("wrote %zu docs, %zu queries, %zu judgments, %zu pairs, %zu triplets to %s\n",
                data.corpus.size(), data.queries.size(), data.qrels.size(), data.pairs.size(),
                data.triplets.size(), args.out_dir.c_str());
}

// ---- training -------------------------------------------------------------

struct TrainArgs {
    std::string data_path;
    std::string out_path;
    std::string log_path;
    std::string init_path;
    std::string mode = "mrl";
    std::string dims_csv = "64,96,128,256,512,768";
    int steps = -1;
    int batch_size = -1;
    double peak_lr = -1.0;
    int warmup = -1;
    double tau = 0.02;
    double clip = 1.0;
    bool normalize_scores = false;
    double distill_temp = 1.0;
    uint64_t seed = 0;
    EncodeFlags encode;
};

void add_train_flags(CLI::App* cmd, TrainArgs& args, bool pair_stage) {
    cmd->add_option("--out", args.out_path, "Head checkpoint to write")->required();
    cmd->add_option("--log", args.log_path, "Training log JSONL (default <out>.log.jsonl)");
    cmd->add_option("--init", args.init_path, "Starting checkpoint (flags below then ignored)");
    cmd->add_option("--mode", args.mode, "mrl|mrl_e")->capture_default_str();
    cmd->add_option("--dims", args.dims_csv, "Head output dims, comma separated")
        ->capture_default_str();
    cmd->add_option("--steps", args.steps,
                    pair_stage ? "Optimizer steps (default 300)" : "Optimizer steps (default 200)");
    cmd->add_option("--batch-size", args.batch_size,
                    pair_stage ? "Examples per step (default 128)" : "Examples per step (default 32)");
    cmd->add_option("--peak-lr", args.peak_lr,
                    pair_stage ? "Peak learning rate (default 5e-5)"
                               : "Peak learning rate (default 1e-5)");
    cmd->add_option("--warmup", args.warmup,
                    pair_stage ? "Warmup steps (default min(1000, steps-1))"
                               : "Warmup steps (default 5% of steps)");
    cmd->add_option("--clip", args.clip, "Elementwise gradient clip threshold")
        ->capture_default_str();
    cmd->add_option("--seed", args.seed, "Seed for featurizer, init, and batching")
        ->capture_default_str();
    if (pair_stage) {
        cmd->add_option("--tau", args.tau, "InfoNCE temperature")->capture_default_str();
    } else {
        cmd->add_flag("--normalize-scores", args.normalize_scores,
                      "Min-max both score lists before the KL");
        cmd->add_option("--distill-temp", args.distill_temp, "Distillation softmax temperature")
            ->capture_default_str();
    }
    args.encode.add_to(cmd);
}

lire::TrainConfig build_train_config(const TrainArgs& args, bool pair_stage) {
    lire::TrainConfig cfg = pair_stage ? lire::TrainConfig::pair_defaults()
                                       : lire::TrainConfig::triplet_defaults();
    if (args.steps >= 0) cfg.steps = args.steps;
    if (args.batch_size > 0) cfg.batch_size = args.batch_size;
    if (args.peak_lr > 0) cfg.peak_lr = args.peak_lr;
    cfg.warmup = args.warmup; // -1 resolves per stage against the final steps
    cfg.tau = args.tau;
    cfg.clip_threshold = args.clip;
    cfg.normalize_scores = args.normalize_scores;
    cfg.distill_temperature = args.distill_temp;
    cfg.seed = args.seed;
    cfg.resolve();
    return cfg;
}

lire::ProjectionHeads starting_heads(const TrainArgs& args) {
    if (!args.init_path.empty()) return lire::load_heads(args.init_path);
    return lire::init_heads(lire::head_mode_from(args.mode), parse_dims(args.dims_csv),
                            args.encode.hidden_dim, args.seed);
}

ojson train_config_json(const lire::TrainConfig& cfg, const TrainArgs& args) {
    ojson j;
    j["stage"] = cfg.stage == lire::Stage::pairs ? "pairs" : "triplets";
    j["steps"] = cfg.steps;
    j["batch_size"] = cfg.batch_size;
    j["peak_lr"] = cfg.peak_lr;
    j["warmup"] = cfg.warmup;
    j["schedule"] =
        cfg.schedule == lire::Schedule::cosine ? "cosine" : "constant_after_warmup";
    j["clip_threshold"] = cfg.clip_threshold;
    if (cfg.stage == lire::Stage::pairs) j["tau"] = cfg.tau;
    if (cfg.stage == lire::Stage::triplets) {
        j["normalize_scores"] = cfg.normalize_scores;
        j["distill_temperature"] = cfg.distill_temperature;
    }
    j["encode"] = args.encode.to_json(args.seed);
    j["init"] = args.init_path;
    return j;
}

void cmd_train_pairs(const TrainArgs& args) {
    auto pairs = lire::load_pairs(args.data_path);
    lire::TrainConfig cfg = build_train_config(args, true);
    lire::ProjectionHeads heads = starting_heads(args);
    auto encode_cfg = args.encode.to_config(args.seed);
    encode_cfg.hidden_dim = heads.hidden_dim;

    lire::TrainResult result = lire::train_pairs(pairs, std::move(heads), encode_cfg, cfg);
    lire::save_heads(result.heads, args.out_path);
    std::string log_path = args.log_path.empty() ? args.out_path + ".log.jsonl" : args.log_path;
    lire::write_file_atomic(log_path, lire::train_log_to_jsonl(result.log));

    auto manifest = new_manifest(args.seed, train_config_json(cfg, args));
    manifest.add_input(args.data_path);
    if (!args.init_path.empty()) manifest.add_input(args.init_path);
    finish_manifest(manifest, {args.out_path, log_path});
    std::printf("trained %d steps on %zu pairs, final loss %.6f, checkpoint %s\n", cfg.steps,
                pairs.size(), result.log.empty() ? 0.0 : result.log.back().loss,
                args.out_path.c_str());
}

void cmd_train_triplets(const TrainArgs& args) {
    auto triplets = lire::load_triplets(args.data_path);
    lire::TrainConfig cfg = build_train_config(args, false);
    lire::ProjectionHeads heads = starting_heads(args);
    auto encode_cfg = args.encode.to_config(args.seed);
    encode_cfg.hidden_dim = heads.hidden_dim;

    lire::TrainResult result = lire::train_triplets(triplets, std::move(heads), encode_cfg, cfg);
    lire::save_heads(result.heads, args.out_path);
    std::string log_path = args.log_path.empty() ? args.out_path + ".log.jsonl" : args.log_path;
    lire::write_file_atomic(log_path, lire::train_log_to_jsonl(result.log));

    auto manifest = new_manifest(args.seed, train_config_json(cfg, args));
    manifest.add_input(args.data_path);
    if (!args.init_path.empty()) manifest.add_input(args.init_path);
    finish_manifest(manifest, {args.out_path, log_path});
    std::printf("trained %d steps on %zu triplets, final loss %.6f, checkpoint %s\n", cfg.steps,
                triplets.size(), result.log.empty() ? 0.0 : result.log.back().loss,
                args.out_path.c_str());
}

// ---- index / search -------------------------------------------------------

struct IndexArgs {
    std::string corpus_path, heads_path, out_path;
    int dim = 128;
    uint64_t seed = 0;
    EncodeFlags encode;
};

void cmd_index(const IndexArgs& args) {
    auto corpus = lire::load_corpus(args.corpus_path);
    auto heads = lire::load_heads(args.heads_path);
    auto encode_cfg = args.encode.to_config(args.seed);
    encode_cfg.hidden_dim = heads.hidden_dim;

    lire::Warnings warnings;
    auto index = lire::build_index(corpus, heads, args.dim, encode_cfg,
                                   lire::file_digest(args.heads_path), &warnings);
    lire::save_index(index, args.out_path);

    ojson cfg;
    cfg["dim"] = args.dim;
    cfg["encode"] = args.encode.to_json(args.seed);
    auto manifest = new_manifest(args.seed, cfg);
    manifest.add_input(args.corpus_path);
    manifest.add_input(args.heads_path);
    finish_manifest(manifest, {args.out_path, args.out_path + ".meta.json"});
    std::printf("indexed %zu docs (%zu tokens, %zu skipped) at dim %d into %s\n",
                index.doc_table.size(), index.total_tokens(), index.skipped_docs.size(),
                args.dim, args.out_path.c_str());
}

struct SearchArgs {
    std::string index_path, heads_path, queries_path, out_path;
    std::string corpus_path; // bm25 candidates mode
    std::string mode = "exhaustive";
    std::string tag = "lire";
    size_t k = 10;
    size_t candidates = 250;
    double k1 = 0.9, b = 0.4;
    bool minmax_scores = false;
    int threads = 1;
};

void cmd_search(const SearchArgs& args) {
    auto index = lire::load_index(args.index_path);
    auto heads = lire::load_heads(args.heads_path);
    auto queries = lire::load_queries(args.queries_path);

    lire::SearchOptions opts;
    opts.k = args.k;
    opts.minmax_scores = args.minmax_scores;
    opts.threads = args.threads;
    lire::InvertedIndex lexical;
    if (args.mode == "bm25") {
        if (args.corpus_path.empty())
            throw Error(Err::BadConfig, "--corpus is required with --mode bm25");
        lexical = lire::build_lexical_index(lire::load_corpus(args.corpus_path), args.k1, args.b);
        opts.mode = lire::SearchMode::bm25_candidates;
        opts.candidates = args.candidates;
        opts.lexical = &lexical;
    } else if (args.mode != "exhaustive") {
        throw Error(Err::BadConfig, "unknown search mode '" + args.mode + "'");
    }

    lire::Featurizer featurizer(index.encode_cfg);
    lire::RunFile run;
    size_t skipped = 0;
    for (const auto& q : queries) {
        std::vector<lire::ScoredDoc> hits;
        try {
            hits = lire::search(index, q.text, heads, featurizer, opts);
        } catch (const Error& e) {
            if (e.code() == Err::EmptyQuery || e.code() == Err::EmptyAfterTruncation) {
                lire::warn("query '" + q.query_id + "' skipped: " + e.what());
                ++skipped;
                continue;
            }
            throw;
        }
        for (const auto& h : hits) run.add(q.query_id, h.doc_id, h.score);
    }
    run.normalize();
    lire::save_run(run, args.out_path, args.tag);

    ojson cfg;
    cfg["k"] = args.k;
    cfg["mode"] = args.mode;
    cfg["candidates"] = args.candidates;
    cfg["minmax_scores"] = args.minmax_scores;
    auto manifest = new_manifest(index.encode_cfg.seed, cfg);
    manifest.add_input(args.index_path);
    manifest.add_input(args.heads_path);
    manifest.add_input(args.queries_path);
    if (!args.corpus_path.empty()) manifest.add_input(args.corpus_path);
    finish_manifest(manifest, {args.out_path});
    std::printf("ran %zu queries (%zu skipped), wrote %s\n", queries.size() - skipped, skipped,
                args.out_path.c_str());
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string run_path, index_path, heads_path, queries_path, qrels_path, out_path;
    std::string metrics = "ndcg@10,mrr@10,success@5";
    std::string gain = "linear";
    size_t k = 0; // 0: max metric cutoff
    int threads = 1;
};

void cmd_eval(const EvalArgs& args) {
    auto specs = lire::parse_metric_specs(args.metrics);
    auto qrels = lire::load_qrels(args.qrels_path);

    lire::RunFile run;
    if (!args.run_path.empty()) {
        run = lire::load_run(args.run_path);
    } else {
        if (args.index_path.empty() || args.heads_path.empty() || args.queries_path.empty())
            throw Error(Err::BadConfig, "eval needs --run, or --index with --heads and --queries");
        auto index = lire::load_index(args.index_path);
        auto heads = lire::load_heads(args.heads_path);
        auto queries = lire::load_queries(args.queries_path);
        size_t k = args.k;
        if (k == 0)
            for (const auto& s : specs) k = std::max(k, static_cast<size_t>(s.cutoff));
        lire::SearchOptions opts;
        opts.k = k;
        opts.threads = args.threads;
        lire::Featurizer featurizer(index.encode_cfg);
        for (const auto& q : queries)
            for (const auto& h : lire::search(index, q.text, heads, featurizer, opts))
                run.add(q.query_id, h.doc_id, h.score);
        run.normalize();
    }

    auto report = lire::evaluate(run, qrels, specs, gain_from(args.gain));
    std::fputs(report.to_table().c_str(), stdout);
    if (!args.out_path.empty()) {
        lire::write_file_atomic(args.out_path, report.to_json());
        ojson cfg;
        cfg["metrics"] = args.metrics;
        cfg["gain"] = args.gain;
        auto manifest = new_manifest(0, cfg);
        if (!args.run_path.empty()) manifest.add_input(args.run_path);
        manifest.add_input(args.qrels_path);
        finish_manifest(manifest, {args.out_path});
    }
}

// ---- sample-corpus --------------------------------------------------------

struct SampleArgs {
    std::string corpus_path, queries_path, qrels_path, out_path;
    size_t k = 250;
    double k1 = 0.9, b = 0.4;
};

void cmd_sample_corpus(const SampleArgs& args) {
    auto corpus = lire::load_corpus(args.corpus_path);
    auto queries = lire::load_queries(args.queries_path);
    auto qrels = lire::load_qrels(args.qrels_path);
    auto lexical = lire::build_lexical_index(corpus, args.k1, args.b);

    lire::SampleStats stats;
    auto sampled = lire::build_sampled_corpus(lexical, corpus, queries, qrels, args.k, &stats);
    lire::save_corpus(sampled, args.out_path);

    ojson cfg;
    cfg["k"] = args.k;
    cfg["k1"] = args.k1;
    cfg["b"] = args.b;
    auto manifest = new_manifest(0, cfg);
    manifest.add_input(args.corpus_path);
    manifest.add_input(args.queries_path);
    manifest.add_input(args.qrels_path);
    finish_manifest(manifest, {args.out_path});
    std::printf("topk_union=%zu judged=%zu output=%zu\n", stats.topk_union, stats.judged,
                stats.output);
}

// ---- gradcheck ------------------------------------------------------------

struct GradcheckArgs {
    uint64_t seed = 0;
    int instances = 20;
    double h = 1e-4;
    double tol = 1e-4;
    std::string out_path;
};

void cmd_gradcheck(const GradcheckArgs& args) {
    auto run = lire::run_gradient_checks(args.seed, args.instances, args.h, args.tol);
    for (const auto& suite : run.suites)
        std::printf("[%s] %-16s max_rel_err %.3e over %zu instances\n",
                    suite.pass ? "PASS" : "FAIL", suite.loss_name.c_str(), suite.max_rel_err,
                    suite.cases.size());
    std::printf("[%s] negative_control corrupted gradient %s\n",
                run.negative_control_detected ? "PASS" : "FAIL",
                run.negative_control_detected ? "rejected" : "NOT rejected");
    if (!args.out_path.empty()) {
        lire::write_file_atomic(args.out_path, run.to_json());
        ojson cfg;
        cfg["instances"] = args.instances;
        cfg["h"] = args.h;
        cfg["tol"] = args.tol;
        auto manifest = new_manifest(args.seed, cfg);
        finish_manifest(manifest, {args.out_path});
    }
    if (!run.pass) throw Error(Err::NanGradient, "gradient verification failed");
}

// ---- mrl-report -----------------------------------------------------------

struct MrlReportArgs {
    std::string heads_path, corpus_path, queries_path, qrels_path, out_path;
    std::string metrics = "ndcg@10";
    uint64_t seed = 0;
    size_t k = 10;
    int threads = 1;
    EncodeFlags encode;
};

void cmd_mrl_report(const MrlReportArgs& args) {
    auto heads = lire::load_heads(args.heads_path);
    auto corpus = lire::load_corpus(args.corpus_path);
    auto queries = lire::load_queries(args.queries_path);
    auto qrels = lire::load_qrels(args.qrels_path);
    auto specs = lire::parse_metric_specs(args.metrics);
    auto encode_cfg = args.encode.to_config(args.seed);
    encode_cfg.hidden_dim = heads.hidden_dim;

    ojson rows = ojson::array();
    std::map<int, std::map<std::string, double>> table;
    for (int d : heads.dims) {
        auto index = lire::build_index(corpus, heads, d, encode_cfg);
        lire::SearchOptions opts;
        opts.k = std::max(args.k, static_cast<size_t>(1));
        opts.threads = args.threads;
        lire::Featurizer featurizer(encode_cfg);
        lire::RunFile run;
        for (const auto& q : queries)
            for (const auto& h : lire::search(index, q.text, heads, featurizer, opts))
                run.add(q.query_id, h.doc_id, h.score);
        run.normalize();
        auto report = lire::evaluate(run, qrels, specs);
        ojson row;
        row["dim"] = d;
        row["bytes_per_token"] = d * 4;
        for (const auto& [spec, res] : report.metrics) {
            row[spec.label()] = res.mean;
            table[d][spec.label()] = res.mean;
        }
        rows.push_back(row);
    }

    std::printf("%6s  %14s", "dim", "bytes/token");
    for (const auto& s : specs) std::printf("  %12s", s.label().c_str());
    std::printf("\n");
    for (int d : heads.dims) {
        std::printf("%6d  %14d", d, d * 4);
        for (const auto& s : specs) std::printf("  %12.6f", table[d][s.label()]);
        std::printf("\n");
    }
    if (table.count(64) && table.count(128) && !specs.empty()) {
        double drop = table[128][specs[0].label()] - table[64][specs[0].label()];
        std::printf("dim 128 -> 64 %s delta: %+.6f\n", specs[0].label().c_str(), drop);
    }

    ojson out;
    out["metric_set"] = args.metrics;
    out["rows"] = rows;
    if (!args.out_path.empty()) {
        lire::write_file_atomic(args.out_path, out.dump(2) + "\n");
        ojson cfg;
        cfg["metrics"] = args.metrics;
        cfg["k"] = args.k;
        cfg["encode"] = args.encode.to_json(args.seed);
        auto manifest = new_manifest(args.seed, cfg);
        manifest.add_input(args.heads_path);
        manifest.add_input(args.corpus_path);
        manifest.add_input(args.queries_path);
        manifest.add_input(args.qrels_path);
        finish_manifest(manifest, {args.out_path});
    }
}

} // namespace

int main(int argc, char** argv) {
    g_start = std::chrono::steady_clock::now();
    for (int i = 0; i < argc; ++i) {
        if (i) g_command_line += ' ';
        g_command_line += argv[i];
    }

    CLI::App app{"lire: late-interaction retrieval engine"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string kernels = "auto";
    bool quiet = false;
    app.add_option("--kernels", kernels, "Kernel backend: auto|scalar|avx2|neon")
        ->capture_default_str();
    app.add_flag("--quiet", quiet, "Suppress progress logging");

    // Option values are final before any callback runs, so the per-verb
    // callbacks apply the globals first.
    auto with_setup = [&](std::function<void()> fn) {
        return [&, fn] {
            if (quiet) lire::set_log_quiet(true);
            if (kernels != "auto") lire::kern::force_backend(kernels);
            fn();
        };
    };

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a seeded synthetic benchmark");
    gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
    gen_cmd->add_option("--docs", gen.spec.docs, "Documents")->capture_default_str();
    gen_cmd->add_option("--queries", gen.spec.queries, "Queries")->capture_default_str();
    gen_cmd->add_option("--pairs", gen.spec.pairs, "Training pairs")->capture_default_str();
    gen_cmd->add_option("--triplets", gen.spec.triplets, "Training triplets")
        ->capture_default_str();
    gen_cmd->add_option("--clusters", gen.spec.clusters, "Topic clusters")->capture_default_str();
    gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed")->capture_default_str();
    gen_cmd->callback(with_setup([&] { cmd_gen_synthetic(gen); }));

    TrainArgs pair_args;
    auto* tp_cmd = app.add_subcommand("train-pairs", "Pair stage: bidirectional InfoNCE");
    tp_cmd->add_option("--pairs", pair_args.data_path, "pairs.jsonl")->required();
    add_train_flags(tp_cmd, pair_args, true);
    tp_cmd->callback(with_setup([&] { cmd_train_pairs(pair_args); }));

    TrainArgs trip_args;
    auto* tt_cmd = app.add_subcommand("train-triplets", "Triplet stage: KL distillation");
    tt_cmd->add_option("--triplets", trip_args.data_path, "triplets.jsonl")->required();
    add_train_flags(tt_cmd, trip_args, false);
    tt_cmd->callback(with_setup([&] { cmd_train_triplets(trip_args); }));

    IndexArgs index_args;
    auto* idx_cmd = app.add_subcommand("index", "Build a multi-vector index");
    idx_cmd->add_option("--corpus", index_args.corpus_path, "corpus.jsonl")->required();
    idx_cmd->add_option("--heads", index_args.heads_path, "Head checkpoint")->required();
    idx_cmd->add_option("--dim", index_args.dim, "Projection dim")->capture_default_str();
    idx_cmd->add_option("--out", index_args.out_path, "Index file")->required();
    idx_cmd->add_option("--seed", index_args.seed, "Featurizer seed")->capture_default_str();
    index_args.encode.add_to(idx_cmd);
    idx_cmd->callback(with_setup([&] { cmd_index(index_args); }));

    SearchArgs search_args;
    auto* s_cmd = app.add_subcommand("search", "MaxSim search over an index");
    s_cmd->add_option("--index", search_args.index_path, "Index file")->required();
    s_cmd->add_option("--heads", search_args.heads_path, "Head checkpoint")->required();
    s_cmd->add_option("--queries", search_args.queries_path, "queries.jsonl")->required();
    s_cmd->add_option("--out", search_args.out_path, "Run file to write")->required();
    s_cmd->add_option("--k", search_args.k, "Results per query")->capture_default_str();
    s_cmd->add_option("--mode", search_args.mode, "exhaustive|bm25")->capture_default_str();
    s_cmd->add_option("--candidates", search_args.candidates, "BM25 candidate pool size")
        ->capture_default_str();
    s_cmd->add_option("--corpus", search_args.corpus_path, "Corpus (bm25 mode)");
    s_cmd->add_option("--k1", search_args.k1, "BM25 k1")->capture_default_str();
    s_cmd->add_option("--b", search_args.b, "BM25 b")->capture_default_str();
    s_cmd->add_option("--tag", search_args.tag, "Run tag")->capture_default_str();
    s_cmd->add_flag("--minmax-scores", search_args.minmax_scores,
                    "Min-max rescale scores per query (rank preserving)");
    s_cmd->add_option("--threads", search_args.threads, "Worker threads")->capture_default_str();
    s_cmd->callback(with_setup([&] { cmd_search(search_args); }));

    EvalArgs eval_args;
    auto* e_cmd = app.add_subcommand("eval", "Score a run (or an index) against qrels");
    e_cmd->add_option("--run", eval_args.run_path, "TREC run file");
    e_cmd->add_option("--index", eval_args.index_path, "Index file (search-then-eval)");
    e_cmd->add_option("--heads", eval_args.heads_path, "Head checkpoint (with --index)");
    e_cmd->add_option("--queries", eval_args.queries_path, "queries.jsonl (with --index)");
    e_cmd->add_option("--qrels", eval_args.qrels_path, "TREC qrels")->required();
    e_cmd->add_option("--metric", eval_args.metrics, "e.g. ndcg@10,mrr@10,success@5")
        ->capture_default_str();
    e_cmd->add_option("--gain", eval_args.gain, "nDCG gain: linear|exp")->capture_default_str();
    e_cmd->add_option("--k", eval_args.k, "Search depth (0: max metric cutoff)")
        ->capture_default_str();
    e_cmd->add_option("--out", eval_args.out_path, "eval.json to write");
    e_cmd->add_option("--threads", eval_args.threads, "Worker threads")->capture_default_str();
    e_cmd->callback(with_setup([&] { cmd_eval(eval_args); }));

    SampleArgs sample_args;
    auto* sc_cmd = app.add_subcommand("sample-corpus",
                                      "Union of top-k BM25 and judged documents");
    sc_cmd->add_option("--corpus", sample_args.corpus_path, "corpus.jsonl")->required();
    sc_cmd->add_option("--queries", sample_args.queries_path, "queries.jsonl")->required();
    sc_cmd->add_option("--qrels", sample_args.qrels_path, "TREC qrels")->required();
    sc_cmd->add_option("--out", sample_args.out_path, "Sampled corpus to write")->required();
    sc_cmd->add_option("--k", sample_args.k, "BM25 depth per query")->capture_default_str();
    sc_cmd->add_option("--k1", sample_args.k1, "BM25 k1")->capture_default_str();
    sc_cmd->add_option("--b", sample_args.b, "BM25 b")->capture_default_str();
    sc_cmd->callback(with_setup([&] { cmd_sample_corpus(sample_args); }));

    GradcheckArgs grad_args;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    gc_cmd->add_option("--seed", grad_args.seed, "Instance seed")->capture_default_str();
    gc_cmd->add_option("--instances", grad_args.instances, "Instances per loss")
        ->capture_default_str();
    gc_cmd->add_option("--fd-step", grad_args.h, "Central difference step h")
        ->capture_default_str();
    gc_cmd->add_option("--tol", grad_args.tol, "Max relative error")->capture_default_str();
    gc_cmd->add_option("--out", grad_args.out_path, "JSON report to write");
    gc_cmd->callback(with_setup([&] { cmd_gradcheck(grad_args); }));

    MrlReportArgs mrl_args;
    auto* mr_cmd = app.add_subcommand("mrl-report", "Metric-vs-dimension table for a checkpoint");
    mr_cmd->add_option("--heads", mrl_args.heads_path, "Head checkpoint")->required();
    mr_cmd->add_option("--corpus", mrl_args.corpus_path, "corpus.jsonl")->required();
    mr_cmd->add_option("--queries", mrl_args.queries_path, "queries.jsonl")->required();
    mr_cmd->add_option("--qrels", mrl_args.qrels_path, "TREC qrels")->required();
    mr_cmd->add_option("--metric", mrl_args.metrics, "Metrics per dim")->capture_default_str();
    mr_cmd->add_option("--k", mrl_args.k, "Search depth")->capture_default_str();
    mr_cmd->add_option("--seed", mrl_args.seed, "Featurizer seed")->capture_default_str();
    mr_cmd->add_option("--out", mrl_args.out_path, "JSON report to write");
    mr_cmd->add_option("--threads", mrl_args.threads, "Worker threads")->capture_default_str();
    mrl_args.encode.add_to(mr_cmd);
    mr_cmd->callback(with_setup([&] { cmd_mrl_report(mrl_args); }));

    // Let --quiet / --kernels appear after the verb too.
    for (auto* sub : app.get_subcommands(nullptr)) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        bool validation = e.code() == Err::BadConfig || e.code() == Err::BadTemperature ||
                          e.code() == Err::NonIncreasingDims;
        return validation ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

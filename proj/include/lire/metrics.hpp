#pragma once

#include <map>
#include <string>
#include <vector>

#include "lire/corpus.hpp"

namespace lire {

struct RunEntry {
    std::string doc_id;
    double score;
};

/// Ranked retrieval results per query. normalize() enforces the invariants:
/// strictly descending score with doc_id ascending tie-break, no duplicate
/// doc per query, finite scores.
struct RunFile {
    std::map<std::string, std::vector<RunEntry>> by_query;

    void add(const std::string& qid, const std::string& did, double score);
    void normalize();
};

/// TREC run format: `qid Q0 did rank score tag`. Loading re-sorts by
/// (score desc, doc_id asc) and rejects duplicate docs.
RunFile load_run(const std::string& path);
void save_run(const RunFile& run, const std::string& path, const std::string& tag = "lire");

enum class GainMode { linear, exponential };

struct MetricResult {
    std::map<std::string, double> per_query;
    double mean = 0.0;
    size_t evaluated = 0; // queries contributing to the mean
    size_t skipped = 0;   // judged queries without any positive judgment
};

// Evaluated queries are those present in the run that carry at least one
// positive judgment; run queries without relevant judgments are skipped with
// a warning.

/// nDCG@cutoff. DCG = sum_{i=1..cutoff} gain(rel_i)/log2(i+1), ideal DCG
/// from all judged grades sorted descending. Linear gain (gain = rel) is the
/// trec_eval ndcg_cut convention; exponential uses 2^rel - 1.
MetricResult ndcg_at(const RunFile& run, const Qrels& qrels, int cutoff = 10,
                     GainMode gain = GainMode::linear, Warnings* warnings = nullptr);

/// Mean reciprocal rank of the first relevant document within the cutoff,
/// 0 for queries with none.
MetricResult mrr_at(const RunFile& run, const Qrels& qrels, int cutoff = 10,
                    Warnings* warnings = nullptr);

/// Fraction-style per-query metric: 1 if any relevant document appears in
/// the top cutoff, else 0.
MetricResult success_at(const RunFile& run, const Qrels& qrels, int cutoff = 5,
                        Warnings* warnings = nullptr);

struct MetricSpec {
    std::string name; // ndcg | mrr | success
    int cutoff;

    std::string label() const { return name + "@" + std::to_string(cutoff); }
};

/// Parses `ndcg@10,mrr@10,success@5`.
std::vector<MetricSpec> parse_metric_specs(const std::string& grammar);

struct EvalReport {
    std::vector<std::pair<MetricSpec, MetricResult>> metrics;

    std::string to_json() const;
    std::string to_table() const; // aligned text columns
};

/// Runs every requested metric. Throws Err::NoJudgedQueries when the run
/// covers no judged query with a positive grade.
EvalReport evaluate(const RunFile& run, const Qrels& qrels, const std::vector<MetricSpec>& specs,
                    GainMode gain = GainMode::linear, Warnings* warnings = nullptr);

} // namespace lire

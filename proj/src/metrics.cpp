#include "lire/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lire/error.hpp"
#include "lire/io.hpp"

namespace lire {

void RunFile::add(const std::string& qid, const std::string& did, double score) {
    by_query[qid].push_back({did, score});
}

void RunFile::normalize() {
    for (auto& [qid, entries] : by_query) {
        for (const auto& e : entries)
            if (!std::isfinite(e.score))
                throw Error(Err::MalformedLine, "non-finite score for query " + qid);
        std::sort(entries.begin(), entries.end(), [](const RunEntry& a, const RunEntry& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc_id < b.doc_id;
        });
        std::set<std::string> seen;
        for (const auto& e : entries)
            if (!seen.insert(e.doc_id).second)
                throw Error(Err::DuplicateId,
                            "query " + qid + " ranks doc '" + e.doc_id + "' twice");
    }
}

RunFile load_run(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(Err::IoError, "cannot open " + path);
    RunFile run;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (trim_whitespace(line).empty()) continue;
        std::istringstream iss(line);
        std::string qid, q0, did, rank, score_str, tag;
        if (!(iss >> qid >> q0 >> did >> rank >> score_str >> tag))
            throw Error(Err::MalformedLine,
                        path + ":" + std::to_string(lineno) + ": expected 6 run-file columns");
        try {
            run.add(qid, did, std::stod(score_str));
        } catch (const std::exception&) {
            throw Error(Err::MalformedLine,
                        path + ":" + std::to_string(lineno) + ": bad score '" + score_str + "'");
        }
    }
    run.normalize();
    return run;
}

void save_run(const RunFile& run, const std::string& path, const std::string& tag) {
    std::string out;
    char buf[64];
    for (const auto& [qid, entries] : run.by_query) {
        size_t rank = 1;
        for (const auto& e : entries) {
            // %.17g round-trips the double, so a saved run re-loads into the
            // exact same ordering.
            std::snprintf(buf, sizeof(buf), "%.17g", e.score);
            out += qid + " Q0 " + e.doc_id + " " + std::to_string(rank) + " " + buf + " " + tag +
                   "\n";
            ++rank;
        }
    }
    write_file_atomic(path, out);
}

namespace {

double gain_of(int rel, GainMode mode) {
    if (mode == GainMode::linear) return static_cast<double>(rel);
    return std::pow(2.0, static_cast<double>(rel)) - 1.0;
}

// Shared walk over evaluated queries: those present in the run with at
// least one positive judgment.
template <typename PerQuery>
MetricResult run_metric(const RunFile& run, const Qrels& qrels, Warnings* warnings,
                        PerQuery&& per_query) {
    MetricResult res;
    for (const auto& [qid, entries] : run.by_query) {
        auto q = qrels.by_query.find(qid);
        if (q == qrels.by_query.end()) {
            warn("query '" + qid + "' has no judgments, skipped", warnings);
            ++res.skipped;
            continue;
        }
        bool any_rel = false;
        for (const auto& [_, g] : q->second)
            if (g > 0) any_rel = true;
        if (!any_rel) {
            warn("query '" + qid + "' has no relevant documents, skipped", warnings);
            ++res.skipped;
            continue;
        }
        res.per_query[qid] = per_query(entries, q->second);
    }
    double sum = 0.0;
    for (const auto& [_, v] : res.per_query) sum += v;
    res.evaluated = res.per_query.size();
    res.mean = res.evaluated ? sum / static_cast<double>(res.evaluated) : 0.0;
    return res;
}

} // namespace

MetricResult ndcg_at(const RunFile& run, const Qrels& qrels, int cutoff, GainMode gain,
                     Warnings* warnings) {
    if (cutoff < 1) throw Error(Err::BadConfig, "cutoff must be >= 1");
    return run_metric(run, qrels, warnings,
                      [&](const std::vector<RunEntry>& entries,
                          const std::map<std::string, int>& judged) {
                          double dcg = 0.0;
                          size_t n = std::min(entries.size(), static_cast<size_t>(cutoff));
                          for (size_t i = 0; i < n; ++i) {
                              auto it = judged.find(entries[i].doc_id);
                              int rel = it == judged.end() ? 0 : it->second;
                              dcg += gain_of(rel, gain) / std::log2(static_cast<double>(i) + 2.0);
                          }
                          std::vector<int> grades;
                          for (const auto& [_, g] : judged)
                              if (g > 0) grades.push_back(g);
                          std::sort(grades.rbegin(), grades.rend());
                          double idcg = 0.0;
                          size_t m = std::min(grades.size(), static_cast<size_t>(cutoff));
                          for (size_t i = 0; i < m; ++i)
                              idcg += gain_of(grades[i], gain) /
                                      std::log2(static_cast<double>(i) + 2.0);
                          return dcg / idcg;
                      });
}

MetricResult mrr_at(const RunFile& run, const Qrels& qrels, int cutoff, Warnings* warnings) {
    if (cutoff < 1) throw Error(Err::BadConfig, "cutoff must be >= 1");
    return run_metric(run, qrels, warnings,
                      [&](const std::vector<RunEntry>& entries,
                          const std::map<std::string, int>& judged) {
                          size_t n = std::min(entries.size(), static_cast<size_t>(cutoff));
                          for (size_t i = 0; i < n; ++i) {
                              auto it = judged.find(entries[i].doc_id);
                              if (it != judged.end() && it->second > 0)
                                  return 1.0 / static_cast<double>(i + 1);
                          }
                          return 0.0;
                      });
}

MetricResult success_at(const RunFile& run, const Qrels& qrels, int cutoff, Warnings* warnings) {
    if (cutoff < 1) throw Error(Err::BadConfig, "cutoff must be >= 1");
    return run_metric(run, qrels, warnings,
                      [&](const std::vector<RunEntry>& entries,
                          const std::map<std::string, int>& judged) {
                          size_t n = std::min(entries.size(), static_cast<size_t>(cutoff));
                          for (size_t i = 0; i < n; ++i) {
                              auto it = judged.find(entries[i].doc_id);
                              if (it != judged.end() && it->second > 0) return 1.0;
                          }
                          return 0.0;
                      });
}

std::vector<MetricSpec> parse_metric_specs(const std::string& grammar) {
    std::vector<MetricSpec> specs;
    std::stringstream ss(grammar);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim_whitespace(item);
        if (item.empty()) continue;
        auto at = item.find('@');
        if (at == std::string::npos)
            throw Error(Err::BadConfig, "metric '" + item + "' missing @cutoff");
        std::string name = item.substr(0, at);
        if (name != "ndcg" && name != "mrr" && name != "success")
            throw Error(Err::BadConfig, "unknown metric '" + name + "'");
        int cutoff;
        try {
            cutoff = std::stoi(item.substr(at + 1));
        } catch (const std::exception&) {
            throw Error(Err::BadConfig, "bad cutoff in '" + item + "'");
        }
        if (cutoff < 1) throw Error(Err::BadConfig, "cutoff must be >= 1 in '" + item + "'");
        specs.push_back({name, cutoff});
    }
    if (specs.empty()) throw Error(Err::BadConfig, "no metrics requested");
    return specs;
}

EvalReport evaluate(const RunFile& run, const Qrels& qrels, const std::vector<MetricSpec>& specs,
                    GainMode gain, Warnings* warnings) {
    bool any = false;
    for (const auto& [qid, _] : run.by_query)
        if (qrels.has_relevant(qid)) any = true;
    if (!any) throw Error(Err::NoJudgedQueries, "run covers no judged query with a relevant doc");

    EvalReport report;
    for (const auto& spec : specs) {
        MetricResult r;
        if (spec.name == "ndcg")
            r = ndcg_at(run, qrels, spec.cutoff, gain, warnings);
        else if (spec.name == "mrr")
            r = mrr_at(run, qrels, spec.cutoff, warnings);
        else
            r = success_at(run, qrels, spec.cutoff, warnings);
        report.metrics.emplace_back(spec, std::move(r));
    }
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    for (const auto& [spec, res] : metrics) {
        nlohmann::ordered_json m;
        m["mean"] = res.mean;
        m["evaluated_queries"] = res.evaluated;
        m["skipped_queries"] = res.skipped;
        nlohmann::ordered_json pq;
        for (const auto& [qid, v] : res.per_query) pq[qid] = v;
        m["per_query"] = pq;
        j[spec.label()] = m;
    }
    return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
    size_t name_w = 6;
    for (const auto& [spec, _] : metrics) name_w = std::max(name_w, spec.label().size());
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-*s  %10s  %8s  %8s\n", static_cast<int>(name_w), "metric",
                  "mean", "queries", "skipped");
    out += buf;
    for (const auto& [spec, res] : metrics) {
        std::snprintf(buf, sizeof(buf), "%-*s  %10.6f  %8zu  %8zu\n", static_cast<int>(name_w),
                      spec.label().c_str(), res.mean, res.evaluated, res.skipped);
        out += buf;
    }
    return out;
}

} // namespace lire

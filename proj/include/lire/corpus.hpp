#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "lire/log.hpp"

namespace lire {

struct Document {
    std::string doc_id; // non-empty, unique within a corpus
    std::string title;  // may be empty
    std::string text;

    bool operator==(const Document&) const = default;
};

struct Corpus {
    std::vector<Document> docs;

    size_t size() const { return docs.size(); }
    const Document* find(const std::string& doc_id) const;
};

struct Query {
    std::string query_id;
    std::string text; // non-empty

    bool operator==(const Query&) const = default;
};

/// Graded relevance judgments, qrels[query_id][doc_id] = grade >= 0.
struct Qrels {
    std::map<std::string, std::map<std::string, int>> by_query;

    int grade(const std::string& qid, const std::string& did) const;
    bool has_relevant(const std::string& qid) const; // any grade > 0
    size_t size() const;
};

struct PairExample {
    std::string left_text;  // non-empty
    std::string right_text; // non-empty
};

/// One query with a positive, exactly 7 mined negatives, and 8 teacher
/// scores ordered positive-first.
struct TripletExample {
    std::string query_text;
    std::string positive;
    std::vector<std::string> negatives;  // exactly 7
    std::vector<double> teacher_scores;  // exactly 8, finite
};

inline constexpr size_t kTripletNegatives = 7;
inline constexpr size_t kTripletWays = 8;

// JSONL loaders, one object per line. Malformed lines and invariant
// violations raise Error with the 1-based line number in the message.
Corpus load_corpus(const std::string& path);
std::vector<Query> load_queries(const std::string& path);
std::vector<PairExample> load_pairs(const std::string& path);
std::vector<TripletExample> load_triplets(const std::string& path);

// TREC 4-column qrels: `qid iteration did grade`, whitespace separated. The
// iteration column is ignored. Duplicate (qid,did) entries: last wins, with
// a warning.
Qrels load_qrels(const std::string& path, Warnings* warnings = nullptr);

// Writers for the same formats (LF endings, UTF-8 passthrough).
void save_corpus(const Corpus& corpus, const std::string& path);
void save_queries(const std::vector<Query>& queries, const std::string& path);
void save_qrels(const Qrels& qrels, const std::string& path);
void save_pairs(const std::vector<PairExample>& pairs, const std::string& path);
void save_triplets(const std::vector<TripletExample>& triplets, const std::string& path);

std::string trim_whitespace(const std::string& s);

} // namespace lire

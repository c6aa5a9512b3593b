#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lire/corpus.hpp"

namespace lire {

struct Posting {
    uint32_t doc_ordinal;
    uint32_t term_frequency;
};

/// Lexical inverted index over lowercased whitespace+punctuation tokens of
/// title + " " + text. k1/b default to 0.9/0.4.
struct InvertedIndex {
    std::unordered_map<std::string, std::vector<Posting>> postings; // sorted by ordinal
    std::vector<uint32_t> doc_lengths;
    std::vector<std::string> doc_ids; // ordinal -> id, corpus order
    double avgdl = 0.0;
    size_t num_docs = 0;
    double k1 = 0.9;
    double b = 0.4;
};

struct ScoredDoc {
    std::string doc_id;
    double score;
};

/// Lexical tokenizer: ASCII-lowercased, split on anything that is not an
/// ASCII alphanumeric byte (bytes >= 0x80 pass through). Deliberately
/// independent of the neural featurizer's tokenizer.
std::vector<std::string> lexical_tokens(const std::string& text);

InvertedIndex build_lexical_index(const Corpus& corpus, double k1 = 0.9, double b = 0.4);

/// Okapi BM25 with the Lucene-style non-negative idf
///   idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5))
///   score(q,d) = sum over query term instances of
///                idf * tf*(k1+1) / (tf + k1*(1 - b + b*len/avgdl)).
/// Query terms have bag semantics (a repeated term counts twice). Only
/// documents matching at least one query term are returned, ranked by score
/// descending with doc_id ascending tie-break, truncated to k.
std::vector<ScoredDoc> bm25_search(const InvertedIndex& index, const std::string& query_text,
                                   size_t k);

struct SampleStats {
    size_t topk_union = 0;
    size_t judged = 0;
    size_t output = 0;
};

/// Sampled-corpus construction: the union over queries of the top-k BM25
/// retrieved documents, plus every judged document. Output keeps the
/// original document records, ordered by doc_id. Judged doc_ids missing
/// from the corpus are skipped with a warning.
Corpus build_sampled_corpus(const InvertedIndex& index, const Corpus& corpus,
                            const std::vector<Query>& queries, const Qrels& qrels,
                            size_t k = 250, SampleStats* stats = nullptr,
                            Warnings* warnings = nullptr);

} // namespace lire

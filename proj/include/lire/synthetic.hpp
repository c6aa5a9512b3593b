#pragma once

#include <cstdint>

#include "lire/corpus.hpp"

namespace lire {

/// Seeded generator of cluster-structured corpora for benchmarks and
/// acceptance runs. Every cluster owns a private signature vocabulary;
/// documents and queries draw from their cluster's signature plus a shared
/// noise vocabulary, so lexical and semantic relevance coincide by
/// construction and remain learnable from scratch.
struct SyntheticSpec {
    size_t docs = 200;
    size_t queries = 20;
    size_t pairs = 512;
    size_t triplets = 128;
    size_t clusters = 8;
    uint64_t seed = 7;

    size_t signature_words = 6;  // per cluster
    size_t noise_words = 48;     // shared pool
    size_t doc_signature = 3;    // signature words per document
    size_t doc_noise = 3;        // noise words per document
    size_t query_signature = 3;  // signature words per query
};

struct SyntheticData {
    Corpus corpus;
    std::vector<Query> queries;
    Qrels qrels;                          // every same-cluster doc judged relevant
    std::vector<PairExample> pairs;       // sides share cluster + pair-id words
    std::vector<TripletExample> triplets; // teacher prefers the same-cluster positive
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

} // namespace lire

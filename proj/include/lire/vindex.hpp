#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lire/bm25.hpp"
#include "lire/corpus.hpp"
#include "lire/featurizer.hpp"
#include "lire/heads.hpp"

namespace lire {

struct DocEntry {
    std::string doc_id;
    uint32_t token_count;
    uint64_t byte_offset; // into the embedding payload, strictly increasing
};

/// Persistent per-token embedding store plus the brute-force MaxSim search
/// engine over it.
///
/// File layout (all integers little-endian):
///   magic "JCV2" | version u32=1 | dim u32 | doc_count u64 | total_tokens u64
///   | doc table: (doc_id str16, token_count u32, byte_offset u64) per doc
///   | embedding payload: f32 row-major, L2-normalized rows
///   | crc32 u32 over all preceding bytes
///
/// Featurizer seed, encode config, head checkpoint digest, and the skip list
/// ride in a JSON sidecar at <path>.meta.json; the binary layout stays
/// exactly as above.
struct MultiVectorIndex {
    uint32_t dim = 0;
    std::vector<DocEntry> doc_table;
    std::vector<float> embeddings; // total_tokens * dim
    EncodeConfig encode_cfg;
    std::string heads_digest;
    std::vector<std::string> skipped_docs; // empty-after-truncation doc_ids

    size_t total_tokens() const { return dim ? embeddings.size() / dim : 0; }
    const float* doc_rows(size_t ord) const {
        return embeddings.data() + doc_table[ord].byte_offset / sizeof(float);
    }
    std::optional<size_t> ordinal_of(const std::string& doc_id) const;

private:
    mutable std::unordered_map<std::string, size_t> ordinals_;
};

/// Encodes and projects every document at dim d. Documents with no content
/// tokens are skipped with a warning and recorded in the skip list.
MultiVectorIndex build_index(const Corpus& corpus, const ProjectionHeads& heads, int d,
                             const EncodeConfig& encode_cfg, const std::string& heads_digest = "",
                             Warnings* warnings = nullptr);

void save_index(const MultiVectorIndex& index, const std::string& path);

/// Verifies the trailing CRC32 before parsing and checks every row norm is
/// within 1e-5 of 1. Throws Err::CorruptIndex on any mismatch.
MultiVectorIndex load_index(const std::string& path);

enum class SearchMode { exhaustive, bm25_candidates };

struct SearchOptions {
    size_t k = 10;
    SearchMode mode = SearchMode::exhaustive;
    size_t candidates = 250;               // top-c BM25 pool in candidates mode
    const InvertedIndex* lexical = nullptr; // required in candidates mode
    bool minmax_scores = false;            // rank-preserving [0,1] rescale per query
    int threads = 1;
};

/// MaxSim search: the query is encoded with the index's stored config,
/// projected at the index dim, quantized to f32, and scored against every
/// document (or the BM25 candidate pool). Descending score, doc_id ascending
/// tie-break.
std::vector<ScoredDoc> search(const MultiVectorIndex& index, const std::string& query_text,
                              const ProjectionHeads& heads, const SearchOptions& opts);

/// Same, reusing a caller-owned featurizer (cache survives across queries).
std::vector<ScoredDoc> search(const MultiVectorIndex& index, const std::string& query_text,
                              const ProjectionHeads& heads, Featurizer& featurizer,
                              const SearchOptions& opts);

} // namespace lire

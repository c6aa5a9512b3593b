#include "lire/vindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <thread>

#include <json.hpp>

#include "lire/error.hpp"
#include "lire/io.hpp"
#include "lire/kernels.hpp"
#include "lire/scoring.hpp"

namespace lire {

namespace {

constexpr uint32_t kIndexVersion = 1;
const char kIndexMagic[4] = {'J', 'C', 'V', '2'};

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t nt = std::min<size_t>(static_cast<size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            for (size_t i = t; i < n; i += nt) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

nlohmann::ordered_json encode_cfg_json(const EncodeConfig& cfg) {
    nlohmann::ordered_json j;
    j["max_query_len"] = cfg.max_query_len;
    j["max_doc_len"] = cfg.max_doc_len;
    j["prefix_mode"] = to_string(cfg.prefix_mode);
    j["augmentation"] = to_string(cfg.augmentation);
    j["task"] = to_string(cfg.task);
    j["instruction_override"] = cfg.instruction_override;
    j["seed"] = cfg.seed;
    j["hidden_dim"] = cfg.hidden_dim;
    return j;
}

EncodeConfig encode_cfg_from_json(const nlohmann::json& j) {
    EncodeConfig cfg;
    cfg.max_query_len = j.at("max_query_len").get<int>();
    cfg.max_doc_len = j.at("max_doc_len").get<int>();
    cfg.prefix_mode = prefix_mode_from(j.at("prefix_mode").get<std::string>());
    cfg.augmentation = augmentation_from(j.at("augmentation").get<std::string>());
    cfg.task = task_from(j.at("task").get<std::string>());
    cfg.instruction_override = j.at("instruction_override").get<std::string>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    return cfg;
}

} // namespace

std::optional<size_t> MultiVectorIndex::ordinal_of(const std::string& doc_id) const {
    if (ordinals_.empty() && !doc_table.empty()) {
        for (size_t i = 0; i < doc_table.size(); ++i) ordinals_[doc_table[i].doc_id] = i;
    }
    auto it = ordinals_.find(doc_id);
    if (it == ordinals_.end()) return std::nullopt;
    return it->second;
}

MultiVectorIndex build_index(const Corpus& corpus, const ProjectionHeads& heads, int d,
                             const EncodeConfig& encode_cfg, const std::string& heads_digest,
                             Warnings* warnings) {
    if (!heads.has_dim(d)) throw Error(Err::UnknownDim, std::to_string(d));
    MultiVectorIndex index;
    index.dim = static_cast<uint32_t>(d);
    index.encode_cfg = encode_cfg;
    index.heads_digest = heads_digest;

    Featurizer featurizer(encode_cfg);
    uint64_t offset = 0;
    for (const auto& doc : corpus.docs) {
        Matrix base;
        try {
            base = featurizer.encode(doc.title.empty() ? doc.text : doc.title + " " + doc.text,
                                     Side::document);
        } catch (const Error& e) {
            if (e.code() == Err::EmptyAfterTruncation) {
                warn("doc '" + doc.doc_id + "' skipped: no content tokens", warnings);
                index.skipped_docs.push_back(doc.doc_id);
                continue;
            }
            throw;
        }
        TokenMatrix proj = project(base, heads, d);
        index.doc_table.push_back({doc.doc_id, static_cast<uint32_t>(proj.rows), offset});
        for (double v : proj.a) index.embeddings.push_back(static_cast<float>(v));
        offset += proj.rows * static_cast<size_t>(d) * sizeof(float);
    }
    return index;
}

void save_index(const MultiVectorIndex& index, const std::string& path) {
    BinWriter w;
    w.bytes(kIndexMagic, 4);
    w.u32(kIndexVersion);
    w.u32(index.dim);
    w.u64(index.doc_table.size());
    w.u64(index.total_tokens());
    for (const auto& e : index.doc_table) {
        w.str16(e.doc_id);
        w.u32(e.token_count);
        w.u64(e.byte_offset);
    }
    for (float v : index.embeddings) w.f32(v);
    w.u32(crc32(w.data().data(), w.size()));
    write_file_atomic(path, w.data().data(), w.size());

    nlohmann::ordered_json meta;
    meta["featurizer_seed"] = index.encode_cfg.seed;
    meta["heads_digest"] = index.heads_digest;
    meta["encode_config"] = encode_cfg_json(index.encode_cfg);
    meta["skipped_docs"] = index.skipped_docs;
    write_file_atomic(path + ".meta.json", meta.dump(2) + "\n");
}

MultiVectorIndex load_index(const std::string& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() < 4 + 4 + 4 + 8 + 8 + 4)
        throw Error(Err::CorruptIndex, path + ": file too small");
    uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
    if (stored_crc != actual)
        throw Error(Err::CorruptIndex, path + ": CRC mismatch");

    BinReader r(bytes.data(), bytes.size() - 4);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kIndexMagic, 4) != 0)
        throw Error(Err::CorruptIndex, path + ": bad magic");
    uint32_t version = r.u32();
    if (version != kIndexVersion)
        throw Error(Err::CorruptIndex, path + ": unsupported version " + std::to_string(version));

    MultiVectorIndex index;
    index.dim = r.u32();
    if (index.dim == 0) throw Error(Err::CorruptIndex, path + ": zero dim");
    uint64_t doc_count = r.u64();
    uint64_t total_tokens = r.u64();
    uint64_t expect_offset = 0;
    uint64_t token_sum = 0;
    for (uint64_t i = 0; i < doc_count; ++i) {
        DocEntry e;
        e.doc_id = r.str16();
        e.token_count = r.u32();
        e.byte_offset = r.u64();
        if (e.byte_offset != expect_offset)
            throw Error(Err::CorruptIndex, path + ": doc table offsets not contiguous");
        expect_offset += static_cast<uint64_t>(e.token_count) * index.dim * sizeof(float);
        token_sum += e.token_count;
        index.doc_table.push_back(std::move(e));
    }
    if (token_sum != total_tokens)
        throw Error(Err::CorruptIndex, path + ": token counts disagree with header");
    index.embeddings.resize(total_tokens * index.dim);
    r.bytes(index.embeddings.data(), index.embeddings.size() * sizeof(float));
    if (r.remaining() != 0)
        throw Error(Err::CorruptIndex, path + ": trailing bytes");

    for (size_t t = 0; t < total_tokens; ++t) {
        const float* row = index.embeddings.data() + t * index.dim;
        double norm = std::sqrt(kern::dot_f32(row, row, index.dim));
        if (std::fabs(norm - 1.0) > 1e-5)
            throw Error(Err::CorruptIndex,
                        path + ": row " + std::to_string(t) + " norm " + std::to_string(norm));
    }

    std::string meta_path = path + ".meta.json";
    try {
        auto meta = nlohmann::json::parse(read_file_text(meta_path));
        index.encode_cfg = encode_cfg_from_json(meta.at("encode_config"));
        index.heads_digest = meta.value("heads_digest", "");
        if (meta.contains("skipped_docs"))
            index.skipped_docs = meta["skipped_docs"].get<std::vector<std::string>>();
    } catch (const Error&) {
        throw Error(Err::CorruptIndex, path + ": missing sidecar " + meta_path);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Err::CorruptIndex, meta_path + ": " + e.what());
    }
    return index;
}

std::vector<ScoredDoc> search(const MultiVectorIndex& index, const std::string& query_text,
                              const ProjectionHeads& heads, Featurizer& featurizer,
                              const SearchOptions& opts) {
    if (opts.k < 1) throw Error(Err::BadConfig, "k must be >= 1");
    if (static_cast<int>(index.encode_cfg.hidden_dim) != heads.hidden_dim)
        throw Error(Err::DimMismatch, "index hidden_dim disagrees with heads");
    if (!heads.has_dim(static_cast<int>(index.dim)))
        throw Error(Err::UnknownDim, "heads lack index dim " + std::to_string(index.dim));

    Matrix q64 = project(featurizer.encode(query_text, Side::query), heads,
                         static_cast<int>(index.dim));
    // Quantize the query to f32 to match the stored document precision.
    std::vector<float> q(q64.a.size());
    for (size_t i = 0; i < q64.a.size(); ++i) q[i] = static_cast<float>(q64.a[i]);
    const size_t qrows = q64.rows;
    const size_t d = index.dim;

    std::vector<size_t> pool;
    if (opts.mode == SearchMode::bm25_candidates) {
        if (!opts.lexical)
            throw Error(Err::BadConfig, "bm25_candidates mode needs a lexical index");
        for (const auto& hit : bm25_search(*opts.lexical, query_text, opts.candidates)) {
            if (auto ord = index.ordinal_of(hit.doc_id)) pool.push_back(*ord);
        }
        std::sort(pool.begin(), pool.end());
    } else {
        pool.resize(index.doc_table.size());
        for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    }

    std::vector<double> totals(pool.size(), 0.0);
    parallel_for(pool.size(), opts.threads, [&](size_t pi) {
        const DocEntry& e = index.doc_table[pool[pi]];
        const float* rows = index.doc_rows(pool[pi]);
        double total = 0.0;
        for (size_t i = 0; i < qrows; ++i)
            total += kern::max_dot_f32(q.data() + i * d, rows, e.token_count, d).value;
        totals[pi] = total;
    });

    std::vector<ScoredDoc> hits(pool.size());
    for (size_t pi = 0; pi < pool.size(); ++pi)
        hits[pi] = {index.doc_table[pool[pi]].doc_id, totals[pi]};
    std::sort(hits.begin(), hits.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > opts.k) hits.resize(opts.k);
    if (opts.minmax_scores && !hits.empty()) {
        std::vector<double> scores(hits.size());
        for (size_t i = 0; i < hits.size(); ++i) scores[i] = hits[i].score;
        auto normed = minmax_normalize(scores);
        for (size_t i = 0; i < hits.size(); ++i) hits[i].score = normed[i];
    }
    return hits;
}

std::vector<ScoredDoc> search(const MultiVectorIndex& index, const std::string& query_text,
                              const ProjectionHeads& heads, const SearchOptions& opts) {
    Featurizer featurizer(index.encode_cfg);
    return search(index, query_text, heads, featurizer, opts);
}

} // namespace lire

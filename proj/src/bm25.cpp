#include "lire/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lire/error.hpp"

namespace lire {

std::vector<std::string> lexical_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        bool keep = (c >= 0x80) || std::isalnum(c);
        if (keep) {
            cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

InvertedIndex build_lexical_index(const Corpus& corpus, double k1, double b) {
    if (corpus.docs.empty()) throw Error(Err::EmptyCorpus, "cannot index an empty corpus");
    InvertedIndex index;
    index.k1 = k1;
    index.b = b;
    index.num_docs = corpus.docs.size();
    index.doc_lengths.resize(corpus.docs.size());
    index.doc_ids.reserve(corpus.docs.size());

    uint64_t total_len = 0;
    for (size_t ord = 0; ord < corpus.docs.size(); ++ord) {
        const auto& doc = corpus.docs[ord];
        index.doc_ids.push_back(doc.doc_id);
        auto tokens = lexical_tokens(doc.title + " " + doc.text);
        index.doc_lengths[ord] = static_cast<uint32_t>(tokens.size());
        total_len += tokens.size();
        std::map<std::string, uint32_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, freq] : tf)
            index.postings[term].push_back({static_cast<uint32_t>(ord), freq});
    }
    // Corpus order is ordinal order, so postings come out sorted already;
    // keep the invariant explicit regardless.
    for (auto& [_, plist] : index.postings)
        std::sort(plist.begin(), plist.end(),
                  [](const Posting& a, const Posting& b2) { return a.doc_ordinal < b2.doc_ordinal; });
    index.avgdl = static_cast<double>(total_len) / static_cast<double>(index.num_docs);
    if (!(index.avgdl > 0.0)) throw Error(Err::EmptyCorpus, "corpus has no lexical tokens");
    return index;
}

std::vector<ScoredDoc> bm25_search(const InvertedIndex& index, const std::string& query_text,
                                   size_t k) {
    if (k < 1) throw Error(Err::BadConfig, "k must be >= 1");
    auto terms = lexical_tokens(query_text);
    std::vector<double> scores(index.num_docs, 0.0);
    std::vector<uint8_t> touched(index.num_docs, 0);
    const double n = static_cast<double>(index.num_docs);
    for (const auto& term : terms) { // bag semantics: repeated terms add twice
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const Posting& p : it->second) {
            const double tf = static_cast<double>(p.term_frequency);
            const double len_norm =
                1.0 - index.b + index.b * static_cast<double>(index.doc_lengths[p.doc_ordinal]) /
                                    index.avgdl;
            scores[p.doc_ordinal] += idf * tf * (index.k1 + 1.0) / (tf + index.k1 * len_norm);
            touched[p.doc_ordinal] = 1;
        }
    }
    std::vector<ScoredDoc> hits;
    for (size_t ord = 0; ord < index.num_docs; ++ord)
        if (touched[ord]) hits.push_back({index.doc_ids[ord], scores[ord]});
    std::sort(hits.begin(), hits.end(), [](const ScoredDoc& a, const ScoredDoc& b2) {
        if (a.score != b2.score) return a.score > b2.score;
        return a.doc_id < b2.doc_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

Corpus build_sampled_corpus(const InvertedIndex& index, const Corpus& corpus,
                            const std::vector<Query>& queries, const Qrels& qrels, size_t k,
                            SampleStats* stats, Warnings* warnings) {
    std::set<std::string> keep;
    for (const auto& q : queries)
        for (const auto& hit : bm25_search(index, q.text, k)) keep.insert(hit.doc_id);
    size_t topk_union = keep.size();

    std::set<std::string> corpus_ids;
    for (const auto& d : corpus.docs) corpus_ids.insert(d.doc_id);

    std::set<std::string> judged;
    for (const auto& [qid, docs] : qrels.by_query) {
        for (const auto& [did, _] : docs) {
            judged.insert(did);
            if (!corpus_ids.count(did)) {
                warn("judged doc '" + did + "' not in corpus, skipped", warnings);
                continue;
            }
            keep.insert(did);
        }
    }

    Corpus out;
    // keep is doc_id-ordered, which fixes the output order.
    std::unordered_map<std::string, const Document*> by_id;
    for (const auto& d : corpus.docs) by_id[d.doc_id] = &d;
    for (const auto& did : keep) out.docs.push_back(*by_id.at(did));

    if (stats) {
        stats->topk_union = topk_union;
        stats->judged = judged.size();
        stats->output = out.docs.size();
    }
    return out;
}

} // namespace lire

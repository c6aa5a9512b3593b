#include "lire/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include "lire/error.hpp"
#include "lire/rng.hpp"

namespace lire {

namespace {

std::string label(const char* prefix, size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%05zu", prefix, i);
    return buf;
}

class WordMint {
public:
    explicit WordMint(Rng& rng) : rng_(rng) {}

    std::string fresh() {
        for (;;) {
            size_t len = 5 + rng_.next_below(4);
            std::string w;
            for (size_t i = 0; i < len; ++i)
                w.push_back(static_cast<char>('a' + rng_.next_below(26)));
            if (used_.insert(w).second) return w;
        }
    }

private:
    Rng& rng_;
    std::unordered_set<std::string> used_;
};

std::vector<std::string> sample_distinct(Rng& rng, const std::vector<std::string>& pool,
                                         size_t count) {
    count = std::min(count, pool.size());
    std::vector<uint32_t> order(pool.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    rng.shuffle(order);
    std::vector<std::string> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) out.push_back(pool[order[i]]);
    return out;
}

std::string join_shuffled(Rng& rng, std::vector<std::string> words) {
    rng.shuffle(words);
    std::string text;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) text += ' ';
        text += words[i];
    }
    return text;
}

} // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
    if (spec.clusters == 0) throw Error(Err::BadConfig, "need at least one cluster");
    if (spec.docs == 0) throw Error(Err::BadConfig, "need at least one document");

    Rng vocab_rng = rng_stream(spec.seed, "synthetic.vocab");
    WordMint mint(vocab_rng);

    std::vector<std::vector<std::string>> signatures(spec.clusters);
    for (auto& sig : signatures)
        for (size_t i = 0; i < spec.signature_words; ++i) sig.push_back(mint.fresh());
    std::vector<std::string> noise;
    for (size_t i = 0; i < spec.noise_words; ++i) noise.push_back(mint.fresh());

    SyntheticData data;

    // Documents, round-robin over clusters. Each carries a doc-unique word so
    // no two documents are textually identical.
    Rng doc_rng = rng_stream(spec.seed, "synthetic.docs");
    std::vector<size_t> doc_cluster(spec.docs);
    for (size_t i = 0; i < spec.docs; ++i) {
        size_t c = i % spec.clusters;
        doc_cluster[i] = c;
        auto words = sample_distinct(doc_rng, signatures[c], spec.doc_signature);
        words.push_back(mint.fresh());
        for (auto& w : sample_distinct(doc_rng, noise, spec.doc_noise)) words.push_back(w);
        data.corpus.docs.push_back({label("d", i), "", join_shuffled(doc_rng, words)});
    }

    // Queries draw only from their cluster's signature, never from the noise
    // pool, so lexical candidates stay inside the cluster.
    Rng query_rng = rng_stream(spec.seed, "synthetic.queries");
    for (size_t i = 0; i < spec.queries; ++i) {
        size_t c = i % spec.clusters;
        auto words = sample_distinct(query_rng, signatures[c], spec.query_signature);
        data.queries.push_back({label("q", i), join_shuffled(query_rng, words)});

        std::vector<size_t> cluster_docs;
        for (size_t d = 0; d < spec.docs; ++d)
            if (doc_cluster[d] == c) cluster_docs.push_back(d);
        if (!cluster_docs.empty()) {
            size_t best = cluster_docs[query_rng.next_below(cluster_docs.size())];
            for (size_t d : cluster_docs)
                data.qrels.by_query[data.queries.back().query_id]
                                   [data.corpus.docs[d].doc_id] = d == best ? 2 : 1;
        }
    }

    // Pairs: both sides share the cluster signature and one pair-id word;
    // the pair-id is what separates a pair from its same-cluster neighbors
    // inside a batch.
    Rng pair_rng = rng_stream(spec.seed, "synthetic.pairs");
    for (size_t i = 0; i < spec.pairs; ++i) {
        size_t c = i % spec.clusters;
        std::string pair_word = mint.fresh();
        auto make_side = [&]() {
            auto words = sample_distinct(pair_rng, signatures[c], 2);
            words.push_back(pair_word);
            for (auto& w : sample_distinct(pair_rng, noise, 1)) words.push_back(w);
            return join_shuffled(pair_rng, words);
        };
        data.pairs.push_back({make_side(), make_side()});
    }

    // Triplets: positive from the query's cluster, negatives cycled from the
    // others, teacher score = query-word overlap fraction plus small noise.
    Rng trip_rng = rng_stream(spec.seed, "synthetic.triplets");
    for (size_t i = 0; i < spec.triplets; ++i) {
        size_t c = i % spec.clusters;
        TripletExample t;
        auto q_words = sample_distinct(trip_rng, signatures[c], spec.query_signature);
        t.query_text = join_shuffled(trip_rng, q_words);

        auto make_doc = [&](size_t cluster) {
            auto words = sample_distinct(trip_rng, signatures[cluster], spec.doc_signature);
            for (auto& w : sample_distinct(trip_rng, noise, spec.doc_noise)) words.push_back(w);
            return join_shuffled(trip_rng, words);
        };
        auto overlap_score = [&](const std::string& text) {
            std::unordered_set<std::string> doc_words;
            std::string cur;
            for (char ch : text + " ") {
                if (ch == ' ') {
                    if (!cur.empty()) doc_words.insert(cur);
                    cur.clear();
                } else {
                    cur.push_back(ch);
                }
            }
            size_t shared = 0;
            for (const auto& w : q_words)
                if (doc_words.count(w)) ++shared;
            return static_cast<double>(shared) / static_cast<double>(q_words.size()) +
                   0.02 * trip_rng.next_double();
        };

        t.positive = make_doc(c);
        t.teacher_scores.push_back(overlap_score(t.positive));
        for (size_t k = 0; k < kTripletNegatives; ++k) {
            size_t other = spec.clusters > 1 ? (c + 1 + k % (spec.clusters - 1)) % spec.clusters : c;
            t.negatives.push_back(make_doc(other));
            t.teacher_scores.push_back(overlap_score(t.negatives.back()));
        }
        data.triplets.push_back(std::move(t));
    }

    return data;
}

} // namespace lire

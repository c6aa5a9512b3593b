#include "lire/featurizer.hpp"

#include <cctype>

#include "lire/error.hpp"
#include "lire/rng.hpp"

namespace lire {

namespace {

const char* kQueryMarker = "[Q]";
const char* kDocMarker = "[D]";
const char* kSlotSurface = "[MASK]";

// Byte-level split: ASCII whitespace and punctuation separate tokens, all
// other bytes (including any >= 0x80) are token content.
bool is_separator(unsigned char c) {
    return c < 0x80 && (std::isspace(c) || std::ispunct(c));
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (is_separator(c)) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(c));
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

void add_surface_vector(std::vector<double>& acc, const std::string& surface, uint64_t seed,
                        int hidden_dim) {
    // Bag of byte 3-grams; surfaces shorter than 3 bytes contribute a single
    // whole-surface gram.
    auto add_gram = [&](const char* p, size_t n) {
        Rng rng = rng_stream(seed, "featurizer.gram", fnv1a64(p, n));
        for (int i = 0; i < hidden_dim; ++i) acc[static_cast<size_t>(i)] += rng.uniform(-1.0, 1.0);
    };
    if (surface.size() < 3) {
        add_gram(surface.data(), surface.size());
        return;
    }
    for (size_t i = 0; i + 3 <= surface.size(); ++i) add_gram(surface.data() + i, 3);
}

std::vector<double> slot_position_vector(uint64_t seed, size_t position, int hidden_dim) {
    std::vector<double> v(static_cast<size_t>(hidden_dim));
    Rng rng = rng_stream(seed, "featurizer.slot", position);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

Matrix embed_impl(const std::vector<Token>& tokens, const EncodeConfig& cfg,
                  std::unordered_map<std::string, std::vector<double>>* cache) {
    if (tokens.empty()) throw Error(Err::EmptyText, "embed_tokens on empty token list");
    if (cfg.hidden_dim < 1) throw Error(Err::BadConfig, "hidden_dim must be positive");
    const auto h = static_cast<size_t>(cfg.hidden_dim);

    Matrix out(tokens.size(), h);
    std::vector<double> mean(h, 0.0);
    size_t non_slot = 0;
    for (size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t].is_augmentation_slot) continue;
        double* row = out.row(t);
        if (cache) {
            auto it = cache->find(tokens[t].surface);
            if (it == cache->end()) {
                std::vector<double> v(h, 0.0);
                add_surface_vector(v, tokens[t].surface, cfg.seed, cfg.hidden_dim);
                it = cache->emplace(tokens[t].surface, std::move(v)).first;
            }
            std::copy(it->second.begin(), it->second.end(), row);
        } else {
            std::vector<double> v(h, 0.0);
            add_surface_vector(v, tokens[t].surface, cfg.seed, cfg.hidden_dim);
            std::copy(v.begin(), v.end(), row);
        }
        for (size_t j = 0; j < h; ++j) mean[j] += row[j];
        ++non_slot;
    }
    if (non_slot > 0)
        for (auto& m : mean) m /= static_cast<double>(non_slot);

    for (size_t t = 0; t < tokens.size(); ++t) {
        if (!tokens[t].is_augmentation_slot) continue;
        std::vector<double> v = slot_position_vector(cfg.seed, t, cfg.hidden_dim);
        double* row = out.row(t);
        if (cfg.augmentation == AugmentationMode::contextual) {
            for (size_t j = 0; j < h; ++j) row[j] = 0.5 * (v[j] + mean[j]);
        } else {
            std::copy(v.begin(), v.end(), row);
        }
    }
    return out;
}

} // namespace

std::string EncodeConfig::instruction_text() const {
    if (!instruction_override.empty()) return instruction_override;
    switch (task) {
        case TaskType::ret: return "Retrieve passages relevant to the search request";
        case TaskType::qa: return "Find the passage that answers the question";
        case TaskType::sts: return "Judge how similar the two sentences are";
    }
    return "";
}

const char* to_string(PrefixMode m) {
    return m == PrefixMode::markers ? "markers" : "instructions";
}

const char* to_string(AugmentationMode m) {
    switch (m) {
        case AugmentationMode::off: return "off";
        case AugmentationMode::static_slots: return "static";
        case AugmentationMode::contextual: return "contextual";
    }
    return "?";
}

const char* to_string(TaskType t) {
    switch (t) {
        case TaskType::ret: return "ret";
        case TaskType::qa: return "qa";
        case TaskType::sts: return "sts";
    }
    return "?";
}

PrefixMode prefix_mode_from(const std::string& s) {
    if (s == "markers") return PrefixMode::markers;
    if (s == "instructions") return PrefixMode::instructions;
    throw Error(Err::BadConfig, "unknown prefix mode '" + s + "'");
}

AugmentationMode augmentation_from(const std::string& s) {
    if (s == "off") return AugmentationMode::off;
    if (s == "static") return AugmentationMode::static_slots;
    if (s == "contextual") return AugmentationMode::contextual;
    throw Error(Err::BadConfig, "unknown augmentation mode '" + s + "'");
}

TaskType task_from(const std::string& s) {
    if (s == "ret") return TaskType::ret;
    if (s == "qa") return TaskType::qa;
    if (s == "sts") return TaskType::sts;
    throw Error(Err::BadConfig, "unknown task type '" + s + "'");
}

std::vector<Token> tokenize(const std::string& text, Side side, const EncodeConfig& cfg) {
    const int max_len = cfg.max_len(side);
    if (max_len < 2) throw Error(Err::BadConfig, "max length must be >= 2");

    std::vector<Token> out;
    if (cfg.prefix_mode == PrefixMode::markers) {
        out.push_back({side == Side::query ? kQueryMarker : kDocMarker, false, true});
    } else {
        for (auto& w : split_words(cfg.instruction_text()))
            out.push_back({std::move(w), false, true});
    }
    if (static_cast<int>(out.size()) > max_len) out.resize(static_cast<size_t>(max_len));

    size_t content = 0;
    for (auto& w : split_words(text)) {
        if (static_cast<int>(out.size()) >= max_len) break;
        out.push_back({std::move(w), false, false});
        ++content;
    }

    if (side == Side::document) {
        if (content == 0)
            throw Error(Err::EmptyAfterTruncation, "document has no content tokens");
        return out;
    }

    if (cfg.augmentation == AugmentationMode::off) {
        if (content == 0)
            throw Error(Err::EmptyQuery, "empty query requires augmentation");
        return out;
    }
    while (static_cast<int>(out.size()) < cfg.max_query_len)
        out.push_back({kSlotSurface, true, false});
    return out;
}

Matrix embed_tokens(const std::vector<Token>& tokens, const EncodeConfig& cfg) {
    return embed_impl(tokens, cfg, nullptr);
}

Matrix Featurizer::encode(const std::string& text, Side side) {
    return embed_impl(tokenize(text, side, cfg_), cfg_, &cache_);
}

Matrix Featurizer::embed(const std::vector<Token>& toks) {
    return embed_impl(toks, cfg_, &cache_);
}

std::vector<Token> Featurizer::tokens(const std::string& text, Side side) const {
    return tokenize(text, side, cfg_);
}

} // namespace lire

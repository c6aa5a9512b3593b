#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lire/matrix.hpp"

namespace lire {

enum class Side { query, document };
enum class PrefixMode { markers, instructions };
enum class AugmentationMode { off, static_slots, contextual };
enum class TaskType { ret, qa, sts };

struct Token {
    std::string surface;
    bool is_augmentation_slot = false;
    bool is_marker = false; // marker or instruction prefix token
};

struct EncodeConfig {
    int max_query_len = 32;
    int max_doc_len = 300;
    PrefixMode prefix_mode = PrefixMode::markers;
    AugmentationMode augmentation = AugmentationMode::contextual;
    TaskType task = TaskType::ret;
    std::string instruction_override; // empty: use the task default
    uint64_t seed = 0;
    int hidden_dim = 128;

    int max_len(Side side) const { return side == Side::query ? max_query_len : max_doc_len; }
    std::string instruction_text() const;
};

const char* to_string(PrefixMode m);
const char* to_string(AugmentationMode m);
const char* to_string(TaskType t);
PrefixMode prefix_mode_from(const std::string& s);
AugmentationMode augmentation_from(const std::string& s);
TaskType task_from(const std::string& s);

/// Splits on whitespace and ASCII punctuation, prepends the side's prefix
/// ("[Q]"/"[D]" markers or the instruction tokens), truncates to the side's
/// maximum length, and pads queries to max_query_len with augmentation slots
/// when augmentation is enabled. Content tokens can never collide with
/// markers because '[' and ']' are split characters.
std::vector<Token> tokenize(const std::string& text, Side side, const EncodeConfig& cfg);

/// Per-token base features, one row per token (num_tokens x hidden_dim).
/// A stand-in for a frozen transformer backbone: each non-slot row is the
/// sum of pseudo-random vectors for the byte-level character 3-grams of its
/// surface (FNV-1a hashed, splitmix64-expanded, uniform in [-1,1)), a pure
/// function of (surface, seed, hidden_dim). Static slots embed as a
/// per-position seeded vector; contextual slots as the average of that
/// vector and the mean of the non-slot rows, letting augmentation slots see
/// the query content.
Matrix embed_tokens(const std::vector<Token>& tokens, const EncodeConfig& cfg);

/// embed_tokens with a cache of per-surface vectors. One instance per
/// (seed, hidden_dim); not thread-safe.
class Featurizer {
public:
    explicit Featurizer(const EncodeConfig& cfg) : cfg_(cfg) {}

    const EncodeConfig& config() const { return cfg_; }
    Matrix encode(const std::string& text, Side side); // tokenize + embed
    Matrix embed(const std::vector<Token>& tokens);
    std::vector<Token> tokens(const std::string& text, Side side) const;

private:
    const std::vector<double>& surface_vector(const std::string& surface);
    EncodeConfig cfg_;
    std::unordered_map<std::string, std::vector<double>> cache_;
};

} // namespace lire

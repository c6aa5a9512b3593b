#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lire/corpus.hpp"
#include "lire/featurizer.hpp"
#include "lire/heads.hpp"
#include "lire/losses.hpp"

namespace lire {

enum class Stage { pairs, triplets };
enum class Schedule { constant_after_warmup, cosine };

/// Optimization settings for one training stage. Defaults are desk-scale;
/// the larger published settings (100k steps, 16384 pair batch) remain legal
/// values.
struct TrainConfig {
    Stage stage = Stage::pairs;
    int steps = 300;
    int batch_size = 128;
    double peak_lr = 5e-5;
    int warmup = -1; // -1: resolve per stage (pairs: min(1000, steps-1); triplets: 5% of steps)
    Schedule schedule = Schedule::constant_after_warmup;
    double clip_threshold = 1.0;
    double tau = 0.02;              // pair-stage InfoNCE temperature
    bool normalize_scores = false;  // min-max both score lists before the KL
    double distill_temperature = 1.0;
    std::map<int, double> mrl_weights; // empty: uniform 1.0 per dim
    uint64_t seed = 0;
    int log_every = 10; // stderr progress cadence; the returned log has every step

    static TrainConfig pair_defaults(int steps = 300);
    static TrainConfig triplet_defaults(int steps = 200);

    /// Fills warmup when unset and validates invariants (warmup < steps,
    /// positive rates).
    void resolve();
};

/// Adam moments, one buffer pair per head matrix. beta1=0.9, beta2=0.999,
/// eps=1e-8, bias-corrected.
struct OptimizerState {
    std::vector<Matrix> m, v;
    int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerState zeros_like(const ProjectionHeads& heads);
};

/// Learning rate at a 0-based step: linear ramp peak*(step+1)/warmup while
/// step < warmup, then either constant or cosine decay
/// peak*(1+cos(pi*(step-warmup)/(steps-warmup)))/2. Continuous at the warmup
/// boundary and non-negative everywhere.
double lr_at(int step, const TrainConfig& cfg);

/// Magnitude clipping, elementwise: g -> clamp(g, -threshold, +threshold).
void clip_gradients(HeadGradients& grads, double threshold);

/// One bias-corrected Adam update. Throws Err::NanGradient (with the step
/// index) on non-finite gradients.
void adam_step(ProjectionHeads& heads, const HeadGradients& grads, OptimizerState& state,
               double lr);

struct TrainLogEntry {
    int step;
    double lr;
    double loss;                    // MRL-aggregated objective
    std::map<int, double> per_dim;  // objective per head dim
    size_t dropped_examples = 0;    // degenerate pools skipped this step
};

struct TrainResult {
    ProjectionHeads heads;
    std::vector<TrainLogEntry> log;
};

/// Pair stage: epoch-wise seeded shuffling without replacement, per-step
/// bidirectional InfoNCE aggregated over every head dim, clip, Adam.
/// Examples whose pooled vector degenerates are dropped from that batch with
/// a warning, never fatally.
TrainResult train_pairs(const std::vector<PairExample>& pairs, ProjectionHeads heads,
                        const EncodeConfig& encode_cfg, TrainConfig cfg,
                        Warnings* warnings = nullptr);

/// Triplet stage: queries are encoded with augmentation per the encode
/// config, student scores come from MaxSim over the 8 candidates, and the KL
/// against the teacher scores is aggregated over every head dim.
TrainResult train_triplets(const std::vector<TripletExample>& triplets, ProjectionHeads heads,
                           const EncodeConfig& encode_cfg, TrainConfig cfg,
                           Warnings* warnings = nullptr);

// Evaluation helpers over frozen weights (no gradients).

/// Fraction of pairs whose left pooled vector ranks its own partner first
/// within the batch at head dim d.
double in_batch_accuracy(const PairBatch& batch, const ProjectionHeads& heads, int d);

/// Mean over triplets of (positive MaxSim score - best negative MaxSim
/// score) at head dim d.
double mean_triplet_margin(const TripletBatch& batch, const ProjectionHeads& heads, int d);

std::string train_log_to_jsonl(const std::vector<TrainLogEntry>& log);

} // namespace lire

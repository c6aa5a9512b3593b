#include "lire/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "lire/error.hpp"
#include "lire/kernels.hpp"
#include "lire/rng.hpp"
#include "lire/scoring.hpp"

namespace lire {

TrainConfig TrainConfig::pair_defaults(int steps) {
    TrainConfig cfg;
    cfg.stage = Stage::pairs;
    cfg.steps = steps;
    cfg.batch_size = 128;
    cfg.peak_lr = 5e-5;
    cfg.schedule = Schedule::constant_after_warmup;
    cfg.resolve();
    return cfg;
}

TrainConfig TrainConfig::triplet_defaults(int steps) {
    TrainConfig cfg;
    cfg.stage = Stage::triplets;
    cfg.steps = steps;
    cfg.batch_size = 32;
    cfg.peak_lr = 1e-5;
    cfg.schedule = Schedule::cosine;
    cfg.resolve();
    return cfg;
}

void TrainConfig::resolve() {
    if (steps < 0) throw Error(Err::BadConfig, "steps must be >= 0");
    if (batch_size < 1) throw Error(Err::BadConfig, "batch_size must be >= 1");
    if (!(peak_lr > 0.0)) throw Error(Err::BadConfig, "peak_lr must be positive");
    if (!(tau > 0.0)) throw Error(Err::BadTemperature, "tau must be positive");
    if (!(clip_threshold > 0.0)) throw Error(Err::BadConfig, "clip threshold must be positive");
    if (!(distill_temperature > 0.0))
        throw Error(Err::BadTemperature, "distill temperature must be positive");
    if (warmup < 0) {
        // Stage defaults: the published 1,000-step pair warm-up, clamped to
        // the desk-scale run length; 5% of steps for triplets.
        if (stage == Stage::pairs)
            warmup = std::min(1000, std::max(0, steps - 1));
        else
            warmup = std::clamp(static_cast<int>(0.05 * steps + 0.5), 0, std::max(0, steps - 1));
    }
    if (steps > 0 && warmup >= steps)
        throw Error(Err::BadConfig, "warmup (" + std::to_string(warmup) +
                                        ") must be < steps (" + std::to_string(steps) + ")");
}

OptimizerState OptimizerState::zeros_like(const ProjectionHeads& heads) {
    OptimizerState st;
    for (const auto& w : heads.weights) {
        st.m.emplace_back(w.rows, w.cols);
        st.v.emplace_back(w.rows, w.cols);
    }
    return st;
}

double lr_at(int step, const TrainConfig& cfg) {
    if (step < 0 || step >= cfg.steps) throw Error(Err::BadConfig, "step out of range");
    if (step < cfg.warmup)
        return cfg.peak_lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup);
    if (cfg.schedule == Schedule::constant_after_warmup) return cfg.peak_lr;
    const double progress = static_cast<double>(step - cfg.warmup) /
                            static_cast<double>(cfg.steps - cfg.warmup);
    return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void clip_gradients(HeadGradients& grads, double threshold) {
    if (!(threshold > 0.0)) throw Error(Err::BadConfig, "clip threshold must be positive");
    for (auto& m : grads.g)
        for (auto& g : m.a) g = std::clamp(g, -threshold, threshold);
}

void adam_step(ProjectionHeads& heads, const HeadGradients& grads, OptimizerState& state,
               double lr) {
    if (grads.g.size() != heads.weights.size())
        throw Error(Err::DimMismatch, "gradient/weight shape mismatch");
    if (!grads.all_finite())
        throw Error(Err::NanGradient,
                    "non-finite gradient at optimizer step " + std::to_string(state.step_count));
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (size_t i = 0; i < heads.weights.size(); ++i) {
        auto& w = heads.weights[i].a;
        auto& m = state.m[i].a;
        auto& v = state.v[i].a;
        const auto& g = grads.g[i].a;
        for (size_t e = 0; e < w.size(); ++e) {
            m[e] = state.beta1 * m[e] + (1.0 - state.beta1) * g[e];
            v[e] = state.beta2 * v[e] + (1.0 - state.beta2) * g[e] * g[e];
            const double mhat = m[e] / bc1;
            const double vhat = v[e] / bc2;
            w[e] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

namespace {

/// Epoch-wise shuffled batch indices, reshuffled per epoch with a stream
/// derived from (seed, epoch). A partial trailing batch rolls into a fresh
/// epoch, so every batch has exactly batch_size distinct examples.
class Batcher {
public:
    Batcher(size_t n, size_t batch, uint64_t seed)
        : n_(n), batch_(std::min(batch, n)), seed_(seed) {
        order_.resize(n_);
        for (size_t i = 0; i < n_; ++i) order_[i] = static_cast<uint32_t>(i);
        reshuffle();
    }

    std::vector<uint32_t> next() {
        if (pos_ + batch_ > n_) {
            ++epoch_;
            reshuffle();
            pos_ = 0;
        }
        std::vector<uint32_t> out(order_.begin() + static_cast<long>(pos_),
                                  order_.begin() + static_cast<long>(pos_ + batch_));
        pos_ += batch_;
        return out;
    }

private:
    void reshuffle() {
        Rng rng = rng_stream(seed_, "trainer.shuffle", epoch_);
        rng.shuffle(order_);
    }
    size_t n_, batch_;
    uint64_t seed_;
    std::vector<uint32_t> order_;
    size_t pos_ = 0;
    uint64_t epoch_ = 0;
};

std::map<int, double> resolve_mrl_weights(const TrainConfig& cfg, const std::vector<int>& dims) {
    if (cfg.mrl_weights.empty()) {
        std::map<int, double> w;
        for (int d : dims) w[d] = 1.0;
        return w;
    }
    for (int d : dims)
        if (!cfg.mrl_weights.count(d))
            throw Error(Err::DimMismatch, "no MRL weight for dim " + std::to_string(d));
    return cfg.mrl_weights;
}

template <typename MakeBatch, typename ComputeLoss>
TrainResult run_training(ProjectionHeads heads, TrainConfig cfg, size_t num_examples,
                         MakeBatch&& make_batch, ComputeLoss&& compute_loss,
                         Warnings* warnings) {
    cfg.resolve();
    TrainResult result;
    OptimizerState opt = OptimizerState::zeros_like(heads);
    const auto mrl_weights = resolve_mrl_weights(cfg, heads.dims);
    Batcher batcher(num_examples, static_cast<size_t>(cfg.batch_size), cfg.seed);

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<uint32_t> indices = batcher.next();
        TrainLogEntry entry;
        entry.step = step;
        entry.lr = lr_at(step, cfg);

        // Degenerate-pool examples are dropped from this batch and the loss
        // recomputed; training never aborts on one bad example.
        std::map<int, LossValue> per_dim;
        for (;;) {
            if (indices.empty()) break;
            try {
                per_dim.clear();
                auto batch = make_batch(indices);
                for (int d : heads.dims) per_dim.emplace(d, compute_loss(batch, heads, d));
                break;
            } catch (const DegeneratePoolError& e) {
                warn("step " + std::to_string(step) + ": dropping example " +
                         std::to_string(indices[e.example_index]) + " (" + e.what() + ")",
                     warnings);
                indices.erase(indices.begin() + static_cast<long>(e.example_index));
                ++entry.dropped_examples;
            }
        }
        if (indices.empty()) {
            warn("step " + std::to_string(step) + ": whole batch degenerate, skipping update",
                 warnings);
            entry.loss = 0.0;
            result.log.push_back(std::move(entry));
            continue;
        }

        LossValue total = mrl_aggregate(per_dim, mrl_weights);
        entry.loss = total.value;
        for (const auto& [d, lv] : per_dim) entry.per_dim[d] = lv.value;

        clip_gradients(total.grads, cfg.clip_threshold);
        adam_step(heads, total.grads, opt, entry.lr);

        if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
            info("step " + std::to_string(step) + " lr " + std::to_string(entry.lr) + " loss " +
                 std::to_string(entry.loss));
        result.log.push_back(std::move(entry));
    }
    result.heads = std::move(heads);
    return result;
}

} // namespace

TrainResult train_pairs(const std::vector<PairExample>& pairs, ProjectionHeads heads,
                        const EncodeConfig& encode_cfg, TrainConfig cfg, Warnings* warnings) {
    cfg.stage = Stage::pairs;
    cfg.resolve();
    if (pairs.size() < static_cast<size_t>(cfg.batch_size))
        throw Error(Err::BadConfig, "need at least batch_size (" +
                                        std::to_string(cfg.batch_size) + ") pairs, have " +
                                        std::to_string(pairs.size()));
    if (encode_cfg.hidden_dim != heads.hidden_dim)
        throw Error(Err::DimMismatch, "encode hidden_dim disagrees with heads");
    Featurizer featurizer(encode_cfg);
    InfoNceOpts opts{cfg.tau};
    return run_training(
        std::move(heads), cfg, pairs.size(),
        [&](const std::vector<uint32_t>& indices) {
            std::vector<PairExample> batch_examples;
            batch_examples.reserve(indices.size());
            for (uint32_t i : indices) batch_examples.push_back(pairs[i]);
            return make_pair_batch(batch_examples, featurizer);
        },
        [&](const PairBatch& batch, const ProjectionHeads& h, int d) {
            return infonce_bidirectional(batch, h, d, opts);
        },
        warnings);
}

TrainResult train_triplets(const std::vector<TripletExample>& triplets, ProjectionHeads heads,
                           const EncodeConfig& encode_cfg, TrainConfig cfg, Warnings* warnings) {
    cfg.stage = Stage::triplets;
    cfg.resolve();
    if (triplets.empty()) throw Error(Err::BadConfig, "need at least one triplet");
    if (encode_cfg.hidden_dim != heads.hidden_dim)
        throw Error(Err::DimMismatch, "encode hidden_dim disagrees with heads");
    Featurizer featurizer(encode_cfg);
    DistillOpts opts{cfg.normalize_scores, cfg.distill_temperature, 0.0};
    return run_training(
        std::move(heads), cfg, triplets.size(),
        [&](const std::vector<uint32_t>& indices) {
            std::vector<TripletExample> batch_examples;
            batch_examples.reserve(indices.size());
            for (uint32_t i : indices) batch_examples.push_back(triplets[i]);
            return make_triplet_batch(batch_examples, featurizer);
        },
        [&](const TripletBatch& batch, const ProjectionHeads& h, int d) {
            return kl_distill_maxsim(batch, h, d, opts);
        },
        warnings);
}

double in_batch_accuracy(const PairBatch& batch, const ProjectionHeads& heads, int d) {
    const Matrix& w = heads.weights[heads.weight_index(d)];
    const auto dd = static_cast<size_t>(d);
    Matrix y(batch.base.rows, dd);
    for (size_t u = 0; u < batch.base.rows; ++u) {
        double* z = y.row(u);
        for (size_t r = 0; r < dd; ++r) z[r] = kern::dot(w.row(r), batch.base.row(u), batch.base.cols);
        double norm = std::sqrt(kern::dot(z, z, dd));
        if (!(norm >= 1e-8)) throw Error(Err::DegenerateToken, "row norm underflow");
        for (size_t r = 0; r < dd; ++r) z[r] /= norm;
    }
    auto pool = [&](const TextRef& ref) {
        std::vector<double> p(dd, 0.0);
        for (uint32_t idx : ref.pooled) kern::axpy(p.data(), 1.0, y.row(idx), dd);
        double norm = std::sqrt(kern::dot(p.data(), p.data(), dd));
        if (!(norm >= 1e-8)) throw Error(Err::DegeneratePool, "pooled norm underflow");
        for (auto& x : p) x /= norm;
        return p;
    };
    const size_t n = batch.size();
    std::vector<std::vector<double>> lvecs(n), rvecs(n);
    for (size_t i = 0; i < n; ++i) {
        lvecs[i] = pool(batch.left[i]);
        rvecs[i] = pool(batch.right[i]);
    }
    size_t hits = 0;
    for (size_t i = 0; i < n; ++i) {
        size_t best = 0;
        double best_score = -1e300;
        for (size_t j = 0; j < n; ++j) {
            double s = kern::dot(lvecs[i].data(), rvecs[j].data(), dd);
            if (s > best_score) {
                best_score = s;
                best = j;
            }
        }
        if (best == i) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

double mean_triplet_margin(const TripletBatch& batch, const ProjectionHeads& heads, int d) {
    if (batch.items.empty()) throw Error(Err::EmptyText, "empty triplet batch");
    const Matrix& w = heads.weights[heads.weight_index(d)];
    const auto dd = static_cast<size_t>(d);
    Matrix y(batch.base.rows, dd);
    for (size_t u = 0; u < batch.base.rows; ++u) {
        double* z = y.row(u);
        for (size_t r = 0; r < dd; ++r) z[r] = kern::dot(w.row(r), batch.base.row(u), batch.base.cols);
        double norm = std::sqrt(kern::dot(z, z, dd));
        if (!(norm >= 1e-8)) throw Error(Err::DegenerateToken, "row norm underflow");
        for (size_t r = 0; r < dd; ++r) z[r] /= norm;
    }
    auto gather = [&](const std::vector<uint32_t>& rows) {
        Matrix m(rows.size(), dd);
        for (size_t i = 0; i < rows.size(); ++i)
            std::copy(y.row(rows[i]), y.row(rows[i]) + dd, m.row(i));
        return m;
    };
    double total = 0.0;
    for (const auto& item : batch.items) {
        Matrix q = gather(item.query.rows);
        double pos = maxsim(q, gather(item.docs[0].rows)).total;
        double best_neg = -1e300;
        for (size_t k = 1; k < kTripletWays; ++k)
            best_neg = std::max(best_neg, maxsim(q, gather(item.docs[k].rows)).total);
        total += pos - best_neg;
    }
    return total / static_cast<double>(batch.items.size());
}

std::string train_log_to_jsonl(const std::vector<TrainLogEntry>& log) {
    std::string out;
    for (const auto& e : log) {
        nlohmann::ordered_json j;
        j["step"] = e.step;
        j["lr"] = e.lr;
        j["loss"] = e.loss;
        nlohmann::ordered_json pd;
        for (const auto& [d, v] : e.per_dim) pd[std::to_string(d)] = v;
        j["per_dim"] = pd;
        if (e.dropped_examples) j["dropped_examples"] = e.dropped_examples;
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace lire

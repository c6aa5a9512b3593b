#pragma once

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lire/corpus.hpp"
#include "lire/error.hpp"
#include "lire/featurizer.hpp"
#include "lire/heads.hpp"
#include "lire/matrix.hpp"

namespace lire {

/// A loss evaluation: the scalar objective plus its analytic gradient with
/// respect to every head weight. Base features are constants (the featurizer
/// is frozen), so heads are the only parameters.
struct LossValue {
    double value = 0.0;
    HeadGradients grads;
};

/// One encoded text inside a batch: row indices into the batch's shared
/// deduplicated base-feature table, plus the subset of rows that take part
/// in single-vector pooling (augmentation slots are excluded).
struct TextRef {
    std::vector<uint32_t> rows;
    std::vector<uint32_t> pooled;
};

/// Batches share one base-feature table with exact-duplicate rows stored
/// once; identical token surfaces across a batch project identically, so
/// this cuts the projection and gradient work without changing any result.
struct PairBatch {
    Matrix base; // unique rows x hidden_dim
    std::vector<TextRef> left, right;

    size_t size() const { return left.size(); }
};

struct TripletItem {
    TextRef query;
    std::array<TextRef, kTripletWays> docs; // positive first
    std::array<double, kTripletWays> teacher;
};

struct TripletBatch {
    Matrix base;
    std::vector<TripletItem> items;
};

/// Left sides encode as queries, right sides as documents. Augmentation-slot
/// rows are dropped at assembly: they are excluded from pooling and the pair
/// objective has no other way to consume them.
PairBatch make_pair_batch(std::span<const PairExample> pairs, Featurizer& featurizer);
TripletBatch make_triplet_batch(std::span<const TripletExample> triplets, Featurizer& featurizer);

/// Raised when an example's pooled token rows cancel to (numerically) zero;
/// carries which example so the trainer can drop it and continue.
class DegeneratePoolError : public Error {
public:
    DegeneratePoolError(size_t example, const std::string& msg)
        : Error(Err::DegeneratePool, msg), example_index(example) {}
    size_t example_index;
};

/// Mean of the token rows, L2-normalized. Callers exclude augmentation-slot
/// rows before pooling.
std::vector<double> pool_single_vector(const TokenMatrix& tokens);

/// Bidirectional in-batch InfoNCE over pooled unit vectors: logits are
/// cosines over the batch scaled by 1/tau, cross-entropy against the
/// diagonal is averaged over rows and over columns, and the two directions
/// are averaged. Optionally yields d(loss)/d(vectors).
double infonce_on_vectors(const Matrix& left, const Matrix& right, double tau,
                          Matrix* dleft = nullptr, Matrix* dright = nullptr);

/// Listwise distillation: KL(p || q) with p = softmax(teacher'/T) detached
/// and q = softmax(student'/T), where x' = minmax(x) when normalize is set.
/// Optionally yields d(loss)/d(student). min_margin > 0 additionally
/// requires the min-max endpoints to be strict by that margin (gradient
/// checks reject kinked instances via Err::TieNearArgmax).
double kl_distill(const std::vector<double>& student, const std::vector<double>& teacher,
                  bool normalize, double temperature = 1.0,
                  std::vector<double>* dstudent = nullptr, double min_margin = 0.0);

struct InfoNceOpts {
    double tau = 0.02;
};

struct DistillOpts {
    bool normalize = false;
    double temperature = 1.0;
    double min_margin = 0.0;          // reject MaxSim argmax ties closer than this
    double min_endpoint_margin = 0.0; // reject min-max endpoint ties closer than this
};

/// Full pair-stage objective at one head dim: project, pool, normalize,
/// bidirectional InfoNCE; gradients flow back to the head weights.
LossValue infonce_bidirectional(const PairBatch& batch, const ProjectionHeads& heads, int d,
                                const InfoNceOpts& opts);

/// Full triplet-stage objective at one head dim, averaged over the batch:
/// project query and the 8 documents, MaxSim student scores, KL against the
/// teacher scores. Teacher scores are data; gradients reach only the heads.
LossValue kl_distill_maxsim(const TripletBatch& batch, const ProjectionHeads& heads, int d,
                            const DistillOpts& opts);

/// Weighted sum of per-dim losses: value = sum_d w_d * L_d, gradients summed
/// into matching head buffers (mrl) or accumulated through each truncation
/// into the single matrix (mrl_e). Throws Err::DimMismatch when the two maps
/// disagree.
LossValue mrl_aggregate(const std::map<int, LossValue>& loss_at_dim,
                        const std::map<int, double>& weights);

// ---- finite-difference verification --------------------------------------

using LossFn = std::function<LossValue(const ProjectionHeads&)>;

/// Central differences (f(w+h) - f(w-h)) / 2h for every weight entry.
HeadGradients finite_difference_gradients(const LossFn& fn, const ProjectionHeads& heads,
                                          double h);

struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t entries = 0;
    bool pass = false;
};

/// Entrywise relative error between analytic and finite-difference
/// gradients. Entries are compared as |a-f| / max(|a|, |f|, 1e-3 * scale)
/// with scale the largest magnitude across both gradients: entries far below
/// the gradient's own scale are held to an absolute standard, so sparse and
/// near-zero entries are not judged against finite-difference noise.
GradCheckReport compare_gradients(const HeadGradients& analytic, const HeadGradients& fd,
                                  double tol);

/// Analytic-vs-central-difference check of fn at the given weights.
GradCheckReport grad_check(const LossFn& fn, const ProjectionHeads& heads, double h, double tol);

} // namespace lire

#include "lire/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "lire/kernels.hpp"
#include "lire/rng.hpp"
#include "lire/scoring.hpp"

namespace lire {

namespace {

constexpr double kMinPoolNorm = 1e-8;
constexpr double kMinTokenNorm = 1e-8;

/// Exact-duplicate row interning for batch assembly.
class RowTable {
public:
    explicit RowTable(size_t hidden) : hidden_(hidden) {}

    uint32_t add(const double* row) {
        uint64_t key = fnv1a64(row, hidden_ * sizeof(double));
        auto& bucket = buckets_[key];
        for (uint32_t idx : bucket)
            if (std::memcmp(flat_.data() + idx * hidden_, row, hidden_ * sizeof(double)) == 0)
                return idx;
        auto idx = static_cast<uint32_t>(count_++);
        flat_.insert(flat_.end(), row, row + hidden_);
        bucket.push_back(idx);
        return idx;
    }

    TextRef add_text(const Matrix& base, const std::vector<Token>& tokens) {
        TextRef ref;
        ref.rows.reserve(base.rows);
        for (size_t t = 0; t < base.rows; ++t) {
            uint32_t idx = add(base.row(t));
            ref.rows.push_back(idx);
            if (!tokens[t].is_augmentation_slot) ref.pooled.push_back(idx);
        }
        return ref;
    }

    Matrix take() {
        Matrix m;
        m.rows = count_;
        m.cols = hidden_;
        m.a = std::move(flat_);
        return m;
    }

private:
    size_t hidden_;
    size_t count_ = 0;
    std::vector<double> flat_;
    std::unordered_map<uint64_t, std::vector<uint32_t>> buckets_;
};

/// Unit-normalized projections of every unique base row at one head dim,
/// with the pre-normalization norms kept for the backward pass.
struct ProjectedTable {
    Matrix y;                  // unique rows x d
    std::vector<double> norms; // |W x| per row
};

ProjectedTable project_table(const Matrix& base, const Matrix& weights, size_t d) {
    ProjectedTable pt;
    pt.y = Matrix(base.rows, d);
    pt.norms.resize(base.rows);
    for (size_t u = 0; u < base.rows; ++u) {
        const double* x = base.row(u);
        double* z = pt.y.row(u);
        for (size_t r = 0; r < d; ++r) z[r] = kern::dot(weights.row(r), x, base.cols);
        double norm = std::sqrt(kern::dot(z, z, d));
        if (!(norm >= kMinTokenNorm))
            throw Error(Err::DegenerateToken, "unique row " + std::to_string(u) +
                                                  " pre-normalization norm " +
                                                  std::to_string(norm));
        pt.norms[u] = norm;
        for (size_t r = 0; r < d; ++r) z[r] /= norm;
    }
    return pt;
}

// d(loss)/dW from d(loss)/dy. Normalization backward is per row:
// gz = (gy - (gy.y) y) / |z|, then dW[r] += gz[r] * x.
void project_table_backward(const Matrix& base, const ProjectedTable& pt, const Matrix& gy,
                            Matrix& dW) {
    const size_t d = pt.y.cols;
    std::vector<double> gz(d);
    for (size_t u = 0; u < base.rows; ++u) {
        const double* y = pt.y.row(u);
        const double* g = gy.row(u);
        double gdoty = kern::dot(g, y, d);
        bool nonzero = false;
        for (size_t r = 0; r < d; ++r) {
            gz[r] = (g[r] - gdoty * y[r]) / pt.norms[u];
            nonzero |= gz[r] != 0.0;
        }
        if (!nonzero) continue;
        const double* x = base.row(u);
        for (size_t r = 0; r < d; ++r)
            if (gz[r] != 0.0) kern::axpy(dW.row(r), gz[r], x, base.cols);
    }
}

struct PooledVec {
    std::vector<double> u; // unit vector
    double norm;           // |mean| before normalization
};

PooledVec pool_text(const ProjectedTable& pt, const TextRef& ref, size_t example_index) {
    if (ref.pooled.empty())
        throw DegeneratePoolError(example_index, "example has no pooled rows");
    const size_t d = pt.y.cols;
    PooledVec pv;
    pv.u.assign(d, 0.0);
    for (uint32_t idx : ref.pooled) kern::axpy(pv.u.data(), 1.0, pt.y.row(idx), d);
    const double inv_m = 1.0 / static_cast<double>(ref.pooled.size());
    for (auto& v : pv.u) v *= inv_m;
    pv.norm = std::sqrt(kern::dot(pv.u.data(), pv.u.data(), d));
    if (!(pv.norm >= kMinPoolNorm))
        throw DegeneratePoolError(example_index, "pooled vector norm " + std::to_string(pv.norm));
    for (auto& v : pv.u) v /= pv.norm;
    return pv;
}

void pool_backward(const ProjectedTable& pt, const TextRef& ref, const PooledVec& pv,
                   const double* gu, Matrix& gy) {
    const size_t d = pt.y.cols;
    double gdotu = kern::dot(gu, pv.u.data(), d);
    std::vector<double> gp(d);
    const double inv_m = 1.0 / static_cast<double>(ref.pooled.size());
    for (size_t r = 0; r < d; ++r) gp[r] = (gu[r] - gdotu * pv.u[r]) / pv.norm * inv_m;
    for (uint32_t idx : ref.pooled) kern::axpy(gy.row(idx), 1.0, gp.data(), d);
}

const Matrix& weights_for(const ProjectionHeads& heads, int d) {
    if (!heads.has_dim(d)) throw Error(Err::UnknownDim, std::to_string(d));
    return heads.weights[heads.weight_index(d)];
}

Matrix gather_rows(const ProjectedTable& pt, const std::vector<uint32_t>& rows) {
    Matrix m(rows.size(), pt.y.cols);
    for (size_t i = 0; i < rows.size(); ++i)
        std::memcpy(m.row(i), pt.y.row(rows[i]), pt.y.cols * sizeof(double));
    return m;
}

void scatter_rows(const Matrix& grad, const std::vector<uint32_t>& rows, Matrix& gy) {
    for (size_t i = 0; i < rows.size(); ++i)
        kern::axpy(gy.row(rows[i]), 1.0, grad.row(i), grad.cols);
}

} // namespace

PairBatch make_pair_batch(std::span<const PairExample> pairs, Featurizer& featurizer) {
    const auto& cfg = featurizer.config();
    RowTable table(static_cast<size_t>(cfg.hidden_dim));
    PairBatch batch;
    // Augmentation slots never pool and the pair objective has no MaxSim, so
    // slot rows are dropped here instead of being projected for nothing.
    auto add_pooled_only = [&](const std::vector<Token>& tokens, const Matrix& base) {
        TextRef ref;
        for (size_t t = 0; t < base.rows; ++t) {
            if (tokens[t].is_augmentation_slot) continue;
            uint32_t idx = table.add(base.row(t));
            ref.rows.push_back(idx);
            ref.pooled.push_back(idx);
        }
        return ref;
    };
    for (const auto& p : pairs) {
        auto left_tokens = featurizer.tokens(p.left_text, Side::query);
        auto right_tokens = featurizer.tokens(p.right_text, Side::document);
        batch.left.push_back(add_pooled_only(left_tokens, featurizer.embed(left_tokens)));
        batch.right.push_back(add_pooled_only(right_tokens, featurizer.embed(right_tokens)));
    }
    batch.base = table.take();
    return batch;
}

TripletBatch make_triplet_batch(std::span<const TripletExample> triplets,
                                Featurizer& featurizer) {
    const auto& cfg = featurizer.config();
    RowTable table(static_cast<size_t>(cfg.hidden_dim));
    TripletBatch batch;
    for (const auto& t : triplets) {
        if (t.negatives.size() != kTripletNegatives)
            throw Error(Err::WrongNegativeCount, std::to_string(t.negatives.size()));
        if (t.teacher_scores.size() != kTripletWays)
            throw Error(Err::WrongScoreCount, std::to_string(t.teacher_scores.size()));
        TripletItem item;
        auto q_tokens = featurizer.tokens(t.query_text, Side::query);
        item.query = table.add_text(featurizer.embed(q_tokens), q_tokens);
        for (size_t k = 0; k < kTripletWays; ++k) {
            const std::string& text = k == 0 ? t.positive : t.negatives[k - 1];
            auto d_tokens = featurizer.tokens(text, Side::document);
            item.docs[k] = table.add_text(featurizer.embed(d_tokens), d_tokens);
            item.teacher[k] = t.teacher_scores[k];
        }
        batch.items.push_back(std::move(item));
    }
    batch.base = table.take();
    return batch;
}

std::vector<double> pool_single_vector(const TokenMatrix& tokens) {
    if (tokens.rows == 0) throw Error(Err::EmptyText, "pooling an empty token matrix");
    std::vector<double> mean(tokens.cols, 0.0);
    for (size_t t = 0; t < tokens.rows; ++t) kern::axpy(mean.data(), 1.0, tokens.row(t), tokens.cols);
    for (auto& v : mean) v /= static_cast<double>(tokens.rows);
    double norm = std::sqrt(kern::dot(mean.data(), mean.data(), mean.size()));
    if (!(norm >= kMinPoolNorm))
        throw Error(Err::DegeneratePool, "pooled norm " + std::to_string(norm));
    for (auto& v : mean) v /= norm;
    return mean;
}

double infonce_on_vectors(const Matrix& left, const Matrix& right, double tau, Matrix* dleft,
                          Matrix* dright) {
    if (!(tau > 0.0)) throw Error(Err::BadTemperature, "tau must be positive");
    if (!left.same_shape(right) || left.rows == 0)
        throw Error(Err::DimMismatch, "left/right vector batches must match and be non-empty");
    const size_t n = left.rows;
    const size_t d = left.cols;

    Matrix logits(n, n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            logits.at(i, j) = kern::dot(left.row(i), right.row(j), d) / tau;

    // Log-sum-exp per row and per column; loss is the mean cross-entropy
    // against the diagonal, averaged over the two directions.
    std::vector<double> row_lse(n), col_lse(n);
    for (size_t i = 0; i < n; ++i) {
        double m = -1e300;
        for (size_t j = 0; j < n; ++j) m = std::max(m, logits.at(i, j));
        double s = 0.0;
        for (size_t j = 0; j < n; ++j) s += std::exp(logits.at(i, j) - m);
        row_lse[i] = m + std::log(s);
    }
    for (size_t j = 0; j < n; ++j) {
        double m = -1e300;
        for (size_t i = 0; i < n; ++i) m = std::max(m, logits.at(i, j));
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += std::exp(logits.at(i, j) - m);
        col_lse[j] = m + std::log(s);
    }
    double loss_rows = 0.0, loss_cols = 0.0;
    for (size_t i = 0; i < n; ++i) {
        loss_rows += row_lse[i] - logits.at(i, i);
        loss_cols += col_lse[i] - logits.at(i, i);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.5 * (loss_rows + loss_cols) * inv_n;

    if (dleft || dright) {
        if (dleft) *dleft = Matrix(n, d);
        if (dright) *dright = Matrix(n, d);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) {
                double p_row = std::exp(logits.at(i, j) - row_lse[i]);
                double p_col = std::exp(logits.at(i, j) - col_lse[j]);
                double diag = i == j ? 2.0 : 0.0;
                double da = 0.5 * inv_n * (p_row + p_col - diag) / tau;
                if (dleft) kern::axpy(dleft->row(i), da, right.row(j), d);
                if (dright) kern::axpy(dright->row(j), da, left.row(i), d);
            }
        }
    }
    return loss;
}

double kl_distill(const std::vector<double>& student, const std::vector<double>& teacher,
                  bool normalize, double temperature, std::vector<double>* dstudent,
                  double min_margin) {
    if (student.size() != teacher.size() || student.empty())
        throw Error(Err::DimMismatch, "student/teacher score lists must match and be non-empty");
    if (!(temperature > 0.0)) throw Error(Err::BadTemperature, "temperature must be positive");
    for (double v : student)
        if (!std::isfinite(v)) throw Error(Err::NanGradient, "non-finite student score");
    for (double v : teacher)
        if (!std::isfinite(v)) throw Error(Err::NanGradient, "non-finite teacher score");
    const size_t n = student.size();

    std::vector<double> s = normalize ? minmax_normalize(student) : student;
    std::vector<double> t = normalize ? minmax_normalize(teacher) : teacher;

    size_t amin = 0, amax = 0;
    double lo = student[0], hi = student[0];
    for (size_t k = 1; k < n; ++k) {
        if (student[k] < lo) { lo = student[k]; amin = k; }
        if (student[k] > hi) { hi = student[k]; amax = k; }
    }
    if (normalize && min_margin > 0.0 && n > 1) {
        double second_hi = -1e300, second_lo = 1e300;
        for (size_t k = 0; k < n; ++k) {
            if (k != amax) second_hi = std::max(second_hi, student[k]);
            if (k != amin) second_lo = std::min(second_lo, student[k]);
        }
        if (hi - second_hi <= min_margin || second_lo - lo <= min_margin)
            throw Error(Err::TieNearArgmax, "min-max endpoints not strict");
    }

    auto log_softmax = [&](const std::vector<double>& x) {
        std::vector<double> out(n);
        double m = -1e300;
        for (double v : x) m = std::max(m, v / temperature);
        double sum = 0.0;
        for (size_t k = 0; k < n; ++k) sum += std::exp(x[k] / temperature - m);
        double lse = m + std::log(sum);
        for (size_t k = 0; k < n; ++k) out[k] = x[k] / temperature - lse;
        return out;
    };
    std::vector<double> lq = log_softmax(s);
    std::vector<double> lp = log_softmax(t);

    double loss = 0.0;
    for (size_t k = 0; k < n; ++k) loss += std::exp(lp[k]) * (lp[k] - lq[k]);

    if (dstudent) {
        // d(loss)/ds'_k = (q_k - p_k) / T, teacher detached.
        std::vector<double> g(n);
        for (size_t k = 0; k < n; ++k) g[k] = (std::exp(lq[k]) - std::exp(lp[k])) / temperature;
        if (!normalize) {
            *dstudent = std::move(g);
        } else {
            dstudent->assign(n, 0.0);
            if (hi > lo) {
                const double r = hi - lo;
                double c1 = 0.0, c2 = 0.0;
                for (size_t k = 0; k < n; ++k) {
                    c1 += g[k];
                    c2 += g[k] * s[k];
                }
                for (size_t k = 0; k < n; ++k) (*dstudent)[k] = g[k] / r;
                (*dstudent)[amin] -= c1 / r;
                (*dstudent)[amax] -= c2 / r;
                (*dstudent)[amin] += c2 / r;
            }
            // A degenerate span maps every score to 0.5; use subgradient 0.
        }
    }
    return loss;
}

LossValue infonce_bidirectional(const PairBatch& batch, const ProjectionHeads& heads, int d,
                                const InfoNceOpts& opts) {
    if (batch.left.size() != batch.right.size() || batch.left.empty())
        throw Error(Err::DimMismatch, "pair batch sides must match and be non-empty");
    const Matrix& w = weights_for(heads, d);
    const auto dd = static_cast<size_t>(d);
    const size_t n = batch.left.size();

    ProjectedTable pt = project_table(batch.base, w, dd);

    Matrix left(n, dd), right(n, dd);
    std::vector<PooledVec> left_pv(n), right_pv(n);
    for (size_t i = 0; i < n; ++i) {
        left_pv[i] = pool_text(pt, batch.left[i], i);
        right_pv[i] = pool_text(pt, batch.right[i], i);
        std::memcpy(left.row(i), left_pv[i].u.data(), dd * sizeof(double));
        std::memcpy(right.row(i), right_pv[i].u.data(), dd * sizeof(double));
    }

    Matrix dleft, dright;
    LossValue out;
    out.value = infonce_on_vectors(left, right, opts.tau, &dleft, &dright);
    out.grads = HeadGradients::zeros_like(heads);

    Matrix gy(batch.base.rows, dd);
    for (size_t i = 0; i < n; ++i) {
        pool_backward(pt, batch.left[i], left_pv[i], dleft.row(i), gy);
        pool_backward(pt, batch.right[i], right_pv[i], dright.row(i), gy);
    }
    project_table_backward(batch.base, pt, gy, out.grads.g[heads.weight_index(d)]);
    return out;
}

LossValue kl_distill_maxsim(const TripletBatch& batch, const ProjectionHeads& heads, int d,
                            const DistillOpts& opts) {
    if (batch.items.empty()) throw Error(Err::EmptyText, "empty triplet batch");
    const Matrix& w = weights_for(heads, d);
    const auto dd = static_cast<size_t>(d);

    ProjectedTable pt = project_table(batch.base, w, dd);
    Matrix gy(batch.base.rows, dd);
    const double inv_b = 1.0 / static_cast<double>(batch.items.size());

    LossValue out;
    out.grads = HeadGradients::zeros_like(heads);
    for (const auto& item : batch.items) {
        Matrix q = gather_rows(pt, item.query.rows);
        std::array<Matrix, kTripletWays> docs;
        std::array<ScoreBreakdown, kTripletWays> bds;
        std::vector<double> scores(kTripletWays);
        for (size_t k = 0; k < kTripletWays; ++k) {
            docs[k] = gather_rows(pt, item.docs[k].rows);
            bds[k] = maxsim(q, docs[k], opts.min_margin);
            scores[k] = bds[k].total;
        }
        std::vector<double> teacher(item.teacher.begin(), item.teacher.end());
        std::vector<double> dscores;
        out.value += inv_b * kl_distill(scores, teacher, opts.normalize, opts.temperature,
                                        &dscores, opts.min_endpoint_margin);

        Matrix dq(q.rows, dd);
        for (size_t k = 0; k < kTripletWays; ++k) {
            Matrix ddoc(docs[k].rows, dd);
            maxsim_backward(q, docs[k], bds[k], inv_b * dscores[k], dq, ddoc);
            scatter_rows(ddoc, item.docs[k].rows, gy);
        }
        scatter_rows(dq, item.query.rows, gy);
    }
    project_table_backward(batch.base, pt, gy, out.grads.g[heads.weight_index(d)]);
    return out;
}

LossValue mrl_aggregate(const std::map<int, LossValue>& loss_at_dim,
                        const std::map<int, double>& weights) {
    if (loss_at_dim.empty()) throw Error(Err::DimMismatch, "no per-dim losses");
    if (loss_at_dim.size() != weights.size())
        throw Error(Err::DimMismatch, "loss and weight maps differ in size");
    LossValue out;
    bool first = true;
    for (const auto& [dim, loss] : loss_at_dim) {
        auto wit = weights.find(dim);
        if (wit == weights.end())
            throw Error(Err::DimMismatch, "no weight for dim " + std::to_string(dim));
        if (!(wit->second > 0.0))
            throw Error(Err::BadConfig, "MRL weight for dim " + std::to_string(dim) +
                                            " must be positive");
        if (first) {
            out.grads.g.clear();
            for (const auto& m : loss.grads.g) out.grads.g.emplace_back(m.rows, m.cols);
            first = false;
        }
        if (out.grads.g.size() != loss.grads.g.size())
            throw Error(Err::DimMismatch, "per-dim gradients have inconsistent shapes");
        for (size_t i = 0; i < out.grads.g.size(); ++i)
            if (!out.grads.g[i].same_shape(loss.grads.g[i]))
                throw Error(Err::DimMismatch, "per-dim gradients have inconsistent shapes");
        out.value += wit->second * loss.value;
        out.grads.add_scaled(loss.grads, wit->second);
    }
    return out;
}

HeadGradients finite_difference_gradients(const LossFn& fn, const ProjectionHeads& heads,
                                          double h) {
    if (!(h > 0.0)) throw Error(Err::BadConfig, "finite-difference step must be positive");
    ProjectionHeads work = heads;
    HeadGradients fd = HeadGradients::zeros_like(heads);
    for (size_t m = 0; m < work.weights.size(); ++m) {
        for (size_t e = 0; e < work.weights[m].a.size(); ++e) {
            const double orig = work.weights[m].a[e];
            work.weights[m].a[e] = orig + h;
            const double f_plus = fn(work).value;
            work.weights[m].a[e] = orig - h;
            const double f_minus = fn(work).value;
            work.weights[m].a[e] = orig;
            fd.g[m].a[e] = (f_plus - f_minus) / (2.0 * h);
        }
    }
    return fd;
}

GradCheckReport compare_gradients(const HeadGradients& analytic, const HeadGradients& fd,
                                  double tol) {
    if (analytic.g.size() != fd.g.size())
        throw Error(Err::DimMismatch, "gradient shapes differ");
    double scale = 1e-12;
    for (size_t m = 0; m < analytic.g.size(); ++m)
        for (size_t e = 0; e < analytic.g[m].a.size(); ++e)
            scale = std::max({scale, std::fabs(analytic.g[m].a[e]), std::fabs(fd.g[m].a[e])});
    GradCheckReport report;
    for (size_t m = 0; m < analytic.g.size(); ++m) {
        if (!analytic.g[m].same_shape(fd.g[m]))
            throw Error(Err::DimMismatch, "gradient shapes differ");
        for (size_t e = 0; e < analytic.g[m].a.size(); ++e) {
            double a = analytic.g[m].a[e];
            double f = fd.g[m].a[e];
            double denom = std::max({std::fabs(a), std::fabs(f), 1e-3 * scale});
            report.max_rel_err = std::max(report.max_rel_err, std::fabs(a - f) / denom);
            ++report.entries;
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

GradCheckReport grad_check(const LossFn& fn, const ProjectionHeads& heads, double h, double tol) {
    LossValue analytic = fn(heads);
    HeadGradients fd = finite_difference_gradients(fn, heads, h);
    return compare_gradients(analytic.grads, fd, tol);
}

} // namespace lire

#include "lire/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "lire/error.hpp"
#include "lire/kernels.hpp"

namespace lire {

ScoreBreakdown maxsim(const TokenMatrix& query, const TokenMatrix& doc, double min_margin) {
    if (query.cols != doc.cols)
        throw Error(Err::DimMismatch, "query dim " + std::to_string(query.cols) +
                                          " vs doc dim " + std::to_string(doc.cols));
    if (query.rows == 0 || doc.rows == 0)
        throw Error(Err::EmptyText, "maxsim on empty token matrix");

    ScoreBreakdown bd;
    bd.per_query_token_max.resize(query.rows);
    bd.argmax_doc_token.resize(query.rows);
    for (size_t i = 0; i < query.rows; ++i) {
        if (min_margin > 0.0 && doc.rows > 1) {
            // Margin audit path: track top-2 explicitly.
            double best = -1e300, second = -1e300;
            size_t best_j = 0;
            for (size_t j = 0; j < doc.rows; ++j) {
                double s = kern::dot(query.row(i), doc.row(j), query.cols);
                if (s > best) {
                    second = best;
                    best = s;
                    best_j = j;
                } else if (s > second) {
                    second = s;
                }
            }
            if (best - second <= min_margin)
                throw Error(Err::TieNearArgmax,
                            "query token " + std::to_string(i) + " top-2 gap " +
                                std::to_string(best - second));
            bd.per_query_token_max[i] = best;
            bd.argmax_doc_token[i] = best_j;
        } else {
            kern::MaxDot m = kern::max_dot(query.row(i), doc.row(0), doc.rows, doc.cols);
            bd.per_query_token_max[i] = m.value;
            bd.argmax_doc_token[i] = m.index;
        }
        bd.total += bd.per_query_token_max[i];
    }
    return bd;
}

void maxsim_backward(const TokenMatrix& query, const TokenMatrix& doc,
                     const ScoreBreakdown& bd, double upstream, Matrix& dquery, Matrix& ddoc) {
    for (size_t i = 0; i < query.rows; ++i) {
        size_t j = bd.argmax_doc_token[i];
        kern::axpy(dquery.row(i), upstream, doc.row(j), query.cols);
        kern::axpy(ddoc.row(j), upstream, query.row(i), query.cols);
    }
}

std::vector<double> minmax_normalize(const std::vector<double>& scores) {
    if (scores.empty()) throw Error(Err::EmptyText, "minmax_normalize on empty list");
    auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(scores.size());
    if (hi == lo) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    double span = hi - lo;
    for (size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / span;
    return out;
}

} // namespace lire

#pragma once

#include <vector>

#include "lire/matrix.hpp"

namespace lire {

/// Late-interaction relevance score with its per-query-token decomposition.
/// total == sum of per_query_token_max; argmax_doc_token records which
/// document token won each query token (lowest index on ties).
struct ScoreBreakdown {
    double total = 0.0;
    std::vector<double> per_query_token_max;
    std::vector<size_t> argmax_doc_token;
};

/// MaxSim: for each query row, the maximum dot product against all document
/// rows, summed over query rows. Rows are expected unit-norm, making each
/// max a cosine. Throws Err::DimMismatch when dims differ.
///
/// With min_margin > 0, throws Err::TieNearArgmax whenever the best and
/// second-best document token for some query token are closer than
/// min_margin; finite-difference gradient checks use this to reject
/// instances sitting on the max's subgradient kink.
ScoreBreakdown maxsim(const TokenMatrix& query, const TokenMatrix& doc, double min_margin = 0.0);

/// Backward pass through maxsim: routes the upstream scalar d(loss)/d(total)
/// to the argmax pairs only. Accumulates query-token gradients into dquery
/// and document-token gradients into ddoc (both shaped like their matrices).
void maxsim_backward(const TokenMatrix& query, const TokenMatrix& doc,
                     const ScoreBreakdown& bd, double upstream, Matrix& dquery, Matrix& ddoc);

/// Affine rescale of scores to [0,1]: s -> (s - min)/(max - min). A
/// degenerate span (max == min) maps everything to 0.5 so downstream
/// softmax/KL inputs stay well-defined. Throws on an empty list.
std::vector<double> minmax_normalize(const std::vector<double>& scores);

} // namespace lire

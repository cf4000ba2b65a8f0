#pragma once

#include <vector>

#include "cpspan/dataset.hpp"
#include "cpspan/matrix.hpp"
#include "cpspan/tape.hpp"

namespace cpspan {

// Pairwise cosine similarities between rows of a and rows of b.
// Throws DegenerateEmbedding when any row norm falls below 1e-12.
Matrix cosine_similarity(const Matrix& a, const Matrix& b);

// Pulls each pair-observed sample's two view embeddings toward cosine 1;
// off-diagonal similarities are unconstrained. Per-pair terms are averaged
// over the pair-observed count and summed over view pairs. Pairs with no
// shared samples are skipped.
double partial_sample_alignment_loss(const std::vector<Matrix>& view_embeddings,
                                     const std::vector<PairObservedIndex>& pairs);

// InfoNCE baseline over full per-view batches: positives are the same row in
// other views, negatives other rows in other views, inner-product scores at
// temperature tau, averaged over the batch. Single view means no pairs and a
// zero loss.
double contrastive_loss(const std::vector<Matrix>& view_embeddings, double tau);

// Tape builder for one view pair's alignment term: |diag(S) - 1|^2 / rows.
Tape::Var sample_alignment_term(Tape& tape, Tape::Var hi, Tape::Var hj);

}  // namespace cpspan

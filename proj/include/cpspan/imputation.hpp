#pragma once

#include <cstdint>
#include <vector>

#include "cpspan/dataset.hpp"
#include "cpspan/matrix.hpp"

namespace cpspan {

enum class Provenance : std::uint8_t { Absent = 0, Observed = 1, Imputed = 2 };

struct NeighborRecord {
    std::size_t sample = 0;
    std::size_t view = 0;        // the view that was filled
    std::size_t donor_view = 0;  // the view the neighbor search ran in
    std::size_t donor_row = 0;
    int requested_rank = 1;
    int used_rank = 1;  // differs from requested when clamped to the pool size
};

// Per-view latent matrices plus the provenance of every (sample, view) cell.
// Imputed rows are copies of observed rows, never interpolations.
struct EmbeddingSet {
    std::vector<Matrix> views;           // each N x d
    std::vector<Provenance> provenance;  // row-major N x V
    std::vector<NeighborRecord> neighbor_log;

    std::size_t sample_count() const { return views.empty() ? 0 : views.front().rows(); }
    std::size_t view_count() const { return views.size(); }

    Provenance& at(std::size_t row, std::size_t view) {
        return provenance[row * view_count() + view];
    }
    Provenance at(std::size_t row, std::size_t view) const {
        return provenance[row * view_count() + view];
    }
};

// Fills every absent cell: for a sample missing in view a, search the donor
// view b (largest pool among views where the sample is observed, lowest id on
// ties) for the rank-th most cosine-similar sample among those observed in
// both a and b, and copy that donor's view-a row. rank clamps to the pool
// size. Throws ImputationInfeasible when every candidate pool is empty.
EmbeddingSet impute(EmbeddingSet emb, const std::vector<PairObservedIndex>& pairs, int rank);

// Row-wise concatenation of the per-view embeddings, view order preserved.
// Requires a completed set (no absent cells).
Matrix fuse(const EmbeddingSet& emb);

}  // namespace cpspan

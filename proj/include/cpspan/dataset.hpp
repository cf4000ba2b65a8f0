#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cpspan/matrix.hpp"

namespace cpspan {

// Incomplete multi-view dataset. `views[v]` is N x D_v; `mask` is N x V with
// 1 where a sample is observed in a view. The mask is the single source of
// truth: feature values at unobserved cells are filler and must never be read.
struct MultiViewDataset {
    std::vector<Matrix> views;
    Matrix mask;
    std::vector<int> labels;  // empty when unavailable; evaluation only
    int k = 0;                // cluster count; 0 = unknown

    std::size_t sample_count() const { return mask.rows(); }
    std::size_t view_count() const { return views.size(); }
    std::size_t dim(std::size_t v) const { return views[v].cols(); }

    bool observed(std::size_t row, std::size_t view) const { return mask(row, view) != 0.0; }

    std::vector<std::size_t> observed_rows(std::size_t view) const;
    std::size_t observed_count(std::size_t view) const;

    // Overwrites every unobserved feature cell. Downstream results must be
    // independent of the value chosen here.
    void fill_unobserved(double sentinel);
};

// Throws std::invalid_argument when a structural invariant is broken
// (row-count mismatch, non-binary mask, a sample observed nowhere).
void validate(const MultiViewDataset& ds);

struct PairObservedIndex {
    std::size_t view_i = 0;
    std::size_t view_j = 0;
    std::vector<std::size_t> rows;  // sorted ascending

    std::size_t count() const { return rows.size(); }
};

enum class MaskScheme { UniformCell };

struct MaskSpec {
    double missing_rate = 0.0;
    std::uint64_t seed = 0;
    MaskScheme scheme = MaskScheme::UniformCell;
};

// Draws exactly round(rate * n * v) missing cells in a random order, skipping
// cells whose row already has v-1 missing entries, so every sample keeps at
// least one observed view and the empirical rate matches the target.
Matrix generate_mask(std::size_t n, std::size_t v, const MaskSpec& spec);

PairObservedIndex pair_observed(const MultiViewDataset& ds, std::size_t view_i, std::size_t view_j);

std::vector<PairObservedIndex> all_pairs(const MultiViewDataset& ds);

// For every global row returns an observed row index of `view`: observed rows
// map to themselves, missing rows to a uniformly drawn observed row.
std::vector<std::size_t> resample_complete(const MultiViewDataset& ds, std::size_t view,
                                           std::uint64_t seed);

MultiViewDataset load_csv(const std::vector<std::filesystem::path>& view_paths,
                          const std::filesystem::path& mask_path,
                          const std::optional<std::filesystem::path>& labels_path = std::nullopt);

// Writes view_<v>.csv, mask.csv and (when labels exist) labels.csv into `dir`.
// Values survive a save/load round trip bit for bit.
void save_csv(const MultiViewDataset& ds, const std::filesystem::path& dir);

// Gaussian blobs with one independent mean per (cluster, view), drawn from a
// sphere of radius `separation`, plus unit-variance noise. Labels are kept and
// balanced within one sample per cluster. Mask is all ones.
MultiViewDataset synth_gaussian(std::size_t n, std::size_t v, int k,
                                const std::vector<std::size_t>& dims, double separation,
                                std::uint64_t seed);

// Copy of `ds` with `mask` installed and unobserved cells set to `sentinel`.
MultiViewDataset apply_mask(const MultiViewDataset& ds, Matrix mask, double sentinel = 0.0);

// Plain CSV helpers shared by the dataset readers and the CLI reports.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const Matrix& m, const std::filesystem::path& path);

}  // namespace cpspan

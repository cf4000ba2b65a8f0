#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpspan/autoencoder.hpp"
#include "cpspan/dataset.hpp"
#include "cpspan/imputation.hpp"
#include "cpspan/metrics.hpp"
#include "cpspan/prototype.hpp"

namespace cpspan {

enum class LossMode { Cpspan, ContrastiveBaseline, RecOnly, RecIa, RecPa };

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& name);

inline bool uses_sample_alignment(LossMode m) {
    return m == LossMode::Cpspan || m == LossMode::RecIa;
}
inline bool uses_prototype_alignment(LossMode m) {
    return m == LossMode::Cpspan || m == LossMode::RecPa || m == LossMode::ContrastiveBaseline;
}
inline bool uses_contrastive(LossMode m) { return m == LossMode::ContrastiveBaseline; }

struct TrainConfig {
    std::size_t batch_size = 256;
    int pretrain_epochs = 200;
    int align_epochs = 50;
    std::size_t d = 10;
    std::vector<std::size_t> hidden = {500, 500, 2000};
    double lr_pretrain = 5e-4;
    double lr_align = 1e-4;
    double alpha = 1e-3;
    double beta = 1e-3;
    double tau = 0.5;  // contrastive baseline only
    int rank = 1;      // imputation neighbor rank
    std::uint64_t seed = 0;
    LossMode loss_mode = LossMode::Cpspan;
    int final_kmeans_restarts = 10;
    int k = 0;  // 0 = take cluster count from the dataset

    void validate() const;
};

// One entry per epoch across both stages; inactive losses stay empty, active
// alignment losses carry zeros through the pretraining segment.
struct LossCurves {
    std::vector<double> rec;
    std::vector<double> ia;
    std::vector<double> pa;
    std::vector<double> cl;
    std::vector<double> total;
};

struct RankedScores {
    int rank = 1;
    double acc = 0.0;
    double nmi = 0.0;
    double fmeasure = 0.0;
};

struct RunReport {
    TrainConfig config;
    LossCurves curves;
    std::vector<AlignmentState> states;  // hard permutations per view pair
    std::optional<ClusteringResult> metrics;
    std::vector<RankedScores> by_rank;
    std::vector<NeighborRecord> neighbor_log;
    double timing_ms = 0.0;
};

nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const RunReport& report);

struct RunResult {
    RunReport report;
    std::vector<ViewAutoencoder> models;
    std::vector<AlignmentState> states;
    EmbeddingSet embeddings;  // completed (imputed) set at config.rank
    Matrix fused;
    Matrix centers;  // final k-means centers in the fused space
    std::vector<int> predicted;
};

int resolve_k(const MultiViewDataset& ds, const TrainConfig& config);

std::vector<ViewAutoencoder> init_models(const MultiViewDataset& ds, const TrainConfig& config);

// Per-view reconstruction training on resample-completed batches.
void pretrain(const MultiViewDataset& ds, std::vector<ViewAutoencoder>& models,
              const TrainConfig& config, LossCurves& curves);

// Joint stage: per epoch refresh embeddings, prototypes and permutations, then
// minibatch steps on the active loss terms.
std::vector<AlignmentState> align_train(const MultiViewDataset& ds,
                                        std::vector<ViewAutoencoder>& models,
                                        const TrainConfig& config, LossCurves& curves);

// Observed cells encoded, missing cells absent.
EmbeddingSet embed_dataset(const MultiViewDataset& ds,
                           const std::vector<ViewAutoencoder>& models);

struct Evaluation {
    EmbeddingSet embeddings;
    Matrix fused;
    Matrix centers;
    std::vector<int> predicted;
    std::optional<ClusteringResult> metrics;
};

// Imputation at the given rank, fusion, final k-means, scoring.
Evaluation evaluate_pipeline(const MultiViewDataset& ds,
                             const std::vector<ViewAutoencoder>& models,
                             const TrainConfig& config, int rank);

RunResult run(const MultiViewDataset& ds, const TrainConfig& config);

}  // namespace cpspan

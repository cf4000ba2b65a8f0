#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cpspan/dataset.hpp"
#include "cpspan/pipeline.hpp"

namespace cpspan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;

struct SyntheticSpec {
    std::size_t n = 1000;
    std::size_t v = 2;
    int k = 5;
    std::vector<std::size_t> dims;
    double separation = 8.0;
    std::uint64_t data_seed = 0;
    double missing_rate = 0.0;
};

struct DatasetSource {
    std::optional<SyntheticSpec> synthetic;
    std::vector<std::filesystem::path> view_paths;
    std::filesystem::path mask_path;
    std::optional<std::filesystem::path> labels_path;
};

struct CliConfig {
    DatasetSource source;
    TrainConfig train;
    std::filesystem::path out_dir;
    std::vector<double> missing_rates;  // empty: keep the dataset's own mask
    std::vector<std::uint64_t> seeds;   // empty: {train.seed}
    std::vector<int> ranks;             // empty: {train.rank}
    std::vector<double> alphas;         // sensitivity grid
    std::vector<double> betas;
    std::vector<LossMode> modes;        // ablation grid
    double sensitivity_rate = 0.5;
    int jobs = 0;  // 0: logical cores
};

// Default output root: $CPSPAN_OUT_ROOT when set, else "runs".
std::filesystem::path default_out_root();

// Writes view_<v>.csv, mask.csv, labels.csv for a synthetic spec.
int cmd_generate(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

// Trains the (rate x seed) matrix, one directory per run, plus summary.csv
// with mean and std per (rate, rank). Per-run failures are recorded and the
// matrix continues.
int cmd_run(const CliConfig& config);

// loss_mode x rate ACC table, rows rec-only / rec+ia / rec+pa / cpspan,
// averaged over the seed grid.
int cmd_ablate(const CliConfig& config);

// alpha x beta ACC surface at one missing rate.
int cmd_sensitivity(const CliConfig& config);

// Re-emits a completed run as one CSV: fused coordinates + predicted + truth
// rows for every sample, then the flagged k-means centers.
int cmd_dump_embeddings(const std::filesystem::path& run_dir,
                        const std::filesystem::path& out_file);

// Loads the configured dataset and applies a generated mask at `rate` when
// the rate grid is in use (seeded per run).
MultiViewDataset load_source(const DatasetSource& source);

std::string run_dir_name(double rate, std::uint64_t seed, LossMode mode);

}  // namespace cpspan::cli

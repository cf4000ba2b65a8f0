#include "cpspan/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include <json.hpp>

#include "cpspan/errors.hpp"
#include "cpspan/metrics.hpp"
#include "cpspan/rng.hpp"

namespace cpspan::cli {

namespace fs = std::filesystem;

std::filesystem::path default_out_root() {
    if (const char* root = std::getenv("CPSPAN_OUT_ROOT")) return fs::path(root);
    return fs::path("runs");
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_losses_csv(const LossCurves& curves, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,rec";
    if (!curves.ia.empty()) out << ",ia";
    if (!curves.pa.empty()) out << ",pa";
    if (!curves.cl.empty()) out << ",cl";
    out << ",total\n";
    for (std::size_t e = 0; e < curves.rec.size(); ++e) {
        out << e << ',' << format_double(curves.rec[e]);
        if (!curves.ia.empty()) out << ',' << format_double(curves.ia[e]);
        if (!curves.pa.empty()) out << ',' << format_double(curves.pa[e]);
        if (!curves.cl.empty()) out << ',' << format_double(curves.cl[e]);
        out << ',' << format_double(curves.total[e]) << '\n';
    }
}

void write_int_column(const std::vector<int>& values, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (int v : values) out << v << '\n';
}

std::vector<int> read_int_column(const fs::path& path) {
    const Matrix m = read_csv_matrix(path);
    std::vector<int> values;
    values.reserve(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        values.push_back(static_cast<int>(std::llround(m(r, 0))));
    return values;
}

struct CellOutcome {
    double rate = 0.0;
    std::uint64_t seed = 0;
    LossMode mode = LossMode::Cpspan;
    bool ok = false;
    std::string error;
    std::vector<RankedScores> by_rank;
};

// Runs one (rate, seed, mode) cell end to end and writes its artifacts.
CellOutcome run_cell(const CliConfig& config, const MultiViewDataset& base, double rate,
                     bool rate_from_grid, std::uint64_t seed, LossMode mode,
                     const std::vector<int>& ranks) {
    CellOutcome outcome;
    outcome.rate = rate;
    outcome.seed = seed;
    outcome.mode = mode;
    try {
        MultiViewDataset ds = base;
        if (rate_from_grid && rate > 0.0)
            ds = apply_mask(base, generate_mask(base.sample_count(), base.view_count(),
                                                MaskSpec{rate, seed}));

        TrainConfig train = config.train;
        train.seed = seed;
        train.loss_mode = mode;
        train.rank = ranks.front();

        RunResult result = run(ds, train);
        for (std::size_t i = 1; i < ranks.size(); ++i) {
            const Evaluation extra = evaluate_pipeline(ds, result.models, train, ranks[i]);
            if (extra.metrics)
                result.report.by_rank.push_back({ranks[i], extra.metrics->acc,
                                                 extra.metrics->nmi, extra.metrics->fmeasure});
        }

        const fs::path dir = config.out_dir / run_dir_name(rate, seed, mode);
        fs::create_directories(dir);
        write_text(dir / "report.json", to_json(result.report).dump(2) + "\n");
        write_losses_csv(result.report.curves, dir / "losses.csv");
        for (std::size_t v = 0; v < result.models.size(); ++v)
            save_checkpoint(result.models[v], dir / ("view" + std::to_string(v) + ".ckpt"));
        write_csv_matrix(result.fused, dir / "fused.csv");
        write_csv_matrix(result.centers, dir / "centers.csv");
        write_int_column(result.predicted, dir / "predicted.csv");
        if (!ds.labels.empty()) write_int_column(ds.labels, dir / "truth.csv");

        outcome.by_rank = result.report.by_rank;
        outcome.ok = true;
    } catch (const std::exception& e) {
        outcome.error = e.what();
    }
    return outcome;
}

void parallel_cells(std::size_t count, int jobs, const std::function<void(std::size_t)>& work) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    if (static_cast<std::size_t>(jobs) > count) jobs = static_cast<int>(count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int t = 0; t < jobs; ++t)
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) work(i);
        });
    for (auto& w : workers) w.join();
}

struct Aggregate {
    std::vector<double> acc, nmi, fmeasure;
};

double mean(const std::vector<double>& xs) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::vector<double> effective_rates(const CliConfig& config) {
    if (!config.missing_rates.empty()) return config.missing_rates;
    if (config.source.synthetic) return {config.source.synthetic->missing_rate};
    return {-1.0};  // dataset's own mask; reported as rate -1
}

std::vector<std::uint64_t> effective_seeds(const CliConfig& config) {
    return config.seeds.empty() ? std::vector<std::uint64_t>{config.train.seed} : config.seeds;
}

std::vector<int> effective_ranks(const CliConfig& config) {
    return config.ranks.empty() ? std::vector<int>{config.train.rank} : config.ranks;
}

// When a rate grid regenerates masks per cell, the base dataset must stay
// complete; a source-level missing rate would stack two masks.
MultiViewDataset load_base(const CliConfig& config, bool rate_from_grid) {
    DatasetSource source = config.source;
    if (rate_from_grid && source.synthetic) source.synthetic->missing_rate = 0.0;
    return load_source(source);
}

}  // namespace

MultiViewDataset load_source(const DatasetSource& source) {
    if (source.synthetic) {
        const SyntheticSpec& spec = *source.synthetic;
        std::vector<std::size_t> dims = spec.dims;
        if (dims.empty()) dims.assign(spec.v, 16);
        MultiViewDataset ds =
            synth_gaussian(spec.n, spec.v, spec.k, dims, spec.separation, spec.data_seed);
        if (spec.missing_rate > 0.0)
            ds = apply_mask(ds, generate_mask(spec.n, spec.v,
                                              MaskSpec{spec.missing_rate, spec.data_seed}));
        return ds;
    }
    if (source.view_paths.empty())
        throw std::invalid_argument("no dataset: give --views/--mask or a synthetic spec");
    return load_csv(source.view_paths, source.mask_path, source.labels_path);
}

namespace {
std::string rate_tag(double rate) { return rate < 0.0 ? "file" : format_short(rate); }
}  // namespace

std::string run_dir_name(double rate, std::uint64_t seed, LossMode mode) {
    return "rate" + rate_tag(rate) + "_seed" + std::to_string(seed) + "_" + to_string(mode);
}

int cmd_generate(const SyntheticSpec& spec, const fs::path& out_dir) {
    std::vector<std::size_t> dims = spec.dims;
    if (dims.empty()) dims.assign(spec.v, 16);
    MultiViewDataset ds =
        synth_gaussian(spec.n, spec.v, spec.k, dims, spec.separation, spec.data_seed);
    if (spec.missing_rate > 0.0)
        ds = apply_mask(ds, generate_mask(spec.n, spec.v,
                                          MaskSpec{spec.missing_rate, spec.data_seed}));
    save_csv(ds, out_dir);
    std::cout << "wrote " << ds.view_count() << " views, " << ds.sample_count()
              << " samples to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_run(const CliConfig& config) {
    const bool rate_from_grid = !config.missing_rates.empty();
    const MultiViewDataset base = load_base(config, rate_from_grid);
    const auto rates = effective_rates(config);
    const auto seeds = effective_seeds(config);
    const auto ranks = effective_ranks(config);

    struct Cell {
        double rate;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (double rate : rates)
        for (std::uint64_t seed : seeds) cells.push_back({rate, seed});

    fs::create_directories(config.out_dir);
    std::vector<CellOutcome> outcomes(cells.size());
    parallel_cells(cells.size(), config.jobs, [&](std::size_t i) {
        outcomes[i] = run_cell(config, base, cells[i].rate, rate_from_grid, cells[i].seed,
                               config.train.loss_mode, ranks);
    });

    std::ofstream summary(config.out_dir / "summary.csv");
    summary << "rate,rank,runs,failed,acc_mean,acc_std,nmi_mean,nmi_std,"
               "fmeasure_mean,fmeasure_std\n";
    bool any_failed = false;
    for (double rate : rates) {
        std::map<int, Aggregate> per_rank;
        std::size_t failed = 0;
        for (const CellOutcome& o : outcomes) {
            if (o.rate != rate) continue;
            if (!o.ok) {
                ++failed;
                any_failed = true;
                std::cerr << "run failed (" << run_dir_name(o.rate, o.seed, o.mode)
                          << "): " << o.error << "\n";
                continue;
            }
            for (const RankedScores& r : o.by_rank) {
                per_rank[r.rank].acc.push_back(r.acc);
                per_rank[r.rank].nmi.push_back(r.nmi);
                per_rank[r.rank].fmeasure.push_back(r.fmeasure);
            }
        }
        for (const auto& [rank, agg] : per_rank) {
            summary << rate_tag(rate) << ',' << rank << ',' << agg.acc.size() << ','
                    << failed << ',' << format_double(mean(agg.acc)) << ','
                    << format_double(stddev(agg.acc)) << ',' << format_double(mean(agg.nmi))
                    << ',' << format_double(stddev(agg.nmi)) << ','
                    << format_double(mean(agg.fmeasure)) << ','
                    << format_double(stddev(agg.fmeasure)) << '\n';
        }
        if (per_rank.empty())
            summary << rate_tag(rate) << ",,0," << failed << ",,,,,,\n";
    }
    return any_failed ? kExitRuntimeError : kExitOk;
}

int cmd_ablate(const CliConfig& config) {
    CliConfig grid = config;
    grid.modes = {LossMode::RecOnly, LossMode::RecIa, LossMode::RecPa, LossMode::Cpspan};
    const bool rate_from_grid = !grid.missing_rates.empty();
    const MultiViewDataset base = load_base(grid, rate_from_grid);
    const auto rates = effective_rates(grid);
    const auto seeds = effective_seeds(grid);
    const auto ranks = effective_ranks(grid);

    struct Cell {
        LossMode mode;
        double rate;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (LossMode mode : grid.modes)
        for (double rate : rates)
            for (std::uint64_t seed : seeds) cells.push_back({mode, rate, seed});

    fs::create_directories(grid.out_dir);
    std::vector<CellOutcome> outcomes(cells.size());
    parallel_cells(cells.size(), grid.jobs, [&](std::size_t i) {
        outcomes[i] = run_cell(grid, base, cells[i].rate, rate_from_grid, cells[i].seed,
                               cells[i].mode, ranks);
    });

    bool any_failed = false;
    std::ofstream table(grid.out_dir / "ablation.csv");
    table << "L_rec,L_ia,L_pa";
    for (double rate : rates) table << ",acc@" << format_short(rate);
    table << '\n';
    for (LossMode mode : grid.modes) {
        table << 1 << ',' << (uses_sample_alignment(mode) ? 1 : 0) << ','
              << (uses_prototype_alignment(mode) ? 1 : 0);
        for (double rate : rates) {
            std::vector<double> accs;
            for (const CellOutcome& o : outcomes) {
                if (o.mode != mode || o.rate != rate) continue;
                if (!o.ok) {
                    any_failed = true;
                    continue;
                }
                if (!o.by_rank.empty()) accs.push_back(o.by_rank.front().acc);
            }
            table << ',' << format_double(mean(accs));
        }
        table << '\n';
    }
    for (const CellOutcome& o : outcomes)
        if (!o.ok)
            std::cerr << "run failed (" << run_dir_name(o.rate, o.seed, o.mode)
                      << "): " << o.error << "\n";
    return any_failed ? kExitRuntimeError : kExitOk;
}

int cmd_sensitivity(const CliConfig& config) {
    if (config.alphas.empty() || config.betas.empty())
        throw std::invalid_argument("sensitivity: need --alphas and --betas grids");
    const MultiViewDataset base = load_base(config, true);
    const auto seeds = effective_seeds(config);

    struct Cell {
        double alpha, beta;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (double alpha : config.alphas)
        for (double beta : config.betas)
            for (std::uint64_t seed : seeds) cells.push_back({alpha, beta, seed});

    fs::create_directories(config.out_dir);
    std::vector<CellOutcome> outcomes(cells.size());
    parallel_cells(cells.size(), config.jobs, [&](std::size_t i) {
        CliConfig cell_config = config;
        cell_config.train.alpha = cells[i].alpha;
        cell_config.train.beta = cells[i].beta;
        cell_config.out_dir =
            config.out_dir / ("alpha" + format_short(cells[i].alpha) + "_beta" +
                              format_short(cells[i].beta));
        outcomes[i] = run_cell(cell_config, base, config.sensitivity_rate, true,
                               cells[i].seed, config.train.loss_mode,
                               effective_ranks(config));
    });

    bool any_failed = false;
    std::ofstream table(config.out_dir / "sensitivity.csv");
    table << "alpha,beta,acc_mean,nmi_mean,fmeasure_mean\n";
    for (double alpha : config.alphas) {
        for (double beta : config.betas) {
            Aggregate agg;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (cells[i].alpha != alpha || cells[i].beta != beta) continue;
                if (!outcomes[i].ok) {
                    any_failed = true;
                    std::cerr << "run failed (alpha=" << alpha << ", beta=" << beta
                              << "): " << outcomes[i].error << "\n";
                    continue;
                }
                if (!outcomes[i].by_rank.empty()) {
                    agg.acc.push_back(outcomes[i].by_rank.front().acc);
                    agg.nmi.push_back(outcomes[i].by_rank.front().nmi);
                    agg.fmeasure.push_back(outcomes[i].by_rank.front().fmeasure);
                }
            }
            table << format_short(alpha) << ',' << format_short(beta) << ','
                  << format_double(mean(agg.acc)) << ',' << format_double(mean(agg.nmi)) << ','
                  << format_double(mean(agg.fmeasure)) << '\n';
        }
    }
    return any_failed ? kExitRuntimeError : kExitOk;
}

int cmd_dump_embeddings(const fs::path& run_dir, const fs::path& out_file) {
    const fs::path fused_path = run_dir / "fused.csv";
    const fs::path centers_path = run_dir / "centers.csv";
    const fs::path predicted_path = run_dir / "predicted.csv";
    for (const fs::path& p : {fused_path, centers_path, predicted_path})
        if (!fs::exists(p))
            throw std::runtime_error("missing run artifact: " + p.string());

    const Matrix fused = read_csv_matrix(fused_path);
    const Matrix centers = read_csv_matrix(centers_path);
    const std::vector<int> predicted = read_int_column(predicted_path);
    std::vector<int> truth(fused.rows(), -1);
    if (fs::exists(run_dir / "truth.csv")) truth = read_int_column(run_dir / "truth.csv");

    if (predicted.size() != fused.rows() || truth.size() != fused.rows())
        throw std::runtime_error("run artifacts disagree on sample count");

    std::FILE* f = std::fopen(out_file.string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot write " + out_file.string());
    for (std::size_t c = 0; c < fused.cols(); ++c) std::fprintf(f, "x%zu,", c);
    std::fprintf(f, "predicted,truth,is_prototype\n");
    for (std::size_t r = 0; r < fused.rows(); ++r) {
        for (std::size_t c = 0; c < fused.cols(); ++c)
            std::fprintf(f, "%.17g,", fused(r, c));
        std::fprintf(f, "%d,%d,0\n", predicted[r], truth[r]);
    }
    for (std::size_t k = 0; k < centers.rows(); ++k) {
        for (std::size_t c = 0; c < centers.cols(); ++c)
            std::fprintf(f, "%.17g,", centers(k, c));
        std::fprintf(f, "%zu,-1,1\n", k);
    }
    std::fclose(f);
    return kExitOk;
}

}  // namespace cpspan::cli

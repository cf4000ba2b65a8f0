#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpspan/cli.hpp"

namespace {

using cpspan::cli::CliConfig;
using cpspan::cli::SyntheticSpec;

void add_dataset_flags(CLI::App* cmd, CliConfig& config, SyntheticSpec& synth, bool& use_synth) {
    cmd->add_flag("--synth", use_synth, "generate the dataset in memory instead of loading CSVs");
    cmd->add_option("--n", synth.n, "synthetic: sample count");
    cmd->add_option("--v", synth.v, "synthetic: view count");
    cmd->add_option("--clusters", synth.k, "synthetic: cluster count");
    cmd->add_option("--dims", synth.dims, "synthetic: per-view feature dims")->delimiter(',');
    cmd->add_option("--separation", synth.separation, "synthetic: cluster mean radius");
    cmd->add_option("--data_seed", synth.data_seed, "synthetic: generator seed");
    cmd->add_option("--views", config.source.view_paths, "view CSV files")->delimiter(',');
    cmd->add_option("--mask", config.source.mask_path, "mask CSV file");
    cmd->add_option("--labels",
                    [&config](const std::vector<std::string>& vals) {
                        config.source.labels_path = vals.front();
                        return true;
                    },
                    "labels file, one integer per line");
}

void add_train_flags(CLI::App* cmd, cpspan::TrainConfig& train, std::string& mode_name) {
    cmd->add_option("--batch_size", train.batch_size);
    cmd->add_option("--pretrain_epochs", train.pretrain_epochs);
    cmd->add_option("--align_epochs", train.align_epochs);
    cmd->add_option("--d", train.d, "embedding dimension");
    cmd->add_option("--hidden", train.hidden, "hidden layer widths")->delimiter(',');
    cmd->add_option("--lr_pretrain", train.lr_pretrain);
    cmd->add_option("--lr_align", train.lr_align);
    cmd->add_option("--alpha", train.alpha);
    cmd->add_option("--beta", train.beta);
    cmd->add_option("--tau", train.tau, "contrastive baseline temperature");
    cmd->add_option("--rank", train.rank, "imputation neighbor rank");
    cmd->add_option("--seed", train.seed);
    cmd->add_option("--loss_mode", mode_name,
                    "cpspan | contrastive-baseline | rec-only | rec+ia | rec+pa");
    cmd->add_option("--final_kmeans_restarts", train.final_kmeans_restarts);
    cmd->add_option("--k", train.k, "cluster count override");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"incomplete multi-view clustering via cross-view sample and prototype alignment"};
    app.require_subcommand(1);

    CliConfig config;
    SyntheticSpec synth;
    bool use_synth = false;
    std::string mode_name = "cpspan";
    std::string out_dir;
    std::string run_dir;
    std::string dump_out;

    auto* generate = app.add_subcommand("generate", "write a synthetic dataset as CSV files");
    generate->add_option("--n", synth.n);
    generate->add_option("--v", synth.v);
    generate->add_option("--clusters", synth.k);
    generate->add_option("--dims", synth.dims)->delimiter(',');
    generate->add_option("--separation", synth.separation);
    generate->add_option("--data_seed", synth.data_seed);
    generate->add_option("--missing_rate", synth.missing_rate);
    generate->add_option("--out", out_dir, "output directory")->required();

    auto* run = app.add_subcommand("run", "train and evaluate over a (rate, seed) grid");
    add_dataset_flags(run, config, synth, use_synth);
    add_train_flags(run, config.train, mode_name);
    run->add_option("--missing_rates", config.missing_rates)->delimiter(',');
    run->add_option("--seeds", config.seeds)->delimiter(',');
    run->add_option("--ranks", config.ranks)->delimiter(',');
    run->add_option("--jobs", config.jobs, "parallel runs (0 = logical cores)");
    run->add_option("--out", out_dir, "output directory");

    auto* ablate = app.add_subcommand("ablate", "loss-component ablation table over rates");
    add_dataset_flags(ablate, config, synth, use_synth);
    add_train_flags(ablate, config.train, mode_name);
    ablate->add_option("--missing_rates", config.missing_rates)->delimiter(',');
    ablate->add_option("--seeds", config.seeds)->delimiter(',');
    ablate->add_option("--jobs", config.jobs);
    ablate->add_option("--out", out_dir);

    auto* sensitivity = app.add_subcommand("sensitivity", "alpha x beta ACC surface");
    add_dataset_flags(sensitivity, config, synth, use_synth);
    add_train_flags(sensitivity, config.train, mode_name);
    sensitivity->add_option("--alphas", config.alphas)->delimiter(',');
    sensitivity->add_option("--betas", config.betas)->delimiter(',');
    sensitivity->add_option("--rate", config.sensitivity_rate, "missing rate for the surface");
    sensitivity->add_option("--seeds", config.seeds)->delimiter(',');
    sensitivity->add_option("--jobs", config.jobs);
    sensitivity->add_option("--out", out_dir);

    auto* dump = app.add_subcommand("dump-embeddings",
                                    "export fused embeddings + labels + prototypes as CSV");
    dump->add_option("--run_dir", run_dir, "completed run directory")->required();
    dump->add_option("--out", dump_out, "output CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cpspan::cli::kExitOk : cpspan::cli::kExitConfigError;
    }

    try {
        if (use_synth || generate->parsed()) config.source.synthetic = synth;
        config.train.loss_mode = cpspan::loss_mode_from_string(mode_name);
        config.out_dir =
            out_dir.empty() ? cpspan::cli::default_out_root() : std::filesystem::path(out_dir);
        config.train.validate();

        if (generate->parsed()) return cpspan::cli::cmd_generate(synth, out_dir);
        if (run->parsed()) return cpspan::cli::cmd_run(config);
        if (ablate->parsed()) return cpspan::cli::cmd_ablate(config);
        if (sensitivity->parsed()) return cpspan::cli::cmd_sensitivity(config);
        if (dump->parsed()) return cpspan::cli::cmd_dump_embeddings(run_dir, dump_out);
        return cpspan::cli::kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return cpspan::cli::kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cpspan::cli::kExitRuntimeError;
    }
}

#include "cpspan/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

#include "cpspan/alignment.hpp"
#include "cpspan/errors.hpp"
#include "cpspan/rng.hpp"

namespace cpspan {

std::string to_string(LossMode mode) {
    switch (mode) {
        case LossMode::Cpspan: return "cpspan";
        case LossMode::ContrastiveBaseline: return "contrastive-baseline";
        case LossMode::RecOnly: return "rec-only";
        case LossMode::RecIa: return "rec+ia";
        case LossMode::RecPa: return "rec+pa";
    }
    throw std::logic_error("unknown loss mode");
}

LossMode loss_mode_from_string(const std::string& name) {
    if (name == "cpspan") return LossMode::Cpspan;
    if (name == "contrastive-baseline") return LossMode::ContrastiveBaseline;
    if (name == "rec-only") return LossMode::RecOnly;
    if (name == "rec+ia") return LossMode::RecIa;
    if (name == "rec+pa") return LossMode::RecPa;
    throw std::invalid_argument("unknown loss mode '" + name + "'");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (pretrain_epochs < 0 || align_epochs < 0)
        throw std::invalid_argument("config: epoch counts must be >= 0");
    if (d < 1) throw std::invalid_argument("config: embedding dimension must be >= 1");
    if (lr_pretrain <= 0.0 || lr_align <= 0.0)
        throw std::invalid_argument("config: learning rates must be positive");
    if (alpha < 0.0 || beta < 0.0)
        throw std::invalid_argument("config: loss coefficients must be >= 0");
    if (tau <= 0.0) throw std::invalid_argument("config: tau must be positive");
    if (rank < 1) throw std::invalid_argument("config: imputation rank must be >= 1");
    if (final_kmeans_restarts < 1)
        throw std::invalid_argument("config: final_kmeans_restarts must be >= 1");
    if (k < 0) throw std::invalid_argument("config: k must be >= 0");
    for (std::size_t h : hidden)
        if (h < 1) throw std::invalid_argument("config: hidden widths must be >= 1");
}

int resolve_k(const MultiViewDataset& ds, const TrainConfig& config) {
    const int k = config.k > 0 ? config.k : ds.k;
    if (k < 2)
        throw std::invalid_argument(
            "cluster count unknown: dataset has no labels and config.k is unset");
    return k;
}

std::vector<ViewAutoencoder> init_models(const MultiViewDataset& ds, const TrainConfig& config) {
    std::vector<ViewAutoencoder> models;
    models.reserve(ds.view_count());
    for (std::size_t v = 0; v < ds.view_count(); ++v)
        models.push_back(make_autoencoder(static_cast<int>(v), ds.dim(v), config.hidden,
                                          config.d, config.seed));
    return models;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::mt19937_64& engine) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), engine);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

Matrix gather_view_rows(const Matrix& view, const std::vector<std::size_t>& global_rows,
                        const std::vector<std::size_t>& resample_index) {
    Matrix out(global_rows.size(), view.cols());
    for (std::size_t i = 0; i < global_rows.size(); ++i) {
        const std::size_t src = resample_index[global_rows[i]];
        for (std::size_t c = 0; c < view.cols(); ++c) out(i, c) = view(src, c);
    }
    return out;
}

std::vector<const Matrix*> collect_grads(const Tape& tape, const BoundAutoencoder& bound) {
    std::vector<const Matrix*> grads;
    grads.reserve(bound.params.size());
    for (Tape::Var var : bound.params) grads.push_back(&tape.grad(var));
    return grads;
}

double scalar(const Tape& tape, Tape::Var var) { return tape.value(var)(0, 0); }

struct EpochPrototypes {
    std::vector<Matrix> centers;                           // per view, K x d
    std::vector<std::vector<int>> cluster_of;              // per view, global row -> cluster or -1
    std::vector<std::vector<std::size_t>> cluster_size;    // per view, K
    std::vector<Matrix> stale_cluster_sum;                 // per view, K x d sums of member embeddings
    std::vector<Matrix> full_embeddings;                   // per view, N x d (zeros where missing)
};

// Full-view embeddings and per-view k-means, warm-started from the previous
// epoch's centers so cluster identities stay put.
EpochPrototypes refresh_prototypes(const MultiViewDataset& ds,
                                   const std::vector<ViewAutoencoder>& models, int k,
                                   const TrainConfig& config,
                                   const std::vector<Matrix>* previous_centers) {
    EpochPrototypes out;
    const std::size_t n = ds.sample_count();
    for (std::size_t v = 0; v < ds.view_count(); ++v) {
        const auto observed = ds.observed_rows(v);
        if (observed.size() < static_cast<std::size_t>(k))
            throw std::invalid_argument("view " + std::to_string(v) + " has only " +
                                        std::to_string(observed.size()) +
                                        " observed samples for k=" + std::to_string(k));
        Matrix obs(observed.size(), ds.dim(v));
        for (std::size_t i = 0; i < observed.size(); ++i)
            for (std::size_t c = 0; c < ds.dim(v); ++c) obs(i, c) = ds.views[v](observed[i], c);
        const Matrix embedded = encode(models[v], obs);

        PrototypeSet proto = previous_centers
                                 ? lloyd_from(embedded, (*previous_centers)[v])
                                 : kmeans(embedded, k, derive_seed(config.seed,
                                                                   rng_salt::kmeans_seed, v));

        Matrix full(n, embedded.cols());
        std::vector<int> cluster_of(n, -1);
        std::vector<std::size_t> sizes(k, 0);
        Matrix sums(k, embedded.cols());
        for (std::size_t i = 0; i < observed.size(); ++i) {
            const std::size_t row = observed[i];
            const int cluster = proto.assignments[i];
            cluster_of[row] = cluster;
            ++sizes[cluster];
            for (std::size_t c = 0; c < embedded.cols(); ++c) {
                full(row, c) = embedded(i, c);
                sums(cluster, c) += embedded(i, c);
            }
        }
        out.centers.push_back(std::move(proto.centers));
        out.cluster_of.push_back(std::move(cluster_of));
        out.cluster_size.push_back(std::move(sizes));
        out.stale_cluster_sum.push_back(std::move(sums));
        out.full_embeddings.push_back(std::move(full));
    }
    return out;
}

}  // namespace

void pretrain(const MultiViewDataset& ds, std::vector<ViewAutoencoder>& models,
              const TrainConfig& config, LossCurves& curves) {
    const std::size_t n = ds.sample_count();
    std::vector<AdamState> optim;
    for (auto& model : models)
        optim.emplace_back(parameters(model), AdamConfig{.lr = config.lr_pretrain});

    for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        std::vector<std::vector<std::size_t>> resample;
        for (std::size_t v = 0; v < ds.view_count(); ++v)
            resample.push_back(resample_complete(
                ds, v, derive_seed(config.seed, rng_salt::pretrain_resample, epoch)));

        auto engine = make_engine(config.seed, rng_salt::pretrain_shuffle, epoch);
        const auto batches = make_batches(n, config.batch_size, engine);

        double epoch_rec = 0.0;
        for (const auto& batch : batches) {
            for (std::size_t v = 0; v < ds.view_count(); ++v) {
                Tape tape;
                BoundAutoencoder bound = bind(tape, models[v]);
                const Tape::Var x =
                    tape.constant(gather_view_rows(ds.views[v], batch, resample[v]));
                const Tape::Var recon = bound.decode(tape, bound.encode(tape, x));
                const Tape::Var loss = tape.scale(tape.sum_squares(tape.sub(x, recon)),
                                                  1.0 / static_cast<double>(batch.size()));
                tape.backward(loss);
                try {
                    optim[v].step(parameters(models[v]), collect_grads(tape, bound));
                } catch (const TrainingDivergence& e) {
                    throw TrainingDivergence(e.tensor(),
                                             "pretrain epoch " + std::to_string(epoch));
                }
                epoch_rec += scalar(tape, loss);
            }
        }
        const double rec = epoch_rec / static_cast<double>(batches.size());
        curves.rec.push_back(rec);
        if (uses_sample_alignment(config.loss_mode)) curves.ia.push_back(0.0);
        if (uses_prototype_alignment(config.loss_mode)) curves.pa.push_back(0.0);
        if (uses_contrastive(config.loss_mode)) curves.cl.push_back(0.0);
        curves.total.push_back(rec);
    }
}

std::vector<AlignmentState> align_train(const MultiViewDataset& ds,
                                        std::vector<ViewAutoencoder>& models,
                                        const TrainConfig& config, LossCurves& curves) {
    const std::size_t n = ds.sample_count();
    const std::size_t v_count = ds.view_count();
    const int k = resolve_k(ds, config);
    const bool with_ia = uses_sample_alignment(config.loss_mode);
    const bool with_pa = uses_prototype_alignment(config.loss_mode);
    const bool with_cl = uses_contrastive(config.loss_mode);

    std::vector<AdamState> optim;
    for (auto& model : models)
        optim.emplace_back(parameters(model), AdamConfig{.lr = config.lr_align});

    std::vector<AlignmentState> states;
    std::vector<Matrix> previous_centers;
    EpochPrototypes proto;

    for (int epoch = 0; epoch < config.align_epochs; ++epoch) {
        proto = refresh_prototypes(ds, models, k, config,
                                   previous_centers.empty() ? nullptr : &previous_centers);
        previous_centers = proto.centers;

        if (epoch == 0 && v_count >= 2) states = align_prototypes(proto.centers);

        std::vector<std::vector<std::size_t>> resample;
        for (std::size_t v = 0; v < v_count; ++v)
            resample.push_back(resample_complete(
                ds, v, derive_seed(config.seed, rng_salt::align_resample, epoch)));

        auto engine = make_engine(config.seed, rng_salt::align_shuffle, epoch);
        const auto batches = make_batches(n, config.batch_size, engine);

        double epoch_rec = 0.0, epoch_ia = 0.0, epoch_pa = 0.0, epoch_cl = 0.0;
        for (const auto& batch : batches) {
            const double batch_n = static_cast<double>(batch.size());
            Tape tape;
            std::vector<BoundAutoencoder> bound;
            std::vector<Tape::Var> h_batch;
            Tape::Var rec{};
            for (std::size_t v = 0; v < v_count; ++v) {
                bound.push_back(bind(tape, models[v]));
                const Tape::Var x =
                    tape.constant(gather_view_rows(ds.views[v], batch, resample[v]));
                const Tape::Var h = bound[v].encode(tape, x);
                h_batch.push_back(h);
                const Tape::Var recon = bound[v].decode(tape, h);
                const Tape::Var term =
                    tape.scale(tape.sum_squares(tape.sub(x, recon)), 1.0 / batch_n);
                rec = v == 0 ? term : tape.add(rec, term);
            }
            Tape::Var loss = rec;

            Tape::Var ia{};
            if (with_ia) {
                for (std::size_t i = 0; i < v_count; ++i) {
                    for (std::size_t j = i + 1; j < v_count; ++j) {
                        std::vector<std::size_t> positions;
                        for (std::size_t p = 0; p < batch.size(); ++p)
                            if (ds.observed(batch[p], i) && ds.observed(batch[p], j))
                                positions.push_back(p);
                        if (positions.empty()) continue;
                        const Tape::Var term = sample_alignment_term(
                            tape, tape.gather_rows(h_batch[i], positions),
                            tape.gather_rows(h_batch[j], positions));
                        ia = ia.valid() ? tape.add(ia, term) : term;
                    }
                }
                if (ia.valid()) loss = tape.add(loss, tape.scale(ia, config.alpha));
            }

            Tape::Var cl{};
            if (with_cl) {
                cl = tape.contrastive(h_batch, config.tau);
                loss = tape.add(loss, tape.scale(cl, config.alpha));
            }

            Tape::Var pa{};
            std::vector<Tape::Var> p_vars(states.size());
            if (with_pa && !states.empty()) {
                // Prototypes on tape: full-view means with epoch-frozen
                // assignments; batch members flow gradients, the rest enter
                // as constants from the epoch-start embedding pass.
                std::vector<Tape::Var> c_tape(v_count);
                for (std::size_t v = 0; v < v_count; ++v) {
                    Matrix coeff(k, batch.size());
                    Matrix constant_part = proto.stale_cluster_sum[v];
                    for (std::size_t p = 0; p < batch.size(); ++p) {
                        const std::size_t row = batch[p];
                        const int cluster = proto.cluster_of[v][row];
                        if (cluster < 0) continue;  // not observed in this view
                        const double weight =
                            1.0 / static_cast<double>(proto.cluster_size[v][cluster]);
                        coeff(cluster, p) = weight;
                        for (std::size_t c = 0; c < config.d; ++c)
                            constant_part(cluster, c) -=
                                proto.full_embeddings[v](row, c);
                    }
                    for (int cluster = 0; cluster < k; ++cluster)
                        for (std::size_t c = 0; c < config.d; ++c)
                            constant_part(cluster, c) /=
                                static_cast<double>(proto.cluster_size[v][cluster]);
                    c_tape[v] = tape.add(tape.matmul_const(coeff, h_batch[v]),
                                         tape.constant(std::move(constant_part)));
                }
                for (std::size_t s = 0; s < states.size(); ++s) {
                    p_vars[s] = tape.variable(states[s].relaxed);
                    const Tape::Var term = prototype_alignment_term(
                        tape, c_tape[states[s].view_i], c_tape[states[s].view_j], p_vars[s]);
                    pa = pa.valid() ? tape.add(pa, term) : term;
                }
                if (pa.valid()) loss = tape.add(loss, tape.scale(pa, config.beta));
            }

            tape.backward(loss);
            for (std::size_t v = 0; v < v_count; ++v) {
                try {
                    optim[v].step(parameters(models[v]), collect_grads(tape, bound[v]));
                } catch (const TrainingDivergence& e) {
                    throw TrainingDivergence(e.tensor(),
                                             "alignment epoch " + std::to_string(epoch));
                }
            }
            if (with_pa && config.beta > 0.0) {
                // the tape differentiates beta * L_pa; the surrogate trains on
                // the prototype-alignment gradient itself
                for (std::size_t s = 0; s < states.size(); ++s) {
                    if (!p_vars[s].valid()) continue;
                    add_scaled_in_place(states[s].relaxed, tape.grad(p_vars[s]),
                                        -config.lr_align / config.beta);
                    states[s].relaxed = project_to_constraints(std::move(states[s].relaxed));
                }
            }

            epoch_rec += scalar(tape, rec);
            if (with_ia && ia.valid()) epoch_ia += scalar(tape, ia);
            if (with_cl) epoch_cl += scalar(tape, cl);
            if (with_pa && pa.valid()) epoch_pa += scalar(tape, pa);
        }

        const double denom = static_cast<double>(batches.size());
        const double rec = epoch_rec / denom;
        const double ia = epoch_ia / denom;
        const double pa = epoch_pa / denom;
        const double cl = epoch_cl / denom;
        curves.rec.push_back(rec);
        if (with_ia) curves.ia.push_back(ia);
        if (with_pa) curves.pa.push_back(pa);
        if (with_cl) curves.cl.push_back(cl);
        curves.total.push_back(rec + config.alpha * ia + config.alpha * cl + config.beta * pa);
    }

    // Final hard permutations: rounding of the trained surrogate, or the exact
    // assignment on the last prototypes when the surrogate was not trained.
    if (v_count >= 2 && config.align_epochs > 0) {
        if (with_pa) {
            for (AlignmentState& state : states) state.hard = round_to_permutation(state.relaxed);
        } else {
            states = align_prototypes(proto.centers);
        }
    }
    return states;
}

EmbeddingSet embed_dataset(const MultiViewDataset& ds,
                           const std::vector<ViewAutoencoder>& models) {
    EmbeddingSet emb;
    const std::size_t n = ds.sample_count();
    emb.provenance.assign(n * ds.view_count(), Provenance::Absent);
    for (std::size_t v = 0; v < ds.view_count(); ++v) {
        const auto observed = ds.observed_rows(v);
        Matrix obs(observed.size(), ds.dim(v));
        for (std::size_t i = 0; i < observed.size(); ++i)
            for (std::size_t c = 0; c < ds.dim(v); ++c) obs(i, c) = ds.views[v](observed[i], c);
        const Matrix embedded = encode(models[v], obs);
        Matrix full(n, embedded.cols());
        for (std::size_t i = 0; i < observed.size(); ++i)
            for (std::size_t c = 0; c < embedded.cols(); ++c)
                full(observed[i], c) = embedded(i, c);
        emb.views.push_back(std::move(full));
    }
    for (std::size_t v = 0; v < ds.view_count(); ++v)
        for (std::size_t r = 0; r < n; ++r)
            if (ds.observed(r, v)) emb.at(r, v) = Provenance::Observed;
    return emb;
}

Evaluation evaluate_pipeline(const MultiViewDataset& ds,
                             const std::vector<ViewAutoencoder>& models,
                             const TrainConfig& config, int rank) {
    Evaluation eval;
    eval.embeddings = impute(embed_dataset(ds, models), all_pairs(ds), rank);
    eval.fused = fuse(eval.embeddings);

    const int k = resolve_k(ds, config);
    PrototypeSet best;
    bool have = false;
    for (int restart = 0; restart < config.final_kmeans_restarts; ++restart) {
        PrototypeSet candidate =
            kmeans(eval.fused, k, derive_seed(config.seed, rng_salt::final_kmeans, restart));
        if (!have || candidate.inertia < best.inertia) {
            best = std::move(candidate);
            have = true;
        }
    }
    eval.centers = best.centers;
    eval.predicted = best.assignments;
    if (!ds.labels.empty()) eval.metrics = evaluate_clustering(eval.predicted, ds.labels);
    return eval;
}

RunResult run(const MultiViewDataset& ds, const TrainConfig& config) {
    config.validate();
    validate(ds);
    resolve_k(ds, config);  // fail before training, not after

    const auto start = std::chrono::steady_clock::now();

    RunResult result;
    result.models = init_models(ds, config);
    pretrain(ds, result.models, config, result.report.curves);
    result.states = align_train(ds, result.models, config, result.report.curves);

    Evaluation eval = evaluate_pipeline(ds, result.models, config, config.rank);
    result.embeddings = std::move(eval.embeddings);
    result.fused = std::move(eval.fused);
    result.centers = std::move(eval.centers);
    result.predicted = std::move(eval.predicted);

    result.report.config = config;
    result.report.states = result.states;
    result.report.metrics = eval.metrics;
    result.report.neighbor_log = result.embeddings.neighbor_log;
    if (eval.metrics)
        result.report.by_rank.push_back(
            {config.rank, eval.metrics->acc, eval.metrics->nmi, eval.metrics->fmeasure});
    result.report.timing_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
    return result;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

nlohmann::json to_json(const TrainConfig& config) {
    nlohmann::json j;
    j["batch_size"] = config.batch_size;
    j["pretrain_epochs"] = config.pretrain_epochs;
    j["align_epochs"] = config.align_epochs;
    j["d"] = config.d;
    j["hidden"] = config.hidden;
    j["lr_pretrain"] = config.lr_pretrain;
    j["lr_align"] = config.lr_align;
    j["alpha"] = config.alpha;
    j["beta"] = config.beta;
    j["tau"] = config.tau;
    j["rank"] = config.rank;
    j["seed"] = config.seed;
    j["loss_mode"] = to_string(config.loss_mode);
    j["final_kmeans_restarts"] = config.final_kmeans_restarts;
    j["k"] = config.k;
    return j;
}

nlohmann::json to_json(const RunReport& report) {
    nlohmann::json j;
    j["config"] = to_json(report.config);

    nlohmann::json curves;
    curves["rec"] = report.curves.rec;
    if (!report.curves.ia.empty()) curves["ia"] = report.curves.ia;
    if (!report.curves.pa.empty()) curves["pa"] = report.curves.pa;
    if (!report.curves.cl.empty()) curves["cl"] = report.curves.cl;
    curves["total"] = report.curves.total;
    j["curves"] = std::move(curves);

    nlohmann::json perms = nlohmann::json::array();
    for (const AlignmentState& state : report.states) {
        nlohmann::json p;
        p["view_i"] = state.view_i;
        p["view_j"] = state.view_j;
        p["hard"] = matrix_to_json(state.hard);
        perms.push_back(std::move(p));
    }
    j["hard_permutations"] = std::move(perms);

    if (report.metrics) {
        nlohmann::json m;
        m["acc"] = report.metrics->acc;
        m["nmi"] = report.metrics->nmi;
        m["fmeasure"] = report.metrics->fmeasure;
        m["matching"] = report.metrics->matching;
        j["metrics"] = std::move(m);
    }

    nlohmann::json by_rank = nlohmann::json::array();
    for (const RankedScores& r : report.by_rank) {
        nlohmann::json e;
        e["rank"] = r.rank;
        e["acc"] = r.acc;
        e["nmi"] = r.nmi;
        e["fmeasure"] = r.fmeasure;
        by_rank.push_back(std::move(e));
    }
    j["by_rank"] = std::move(by_rank);

    nlohmann::json log = nlohmann::json::array();
    std::size_t imputed_cells = 0;
    for (const NeighborRecord& rec : report.neighbor_log) {
        nlohmann::json e;
        e["sample"] = rec.sample;
        e["view"] = rec.view;
        e["donor_view"] = rec.donor_view;
        e["donor_row"] = rec.donor_row;
        e["requested_rank"] = rec.requested_rank;
        e["used_rank"] = rec.used_rank;
        log.push_back(std::move(e));
        ++imputed_cells;
    }
    j["neighbor_log"] = std::move(log);
    j["neighbor_log_digest"] = {{"imputed_cells", imputed_cells}};

    j["timing_ms"] = report.timing_ms;
    return j;
}

}  // namespace cpspan

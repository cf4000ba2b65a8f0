#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpspan/matrix.hpp"
#include "cpspan/tape.hpp"

namespace cpspan {

enum class Activation : std::uint8_t { Relu = 0, Identity = 1 };

struct DenseLayer {
    Matrix weight;  // out x in
    Matrix bias;    // 1 x out
    Activation activation = Activation::Identity;
};

// Encoder/decoder pair for one view. Hidden layers use ReLU; the embedding
// and reconstruction layers are linear.
struct ViewAutoencoder {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;
    int view_id = 0;

    std::size_t input_dim() const { return encoder.front().weight.cols(); }
    std::size_t embed_dim() const { return encoder.back().weight.rows(); }
};

// Glorot-uniform weights, zero biases.
ViewAutoencoder make_autoencoder(int view_id, std::size_t input_dim,
                                 const std::vector<std::size_t>& hidden, std::size_t embed_dim,
                                 std::uint64_t seed);

// Plain (inference) forward passes.
Matrix encode(const ViewAutoencoder& ae, const Matrix& batch);
Matrix decode(const ViewAutoencoder& ae, const Matrix& embedding);

// Mean-per-sample squared reconstruction error: |batch - recon|_F^2 / B.
double reconstruction_loss(const Matrix& batch, const Matrix& recon);

// Canonical parameter enumeration; names feed divergence diagnostics and the
// binding order below.
struct ParamRef {
    std::string name;
    Matrix* tensor;
};

std::vector<ParamRef> parameters(ViewAutoencoder& ae);

// Tape-bound parameter leaves for one training step; `params` follows the
// parameters() order.
struct BoundAutoencoder {
    const ViewAutoencoder* model = nullptr;
    std::vector<Tape::Var> params;

    Tape::Var encode(Tape& tape, Tape::Var x) const;
    Tape::Var decode(Tape& tape, Tape::Var h) const;
};

BoundAutoencoder bind(Tape& tape, ViewAutoencoder& ae);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One optimizer state per parameter list. step() throws TrainingDivergence on
// a non-finite gradient or parameter, naming the tensor.
class AdamState {
public:
    AdamState(const std::vector<ParamRef>& params, AdamConfig config);

    void step(const std::vector<ParamRef>& params, const std::vector<const Matrix*>& grads);

    long step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<Matrix> first_moment_;
    std::vector<Matrix> second_moment_;
    long step_count_ = 0;
};

// Binary checkpoint; save/load round-trips parameters bit for bit.
// Layout: magic "CPAECKPT", u32 version, u32 view id, then encoder and
// decoder layer lists. Each list is a u32 count followed by, per layer,
// u32 rows / u32 cols / u32 activation and the raw row-major weight then
// bias doubles, native endianness.
void save_checkpoint(const ViewAutoencoder& ae, const std::filesystem::path& path);
ViewAutoencoder load_checkpoint(const std::filesystem::path& path);

}  // namespace cpspan

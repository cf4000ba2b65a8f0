#include "cpspan/autoencoder.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "cpspan/errors.hpp"
#include "cpspan/rng.hpp"

namespace cpspan {

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, std::mt19937_64& engine) {
    DenseLayer layer;
    layer.weight = Matrix(out, in);
    layer.bias = Matrix(1, out);
    layer.activation = act;
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (std::size_t i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = uniform(engine);
    return layer;
}

Matrix forward_layers(const std::vector<DenseLayer>& layers, const Matrix& input,
                      const char* stage) {
    if (input.cols() != layers.front().weight.cols())
        throw std::invalid_argument(std::string(stage) + ": input width " +
                                    std::to_string(input.cols()) + " does not match layer fan-in " +
                                    std::to_string(layers.front().weight.cols()));
    Matrix x = input;
    for (const DenseLayer& layer : layers) {
        Matrix y = matmul_nt(x, layer.weight);
        for (std::size_t r = 0; r < y.rows(); ++r)
            for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += layer.bias(0, c);
        if (layer.activation == Activation::Relu)
            for (std::size_t i = 0; i < y.size(); ++i)
                if (y.data()[i] < 0.0) y.data()[i] = 0.0;
        x = std::move(y);
    }
    return x;
}

}  // namespace

ViewAutoencoder make_autoencoder(int view_id, std::size_t input_dim,
                                 const std::vector<std::size_t>& hidden, std::size_t embed_dim,
                                 std::uint64_t seed) {
    if (input_dim == 0 || embed_dim == 0)
        throw std::invalid_argument("make_autoencoder: zero layer width");
    ViewAutoencoder ae;
    ae.view_id = view_id;

    auto engine = make_engine(seed, rng_salt::init, static_cast<std::uint64_t>(view_id));

    std::vector<std::size_t> widths;
    widths.push_back(input_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(embed_dim);

    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        ae.encoder.push_back(make_layer(widths[i], widths[i + 1],
                                        last ? Activation::Identity : Activation::Relu, engine));
    }
    for (std::size_t i = widths.size() - 1; i > 0; --i) {
        const bool last = i == 1;
        ae.decoder.push_back(make_layer(widths[i], widths[i - 1],
                                        last ? Activation::Identity : Activation::Relu, engine));
    }
    return ae;
}

Matrix encode(const ViewAutoencoder& ae, const Matrix& batch) {
    if (!batch.all_finite()) throw std::invalid_argument("encode: non-finite input");
    return forward_layers(ae.encoder, batch, "encode");
}

Matrix decode(const ViewAutoencoder& ae, const Matrix& embedding) {
    if (!embedding.all_finite()) throw std::invalid_argument("decode: non-finite input");
    return forward_layers(ae.decoder, embedding, "decode");
}

double reconstruction_loss(const Matrix& batch, const Matrix& recon) {
    if (!batch.same_shape(recon))
        throw std::invalid_argument("reconstruction_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double diff = batch.data()[i] - recon.data()[i];
        acc += diff * diff;
    }
    return acc / static_cast<double>(batch.rows());
}

std::vector<ParamRef> parameters(ViewAutoencoder& ae) {
    std::vector<ParamRef> refs;
    const std::string prefix = "view" + std::to_string(ae.view_id) + "/";
    for (std::size_t i = 0; i < ae.encoder.size(); ++i) {
        refs.push_back({prefix + "enc" + std::to_string(i) + ".weight", &ae.encoder[i].weight});
        refs.push_back({prefix + "enc" + std::to_string(i) + ".bias", &ae.encoder[i].bias});
    }
    for (std::size_t i = 0; i < ae.decoder.size(); ++i) {
        refs.push_back({prefix + "dec" + std::to_string(i) + ".weight", &ae.decoder[i].weight});
        refs.push_back({prefix + "dec" + std::to_string(i) + ".bias", &ae.decoder[i].bias});
    }
    return refs;
}

namespace {

Tape::Var forward_bound(Tape& tape, const std::vector<DenseLayer>& layers,
                        const std::vector<Tape::Var>& params, std::size_t param_offset,
                        Tape::Var x) {
    Tape::Var h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Tape::Var w = params[param_offset + 2 * i];
        const Tape::Var b = params[param_offset + 2 * i + 1];
        h = tape.affine(h, w, b);
        if (layers[i].activation == Activation::Relu) h = tape.relu(h);
    }
    return h;
}

}  // namespace

Tape::Var BoundAutoencoder::encode(Tape& tape, Tape::Var x) const {
    return forward_bound(tape, model->encoder, params, 0, x);
}

Tape::Var BoundAutoencoder::decode(Tape& tape, Tape::Var h) const {
    return forward_bound(tape, model->decoder, params, 2 * model->encoder.size(), h);
}

BoundAutoencoder bind(Tape& tape, ViewAutoencoder& ae) {
    BoundAutoencoder bound;
    bound.model = &ae;
    for (const ParamRef& ref : parameters(ae)) bound.params.push_back(tape.variable(*ref.tensor));
    return bound;
}

AdamState::AdamState(const std::vector<ParamRef>& params, AdamConfig config) : config_(config) {
    for (const ParamRef& ref : params) {
        first_moment_.emplace_back(ref.tensor->rows(), ref.tensor->cols());
        second_moment_.emplace_back(ref.tensor->rows(), ref.tensor->cols());
    }
}

void AdamState::step(const std::vector<ParamRef>& params,
                     const std::vector<const Matrix*>& grads) {
    if (params.size() != first_moment_.size() || grads.size() != params.size())
        throw std::invalid_argument("AdamState::step: parameter list does not match state");

    for (std::size_t p = 0; p < params.size(); ++p)
        if (!grads[p]->all_finite())
            throw TrainingDivergence(params[p].name, "non-finite gradient");

    ++step_count_;
    const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));

    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& theta = *params[p].tensor;
        const Matrix& g = *grads[p];
        Matrix& m = first_moment_[p];
        Matrix& v = second_moment_[p];
        if (!theta.same_shape(g))
            throw std::invalid_argument("AdamState::step: gradient shape mismatch at " +
                                        params[p].name);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m.data()[i] = config_.beta1 * m.data()[i] + (1.0 - config_.beta1) * g.data()[i];
            v.data()[i] =
                config_.beta2 * v.data()[i] + (1.0 - config_.beta2) * g.data()[i] * g.data()[i];
            const double m_hat = m.data()[i] / bias1;
            const double v_hat = v.data()[i] / bias2;
            theta.data()[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
        if (!theta.all_finite())
            throw TrainingDivergence(params[p].name, "non-finite parameter after update");
    }
}

namespace {

constexpr char kMagic[8] = {'C', 'P', 'A', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, sizeof(v), 1, f); }

std::uint32_t read_u32(std::FILE* f, const std::filesystem::path& path) {
    std::uint32_t v = 0;
    if (std::fread(&v, sizeof(v), 1, f) != 1)
        throw std::runtime_error("checkpoint truncated: " + path.string());
    return v;
}

void write_layers(std::FILE* f, const std::vector<DenseLayer>& layers) {
    write_u32(f, static_cast<std::uint32_t>(layers.size()));
    for (const DenseLayer& layer : layers) {
        write_u32(f, static_cast<std::uint32_t>(layer.weight.rows()));
        write_u32(f, static_cast<std::uint32_t>(layer.weight.cols()));
        write_u32(f, static_cast<std::uint32_t>(layer.activation));
        std::fwrite(layer.weight.data(), sizeof(double), layer.weight.size(), f);
        std::fwrite(layer.bias.data(), sizeof(double), layer.bias.size(), f);
    }
}

std::vector<DenseLayer> read_layers(std::FILE* f, const std::filesystem::path& path) {
    std::vector<DenseLayer> layers(read_u32(f, path));
    for (DenseLayer& layer : layers) {
        const std::uint32_t rows = read_u32(f, path);
        const std::uint32_t cols = read_u32(f, path);
        const std::uint32_t act = read_u32(f, path);
        if (act > 1) throw std::runtime_error("checkpoint has unknown activation: " + path.string());
        layer.activation = static_cast<Activation>(act);
        layer.weight = Matrix(rows, cols);
        layer.bias = Matrix(1, rows);
        if (std::fread(layer.weight.data(), sizeof(double), layer.weight.size(), f) !=
                layer.weight.size() ||
            std::fread(layer.bias.data(), sizeof(double), layer.bias.size(), f) !=
                layer.bias.size())
            throw std::runtime_error("checkpoint truncated: " + path.string());
    }
    return layers;
}

}  // namespace

void save_checkpoint(const ViewAutoencoder& ae, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
    std::fwrite(kMagic, 1, sizeof(kMagic), f);
    write_u32(f, kVersion);
    write_u32(f, static_cast<std::uint32_t>(ae.view_id));
    write_layers(f, ae.encoder);
    write_layers(f, ae.decoder);
    std::fclose(f);
}

ViewAutoencoder load_checkpoint(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[8];
    if (std::fread(magic, 1, sizeof(magic), f) != sizeof(magic) ||
        std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        std::fclose(f);
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    ViewAutoencoder ae;
    try {
        const std::uint32_t version = read_u32(f, path);
        if (version != kVersion)
            throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
        ae.view_id = static_cast<int>(read_u32(f, path));
        ae.encoder = read_layers(f, path);
        ae.decoder = read_layers(f, path);
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return ae;
}

}  // namespace cpspan

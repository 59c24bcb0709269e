#include "nodenet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nodenet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr std::uint32_t kMagic = 0x4B434E4E;  // "NNCK"
constexpr std::uint32_t kVersion = 1;

template <typename P>
void write_pod(std::ostream& out, const P& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(P));
}

template <typename P>
P read_pod(std::istream& in) {
    P value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(P));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return value;
}

template <typename T>
void write_vector(std::ostream& out, const std::vector<T>& v) {
    write_pod<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_vector(std::istream& in) {
    const auto count = read_pod<std::uint64_t>(in);
    std::vector<T> v(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
    return v;
}

template <typename T>
void write_matrix(std::ostream& out, const Matrix<T>& m) {
    write_pod<std::uint64_t>(out, m.rows());
    write_pod<std::uint64_t>(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(T)));
}

template <typename T>
Matrix<T> read_matrix(std::istream& in) {
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    Matrix<T> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(T)));
    if (!in) throw std::runtime_error("checkpoint: truncated matrix data");
    return m;
}

void write_config(std::ostream& out, const NetworkConfig& cfg) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.layer_widths.size()));
    for (int w : cfg.layer_widths) write_pod<std::int32_t>(out, w);
    write_pod<double>(out, cfg.dropout_rate);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.batchnorm.size()));
    for (bool b : cfg.batchnorm) write_pod<std::uint8_t>(out, b ? 1 : 0);
    write_pod<double>(out, cfg.bn_epsilon);
    write_pod<double>(out, cfg.bn_momentum);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.activation));
    write_pod<std::int32_t>(out, cfg.latent_layer);
}

NetworkConfig read_config(std::istream& in) {
    NetworkConfig cfg;
    const auto widths = read_pod<std::uint32_t>(in);
    cfg.layer_widths.resize(widths);
    for (auto& w : cfg.layer_widths) w = read_pod<std::int32_t>(in);
    cfg.dropout_rate = read_pod<double>(in);
    const auto flags = read_pod<std::uint32_t>(in);
    cfg.batchnorm.resize(flags);
    for (std::uint32_t i = 0; i < flags; ++i) cfg.batchnorm[i] = read_pod<std::uint8_t>(in) != 0;
    cfg.bn_epsilon = read_pod<double>(in);
    cfg.bn_momentum = read_pod<double>(in);
    cfg.activation = static_cast<Activation>(read_pod<std::uint32_t>(in));
    cfg.latent_layer = read_pod<std::int32_t>(in);
    return cfg;
}

} // namespace

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    write_pod(out, kMagic);
    write_pod(out, kVersion);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(sizeof(T)));
    write_pod<std::uint64_t>(out, ckpt.seed);
    write_config(out, ckpt.config);

    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.layers.size()));
    for (const auto& layer : ckpt.params.layers) {
        write_matrix(out, layer.weight);
        write_vector(out, layer.bias);
    }
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.batchnorm.size()));
    for (const auto& bn : ckpt.params.batchnorm) {
        write_pod<std::uint8_t>(out, bn.enabled() ? 1 : 0);
        if (!bn.enabled()) continue;
        write_vector(out, bn.gamma);
        write_vector(out, bn.beta);
        write_vector(out, bn.running_mean);
        write_vector(out, bn.running_var);
    }

    write_pod<std::uint8_t>(out, ckpt.optimizer.has_value() ? 1 : 0);
    if (ckpt.optimizer) {
        const auto& opt = *ckpt.optimizer;
        write_pod<std::int64_t>(out, opt.step);
        for (std::size_t l = 0; l < opt.m_weight.size(); ++l) {
            write_matrix(out, opt.m_weight[l]);
            write_matrix(out, opt.v_weight[l]);
            write_vector(out, opt.m_bias[l]);
            write_vector(out, opt.v_bias[l]);
        }
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(opt.m_gamma.size()));
        for (std::size_t l = 0; l < opt.m_gamma.size(); ++l) {
            write_vector(out, opt.m_gamma[l]);
            write_vector(out, opt.v_gamma[l]);
            write_vector(out, opt.m_beta[l]);
            write_vector(out, opt.v_beta[l]);
        }
    }
    write_pod<std::int32_t>(out, ckpt.epoch);
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    if (read_pod<std::uint32_t>(in) != kMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    if (read_pod<std::uint32_t>(in) != kVersion)
        throw std::runtime_error("checkpoint: unsupported version in " + path);
    if (read_pod<std::uint32_t>(in) != sizeof(T))
        throw std::runtime_error("checkpoint: scalar width mismatch in " + path);

    Checkpoint<T> ckpt;
    ckpt.seed = read_pod<std::uint64_t>(in);
    ckpt.config = read_config(in);

    const auto layers = read_pod<std::uint32_t>(in);
    ckpt.params.layers.resize(layers);
    for (auto& layer : ckpt.params.layers) {
        layer.weight = read_matrix<T>(in);
        layer.bias = read_vector<T>(in);
    }
    const auto bns = read_pod<std::uint32_t>(in);
    ckpt.params.batchnorm.resize(bns);
    for (auto& bn : ckpt.params.batchnorm) {
        if (read_pod<std::uint8_t>(in) == 0) continue;
        bn.gamma = read_vector<T>(in);
        bn.beta = read_vector<T>(in);
        bn.running_mean = read_vector<T>(in);
        bn.running_var = read_vector<T>(in);
    }

    if (read_pod<std::uint8_t>(in) != 0) {
        AdamState<T> opt;
        opt.step = read_pod<std::int64_t>(in);
        opt.m_weight.resize(layers);
        opt.v_weight.resize(layers);
        opt.m_bias.resize(layers);
        opt.v_bias.resize(layers);
        for (std::uint32_t l = 0; l < layers; ++l) {
            opt.m_weight[l] = read_matrix<T>(in);
            opt.v_weight[l] = read_matrix<T>(in);
            opt.m_bias[l] = read_vector<T>(in);
            opt.v_bias[l] = read_vector<T>(in);
        }
        const auto bn_states = read_pod<std::uint32_t>(in);
        opt.m_gamma.resize(bn_states);
        opt.v_gamma.resize(bn_states);
        opt.m_beta.resize(bn_states);
        opt.v_beta.resize(bn_states);
        for (std::uint32_t l = 0; l < bn_states; ++l) {
            opt.m_gamma[l] = read_vector<T>(in);
            opt.v_gamma[l] = read_vector<T>(in);
            opt.m_beta[l] = read_vector<T>(in);
            opt.v_beta[l] = read_vector<T>(in);
        }
        ckpt.optimizer = std::move(opt);
    }
    ckpt.epoch = read_pod<std::int32_t>(in);
    return ckpt;
}

int checkpoint_scalar_width(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    if (read_pod<std::uint32_t>(in) != kMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    read_pod<std::uint32_t>(in);  // version
    return static_cast<int>(read_pod<std::uint32_t>(in));
}

template void save_checkpoint<double>(const Checkpoint<double>&, const std::string&);
template void save_checkpoint<float>(const Checkpoint<float>&, const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);
template Checkpoint<float> load_checkpoint<float>(const std::string&);

} // namespace nodenet

#include "nodenet/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nodenet {

void NetworkConfig::validate() const {
    if (layer_widths.size() < 2)
        throw std::invalid_argument("net: layer_widths needs at least input and output");
    for (int w : layer_widths)
        if (w <= 0) throw std::invalid_argument("net: layer widths must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("net: dropout_rate must lie in [0, 1)");
    if (!batchnorm.empty() && static_cast<int>(batchnorm.size()) != num_hidden())
        throw std::invalid_argument("net: batchnorm flags must match hidden layer count");
    if (bn_epsilon <= 0.0) throw std::invalid_argument("net: bn_epsilon must be positive");
    if (bn_momentum <= 0.0 || bn_momentum >= 1.0)
        throw std::invalid_argument("net: bn_momentum must lie in (0, 1)");
    if (num_hidden() > 0 && (latent_layer < 0 || latent_layer >= num_hidden()))
        throw std::invalid_argument("net: latent_layer out of range");
}

NetworkConfig NetworkConfig::dense(int input_width, const std::vector<int>& hidden, int num_classes,
                                   double dropout_rate, bool batchnorm_all) {
    NetworkConfig cfg;
    cfg.layer_widths.push_back(input_width);
    cfg.layer_widths.insert(cfg.layer_widths.end(), hidden.begin(), hidden.end());
    cfg.layer_widths.push_back(num_classes);
    cfg.dropout_rate = dropout_rate;
    cfg.batchnorm.assign(hidden.size(), batchnorm_all);
    cfg.latent_layer = std::max(0, static_cast<int>(hidden.size()) - 1);
    cfg.validate();
    return cfg;
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "relu";
}

namespace {

bool bn_enabled(const NetworkConfig& config, std::size_t hidden_layer) {
    return !config.batchnorm.empty() && config.batchnorm[hidden_layer];
}

template <typename T>
void add_bias_rows(Matrix<T>& m, const std::vector<T>& bias) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        T* row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) row[j] += bias[j];
    }
}

template <typename T>
std::vector<T> column_sums(const Matrix<T>& m) {
    std::vector<T> sums(m.cols(), T(0));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const T* row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) sums[j] += row[j];
    }
    return sums;
}

template <typename T>
void apply_activation(Activation act, const Matrix<T>& in, Matrix<T>& out) {
    out = Matrix<T>(in.rows(), in.cols());
    switch (act) {
        case Activation::Relu:
            for (std::size_t i = 0; i < in.size(); ++i)
                out.data()[i] = in.data()[i] > T(0) ? in.data()[i] : T(0);
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < in.size(); ++i) out.data()[i] = std::tanh(in.data()[i]);
            break;
        case Activation::Identity:
            out = in;
            break;
    }
}

} // namespace

template <typename T>
ParameterGradients<T> ParameterGradients<T>::zeros_like(const NetworkParameters<T>& params) {
    ParameterGradients<T> g;
    for (const auto& layer : params.layers) {
        g.weight.emplace_back(layer.weight.rows(), layer.weight.cols());
        g.bias.emplace_back(layer.bias.size(), T(0));
    }
    for (const auto& bn : params.batchnorm) {
        g.gamma.emplace_back(bn.gamma.size(), T(0));
        g.beta.emplace_back(bn.beta.size(), T(0));
    }
    return g;
}

template <typename T>
NetworkParameters<T> init_params(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng = Rng::derive(seed, 0x1A17);
    NetworkParameters<T> params;
    const int layers = config.num_layers();
    for (int l = 0; l < layers; ++l) {
        const auto in = static_cast<std::size_t>(config.layer_widths[static_cast<std::size_t>(l)]);
        const auto out = static_cast<std::size_t>(config.layer_widths[static_cast<std::size_t>(l) + 1]);
        DenseLayer<T> layer;
        layer.weight = Matrix<T>(in, out);
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
        layer.bias.assign(out, T(0));
        params.layers.push_back(std::move(layer));
    }
    params.batchnorm.resize(static_cast<std::size_t>(config.num_hidden()));
    for (int l = 0; l < config.num_hidden(); ++l) {
        if (!bn_enabled(config, static_cast<std::size_t>(l))) continue;
        auto& bn = params.batchnorm[static_cast<std::size_t>(l)];
        const auto width = static_cast<std::size_t>(config.layer_widths[static_cast<std::size_t>(l) + 1]);
        bn.gamma.assign(width, T(1));
        bn.beta.assign(width, T(0));
        bn.running_mean.assign(width, T(0));
        bn.running_var.assign(width, T(1));
    }
    return params;
}

template <typename T>
ForwardTrace<T> forward(const NetworkParameters<T>& params, const NetworkConfig& config,
                        const Matrix<T>& inputs, Mode mode, Rng* rng) {
    config.validate();
    if (static_cast<int>(inputs.cols()) != config.input_width())
        throw std::invalid_argument("forward: input width does not match config");
    const bool training = mode == Mode::Train;
    const bool use_dropout = training && config.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr)
        throw std::invalid_argument("forward: train-mode dropout requires an rng");

    const std::size_t batch = inputs.rows();
    const std::size_t hidden_count = static_cast<std::size_t>(config.num_hidden());

    ForwardTrace<T> trace;
    trace.mode = mode;
    trace.input = inputs;
    trace.hidden.resize(hidden_count);

    const T keep = static_cast<T>(1.0 - config.dropout_rate);

    for (std::size_t l = 0; l < hidden_count; ++l) {
        auto& cache = trace.hidden[l];
        const Matrix<T>& in = trace.layer_input(l);
        cache.affine = matmul(in, params.layers[l].weight);
        add_bias_rows(cache.affine, params.layers[l].bias);
        const std::size_t width = cache.affine.cols();

        if (bn_enabled(config, l)) {
            const auto& bn = params.batchnorm[l];
            if (training) {
                if (batch < 2)
                    throw std::invalid_argument(
                        "forward: train-mode batch norm needs batch size >= 2");
                cache.bn_mean.assign(width, T(0));
                cache.bn_inv_std.assign(width, T(0));
                std::vector<T> var(width, T(0));
                for (std::size_t i = 0; i < batch; ++i) {
                    const T* row = cache.affine.row(i);
                    for (std::size_t j = 0; j < width; ++j) cache.bn_mean[j] += row[j];
                }
                const T inv_batch = T(1) / static_cast<T>(batch);
                for (std::size_t j = 0; j < width; ++j) cache.bn_mean[j] *= inv_batch;
                for (std::size_t i = 0; i < batch; ++i) {
                    const T* row = cache.affine.row(i);
                    for (std::size_t j = 0; j < width; ++j) {
                        const T d = row[j] - cache.bn_mean[j];
                        var[j] += d * d;
                    }
                }
                for (std::size_t j = 0; j < width; ++j) {
                    var[j] *= inv_batch;  // biased batch variance
                    cache.bn_inv_std[j] = T(1) / std::sqrt(var[j] + static_cast<T>(config.bn_epsilon));
                }
                cache.bn_xhat = Matrix<T>(batch, width);
                cache.pre_activation = Matrix<T>(batch, width);
                for (std::size_t i = 0; i < batch; ++i) {
                    const T* z = cache.affine.row(i);
                    T* xh = cache.bn_xhat.row(i);
                    T* pre = cache.pre_activation.row(i);
                    for (std::size_t j = 0; j < width; ++j) {
                        xh[j] = (z[j] - cache.bn_mean[j]) * cache.bn_inv_std[j];
                        pre[j] = bn.gamma[j] * xh[j] + bn.beta[j];
                    }
                }
                const T momentum = static_cast<T>(config.bn_momentum);
                cache.new_running_mean.resize(width);
                cache.new_running_var.resize(width);
                for (std::size_t j = 0; j < width; ++j) {
                    cache.new_running_mean[j] =
                        momentum * bn.running_mean[j] + (T(1) - momentum) * cache.bn_mean[j];
                    cache.new_running_var[j] =
                        momentum * bn.running_var[j] + (T(1) - momentum) * var[j];
                }
            } else {
                cache.pre_activation = Matrix<T>(batch, width);
                for (std::size_t i = 0; i < batch; ++i) {
                    const T* z = cache.affine.row(i);
                    T* pre = cache.pre_activation.row(i);
                    for (std::size_t j = 0; j < width; ++j) {
                        const T inv = T(1) / std::sqrt(bn.running_var[j] +
                                                       static_cast<T>(config.bn_epsilon));
                        pre[j] = bn.gamma[j] * (z[j] - bn.running_mean[j]) * inv + bn.beta[j];
                    }
                }
            }
        } else {
            cache.pre_activation = cache.affine;
        }

        apply_activation(config.activation, cache.pre_activation, cache.activated);

        if (static_cast<int>(l) == config.latent_layer) trace.latent = cache.activated;

        if (use_dropout) {
            cache.dropout_mask = Matrix<T>(batch, cache.activated.cols());
            cache.output = Matrix<T>(batch, cache.activated.cols());
            const T scale = T(1) / keep;
            for (std::size_t i = 0; i < cache.dropout_mask.size(); ++i) {
                const T m = rng->bernoulli(static_cast<double>(keep)) ? T(1) : T(0);
                cache.dropout_mask.data()[i] = m;
                cache.output.data()[i] = cache.activated.data()[i] * m * scale;
            }
        } else {
            cache.output = cache.activated;
        }
    }

    const std::size_t out_layer = static_cast<std::size_t>(config.num_layers()) - 1;
    trace.logits = matmul(trace.layer_input(out_layer), params.layers[out_layer].weight);
    add_bias_rows(trace.logits, params.layers[out_layer].bias);

    // Stable softmax.
    trace.probabilities = Matrix<T>(batch, trace.logits.cols());
    for (std::size_t i = 0; i < batch; ++i) {
        const T* z = trace.logits.row(i);
        T* p = trace.probabilities.row(i);
        T mx = z[0];
        for (std::size_t j = 1; j < trace.logits.cols(); ++j) mx = std::max(mx, z[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < trace.logits.cols(); ++j) {
            p[j] = std::exp(z[j] - mx);
            sum += p[j];
        }
        const T inv = T(1) / sum;
        for (std::size_t j = 0; j < trace.logits.cols(); ++j) p[j] *= inv;
    }
    return trace;
}

template <typename T>
ParameterGradients<T> backward(const ForwardTrace<T>& trace, const NetworkParameters<T>& params,
                               const NetworkConfig& config, const Matrix<T>& grad_logits,
                               const Matrix<T>& grad_latent) {
    if (trace.mode != Mode::Train)
        throw std::invalid_argument("backward: trace must come from a train-mode forward pass");
    const std::size_t batch = trace.input.rows();
    if (!grad_logits.empty() &&
        (grad_logits.rows() != batch || grad_logits.cols() != trace.logits.cols()))
        throw std::invalid_argument("backward: grad_logits shape mismatch");
    if (!grad_latent.empty() &&
        (grad_latent.rows() != batch || grad_latent.cols() != trace.latent.cols()))
        throw std::invalid_argument("backward: grad_latent shape mismatch");

    auto grads = ParameterGradients<T>::zeros_like(params);
    const std::size_t out_layer = static_cast<std::size_t>(config.num_layers()) - 1;

    // Output affine.
    Matrix<T> upstream;  // gradient w.r.t. the current layer's output
    {
        Matrix<T> zero_logits;
        const Matrix<T>* d_logits = &grad_logits;
        if (grad_logits.empty()) {
            zero_logits = Matrix<T>(batch, trace.logits.cols());
            d_logits = &zero_logits;
        }
        const Matrix<T>& in = trace.layer_input(out_layer);
        grads.weight[out_layer] = matmul(in, *d_logits, /*transpose_a=*/true);
        grads.bias[out_layer] = column_sums(*d_logits);
        if (config.num_hidden() > 0)
            upstream = matmul(*d_logits, params.layers[out_layer].weight, false, /*transpose_b=*/true);
    }

    const T keep = static_cast<T>(1.0 - config.dropout_rate);

    for (int l = config.num_hidden() - 1; l >= 0; --l) {
        const auto& cache = trace.hidden[static_cast<std::size_t>(l)];
        const std::size_t width = cache.pre_activation.cols();

        // Dropout backward.
        Matrix<T> d_act(batch, width);
        if (!cache.dropout_mask.empty()) {
            const T scale = T(1) / keep;
            for (std::size_t i = 0; i < d_act.size(); ++i)
                d_act.data()[i] = upstream.data()[i] * cache.dropout_mask.data()[i] * scale;
        } else {
            d_act = upstream;
        }

        // The latent is read after activation, before dropout.
        if (l == config.latent_layer && !grad_latent.empty())
            for (std::size_t i = 0; i < d_act.size(); ++i) d_act.data()[i] += grad_latent.data()[i];

        // Activation backward.
        Matrix<T> d_pre(batch, width);
        switch (config.activation) {
            case Activation::Relu:
                for (std::size_t i = 0; i < d_pre.size(); ++i)
                    d_pre.data()[i] =
                        cache.pre_activation.data()[i] > T(0) ? d_act.data()[i] : T(0);
                break;
            case Activation::Tanh:
                for (std::size_t i = 0; i < d_pre.size(); ++i) {
                    const T a = cache.activated.data()[i];
                    d_pre.data()[i] = d_act.data()[i] * (T(1) - a * a);
                }
                break;
            case Activation::Identity:
                d_pre = d_act;
                break;
        }

        // Batch norm backward through the batch statistics.
        Matrix<T> d_affine;
        if (bn_enabled(config, static_cast<std::size_t>(l))) {
            const auto& bn = params.batchnorm[static_cast<std::size_t>(l)];
            auto& d_gamma = grads.gamma[static_cast<std::size_t>(l)];
            auto& d_beta = grads.beta[static_cast<std::size_t>(l)];
            std::vector<T> sum_dxhat(width, T(0));
            std::vector<T> sum_dxhat_xhat(width, T(0));
            Matrix<T> d_xhat(batch, width);
            for (std::size_t i = 0; i < batch; ++i) {
                const T* dp = d_pre.row(i);
                const T* xh = cache.bn_xhat.row(i);
                T* dx = d_xhat.row(i);
                for (std::size_t j = 0; j < width; ++j) {
                    d_gamma[j] += dp[j] * xh[j];
                    d_beta[j] += dp[j];
                    dx[j] = dp[j] * bn.gamma[j];
                    sum_dxhat[j] += dx[j];
                    sum_dxhat_xhat[j] += dx[j] * xh[j];
                }
            }
            d_affine = Matrix<T>(batch, width);
            const T inv_batch = T(1) / static_cast<T>(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                const T* dx = d_xhat.row(i);
                const T* xh = cache.bn_xhat.row(i);
                T* da = d_affine.row(i);
                for (std::size_t j = 0; j < width; ++j)
                    da[j] = cache.bn_inv_std[j] * inv_batch *
                            (static_cast<T>(batch) * dx[j] - sum_dxhat[j] -
                             xh[j] * sum_dxhat_xhat[j]);
            }
        } else {
            d_affine = std::move(d_pre);
        }

        const Matrix<T>& in = trace.layer_input(static_cast<std::size_t>(l));
        grads.weight[static_cast<std::size_t>(l)] = matmul(in, d_affine, /*transpose_a=*/true);
        grads.bias[static_cast<std::size_t>(l)] = column_sums(d_affine);
        if (l > 0)
            upstream = matmul(d_affine, params.layers[static_cast<std::size_t>(l)].weight, false,
                              /*transpose_b=*/true);
    }
    return grads;
}

template <typename T>
std::pair<T, Matrix<T>> softmax_cross_entropy(const Matrix<T>& logits,
                                              const std::vector<int>& labels) {
    const std::size_t batch = logits.rows();
    const std::size_t k = logits.cols();
    if (batch == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
    if (labels.size() != batch)
        throw std::invalid_argument("softmax_cross_entropy: label count != batch size");

    Matrix<T> grad(batch, k);
    T loss = T(0);
    const T inv_batch = T(1) / static_cast<T>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        const T* z = logits.row(i);
        T mx = z[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
        const T log_sum = mx + std::log(sum);
        loss += (log_sum - z[static_cast<std::size_t>(label)]) * inv_batch;
        T* g = grad.row(i);
        for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(z[j] - log_sum) * inv_batch;
        g[static_cast<std::size_t>(label)] -= inv_batch;
    }
    return {loss, std::move(grad)};
}

template <typename T>
std::vector<int> predict(const NetworkParameters<T>& params, const NetworkConfig& config,
                         const Matrix<T>& inputs) {
    ForwardTrace<T> trace = forward(params, config, inputs, Mode::Infer);
    std::vector<int> out(inputs.rows());
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        const T* p = trace.probabilities.row(i);
        int best = 0;
        for (std::size_t j = 1; j < trace.probabilities.cols(); ++j)
            if (p[j] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
        out[i] = best;
    }
    return out;
}

template struct ParameterGradients<double>;
template struct ParameterGradients<float>;

template NetworkParameters<double> init_params<double>(const NetworkConfig&, std::uint64_t);
template NetworkParameters<float> init_params<float>(const NetworkConfig&, std::uint64_t);

template ForwardTrace<double> forward<double>(const NetworkParameters<double>&, const NetworkConfig&,
                                              const Matrix<double>&, Mode, Rng*);
template ForwardTrace<float> forward<float>(const NetworkParameters<float>&, const NetworkConfig&,
                                            const Matrix<float>&, Mode, Rng*);

template ParameterGradients<double> backward<double>(const ForwardTrace<double>&,
                                                     const NetworkParameters<double>&,
                                                     const NetworkConfig&, const Matrix<double>&,
                                                     const Matrix<double>&);
template ParameterGradients<float> backward<float>(const ForwardTrace<float>&,
                                                   const NetworkParameters<float>&,
                                                   const NetworkConfig&, const Matrix<float>&,
                                                   const Matrix<float>&);

template std::pair<double, Matrix<double>> softmax_cross_entropy<double>(const Matrix<double>&,
                                                                         const std::vector<int>&);
template std::pair<float, Matrix<float>> softmax_cross_entropy<float>(const Matrix<float>&,
                                                                      const std::vector<int>&);

template std::vector<int> predict<double>(const NetworkParameters<double>&, const NetworkConfig&,
                                          const Matrix<double>&);
template std::vector<int> predict<float>(const NetworkParameters<float>&, const NetworkConfig&,
                                         const Matrix<float>&);

} // namespace nodenet

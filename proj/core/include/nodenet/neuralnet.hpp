#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nodenet/matrix.hpp"
#include "nodenet/rng.hpp"

namespace nodenet {

// Feedforward classifier with exact analytic forward/backward passes.
// Hidden layer order: affine -> batch norm -> activation -> dropout.
// Output layer: affine -> softmax. The latent representation used by the
// graph loss is the post-activation (pre-dropout) output of one hidden
// layer.

enum class Activation { Relu, Tanh, Identity };

struct NetworkConfig {
    std::vector<int> layer_widths;   // [f, h1, ..., hm, K]
    double dropout_rate = 0.5;
    std::vector<bool> batchnorm;     // one flag per hidden layer
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;        // running = momentum*running + (1-momentum)*batch
    Activation activation = Activation::Relu;
    int latent_layer = 0;            // hidden layer whose activation output is h_theta

    int num_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
    int num_hidden() const { return num_layers() - 1; }
    int input_width() const { return layer_widths.front(); }
    int num_classes() const { return layer_widths.back(); }
    int latent_width() const { return layer_widths[static_cast<std::size_t>(latent_layer) + 1]; }

    void validate() const;

    // Convenience builder: latent layer defaults to the last hidden layer.
    static NetworkConfig dense(int input_width, const std::vector<int>& hidden, int num_classes,
                               double dropout_rate = 0.5, bool batchnorm_all = true);
};

template <typename T>
struct DenseLayer {
    Matrix<T> weight;        // in x out
    std::vector<T> bias;     // out
};

template <typename T>
struct BatchNormLayer {
    std::vector<T> gamma;         // scale, init 1
    std::vector<T> beta;          // shift, init 0
    std::vector<T> running_mean;  // init 0
    std::vector<T> running_var;   // init 1
    bool enabled() const { return !gamma.empty(); }
};

template <typename T>
struct NetworkParameters {
    std::vector<DenseLayer<T>> layers;          // one per affine layer
    std::vector<BatchNormLayer<T>> batchnorm;   // one per hidden layer (empty when off)
};

// Gradients for every trainable tensor (running stats are state, not
// trained, so they have no slot here).
template <typename T>
struct ParameterGradients {
    std::vector<Matrix<T>> weight;
    std::vector<std::vector<T>> bias;
    std::vector<std::vector<T>> gamma;
    std::vector<std::vector<T>> beta;

    static ParameterGradients zeros_like(const NetworkParameters<T>& params);
};

enum class Mode { Train, Infer };

template <typename T>
struct ForwardTrace {
    Mode mode = Mode::Infer;
    Matrix<T> input;          // the batch this trace was built from
    Matrix<T> logits;         // batch x K
    Matrix<T> probabilities;  // batch x K, rows sum to 1
    Matrix<T> latent;         // batch x latent_width

    struct HiddenCache {
        Matrix<T> affine;            // x W + b
        std::vector<T> bn_mean;      // batch statistics (train) per feature
        std::vector<T> bn_inv_std;
        Matrix<T> bn_xhat;           // normalized pre-scale activations
        Matrix<T> pre_activation;    // after batch norm (or == affine)
        Matrix<T> activated;         // after nonlinearity; latent source
        Matrix<T> dropout_mask;      // 0/1 entries; empty when dropout inactive
        Matrix<T> output;            // layer output fed to the next layer
        std::vector<T> new_running_mean;  // updated running stats (train mode)
        std::vector<T> new_running_var;
    };
    std::vector<HiddenCache> hidden;

    const Matrix<T>& layer_input(std::size_t layer) const {
        return layer == 0 ? input : hidden[layer - 1].output;
    }
};

// Fan-based uniform init in +-sqrt(6/(fan_in+fan_out)); gamma 1, beta 0,
// running mean 0, running variance 1. Deterministic per seed.
template <typename T>
NetworkParameters<T> init_params(const NetworkConfig& config, std::uint64_t seed);

// rng is required exactly when mode == Train and dropout_rate > 0.
// Train-mode batch norm needs batch size >= 2.
template <typename T>
ForwardTrace<T> forward(const NetworkParameters<T>& params, const NetworkConfig& config,
                        const Matrix<T>& inputs, Mode mode, Rng* rng = nullptr);

// Exact gradients of <grad_logits, logits> + <grad_latent, latent> w.r.t.
// every trainable parameter, through batch statistics and the stored
// dropout mask. Either upstream may be empty (treated as zero).
template <typename T>
ParameterGradients<T> backward(const ForwardTrace<T>& trace, const NetworkParameters<T>& params,
                               const NetworkConfig& config, const Matrix<T>& grad_logits,
                               const Matrix<T>& grad_latent);

// Mean over the batch of -log softmax(logits)[label]; gradient is
// (softmax - onehot) / batch.
template <typename T>
std::pair<T, Matrix<T>> softmax_cross_entropy(const Matrix<T>& logits,
                                              const std::vector<int>& labels);

// Infer-mode argmax per row; ties break to the lowest class index. Uses
// node features only.
template <typename T>
std::vector<int> predict(const NetworkParameters<T>& params, const NetworkConfig& config,
                         const Matrix<T>& inputs);

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

} // namespace nodenet

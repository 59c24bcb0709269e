#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "nodenet/citegraph.hpp"
#include "nodenet/graphloss.hpp"
#include "nodenet/neuralnet.hpp"

namespace nodenet {

// Gradient training of the composite objective: full-batch by default,
// uniformly edge-sampled mini-batches as the streaming mode. Adaptive-moment
// updates with optional decoupled weight decay on weight matrices only.

struct TrainConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 5e-4;  // decoupled, weights only (not biases/gamma/beta)
    int epochs = 300;
    int patience = 50;           // 0 disables early stopping
    std::uint64_t seed = 1;
    enum class BatchMode { Full, EdgeSampled };
    BatchMode batch_mode = BatchMode::Full;
    int batch_edges = 256;       // edge-sampled mode only
    bool record_timing = false;  // wall-clock breaks byte-reproducibility; opt in

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double total_loss = 0.0;
    double supervised_loss = 0.0;
    double graph_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double seconds = 0.0;
};

struct MetricsLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;  // epoch achieving the best validation accuracy

    // Schema: epoch,total_loss,supervised_loss,graph_loss,train_acc,val_acc,test_acc,seconds
    void write_csv(std::ostream& out) const;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(int epoch_index, const std::string& what)
        : std::runtime_error(what), epoch(epoch_index) {}
    int epoch;
};

template <typename T>
struct AdamState {
    std::vector<Matrix<T>> m_weight, v_weight;
    std::vector<std::vector<T>> m_bias, v_bias;
    std::vector<std::vector<T>> m_gamma, v_gamma;
    std::vector<std::vector<T>> m_beta, v_beta;
    long step = 0;

    static AdamState zeros_like(const NetworkParameters<T>& params);
};

// Bias-corrected adaptive-moment update at step t >= 1; mutates params and
// state in place.
template <typename T>
void adam_step(NetworkParameters<T>& params, const ParameterGradients<T>& grads,
               AdamState<T>& state, const TrainConfig& config, long t);

template <typename T>
struct TrainResult {
    NetworkParameters<T> params;  // parameters from the best epoch
    AdamState<T> optimizer;       // optimizer state snapshotted at the same epoch
    MetricsLog log;
};

// graph must already be featurized. Deterministic for a fixed config+seed.
// Throws TrainingDiverged (carrying the epoch) on non-finite loss.
template <typename T>
TrainResult<T> train(const CitationGraph& graph, const SplitMasks& masks,
                     const NetworkConfig& net_config, const GraphLossConfig& loss_config,
                     const TrainConfig& train_config);

// Fraction of index_set rows whose infer-mode prediction matches the label.
template <typename T>
double evaluate(const NetworkParameters<T>& params, const NetworkConfig& net_config,
                const Matrix<T>& features, const std::vector<int>& labels,
                const std::vector<int>& index_set);

struct GradCheckInstance {
    Matrix<double> features;
    std::vector<int> labels;
    SplitMasks masks;
    EdgePartition partition;
};

// Small deterministic instance (12 nodes, 6 features, 3 classes) for
// end-to-end finite-difference checks.
GradCheckInstance make_gradcheck_instance(std::uint64_t seed);

// Central finite differences of the total cost w.r.t. every trainable
// parameter against the analytic gradients; returns the worst scaled
// relative error |a-n| / max(1, |a|, |n|). Dropout must be disabled.
// corruption != 0 perturbs one analytic entry (failure-path test hook).
double gradient_check(const NetworkConfig& net_config, const GraphLossConfig& loss_config,
                      const GradCheckInstance& instance, std::uint64_t param_seed = 7,
                      double corruption = 0.0);

} // namespace nodenet

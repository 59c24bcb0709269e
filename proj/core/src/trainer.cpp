#include "nodenet/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>

namespace nodenet {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("train: beta1/beta2 must lie in [0, 1)");
    if (adam_epsilon <= 0.0) throw std::invalid_argument("train: adam_epsilon must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be non-negative");
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (patience < 0) throw std::invalid_argument("train: patience must be >= 0");
    if (batch_mode == BatchMode::EdgeSampled && batch_edges < 1)
        throw std::invalid_argument("train: batch_edges must be >= 1");
}

namespace {

void append_csv_double(std::string& line, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, ptr);
}

} // namespace

void MetricsLog::write_csv(std::ostream& out) const {
    out << "epoch,total_loss,supervised_loss,graph_loss,train_acc,val_acc,test_acc,seconds\n";
    std::string line;
    for (const auto& r : epochs) {
        line.clear();
        line += std::to_string(r.epoch);
        for (double v : {r.total_loss, r.supervised_loss, r.graph_loss, r.train_acc, r.val_acc,
                         r.test_acc, r.seconds}) {
            line += ',';
            append_csv_double(line, v);
        }
        line += '\n';
        out << line;
    }
}

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const NetworkParameters<T>& params) {
    AdamState<T> s;
    for (const auto& layer : params.layers) {
        s.m_weight.emplace_back(layer.weight.rows(), layer.weight.cols());
        s.v_weight.emplace_back(layer.weight.rows(), layer.weight.cols());
        s.m_bias.emplace_back(layer.bias.size(), T(0));
        s.v_bias.emplace_back(layer.bias.size(), T(0));
    }
    for (const auto& bn : params.batchnorm) {
        s.m_gamma.emplace_back(bn.gamma.size(), T(0));
        s.v_gamma.emplace_back(bn.gamma.size(), T(0));
        s.m_beta.emplace_back(bn.beta.size(), T(0));
        s.v_beta.emplace_back(bn.beta.size(), T(0));
    }
    return s;
}

template <typename T>
void adam_step(NetworkParameters<T>& params, const ParameterGradients<T>& grads,
               AdamState<T>& state, const TrainConfig& config, long t) {
    if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
    const T b1 = static_cast<T>(config.beta1);
    const T b2 = static_cast<T>(config.beta2);
    const T lr = static_cast<T>(config.learning_rate);
    const T eps = static_cast<T>(config.adam_epsilon);
    const T bc1 = static_cast<T>(1.0 - std::pow(config.beta1, static_cast<double>(t)));
    const T bc2 = static_cast<T>(1.0 - std::pow(config.beta2, static_cast<double>(t)));

    auto update = [&](T* p, const T* g, T* m, T* v, std::size_t count, bool decay) {
        const T wd = decay ? static_cast<T>(config.weight_decay) : T(0);
        for (std::size_t i = 0; i < count; ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            const T m_hat = m[i] / bc1;
            const T v_hat = v[i] / bc2;
            p[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * p[i]);
        }
    };

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weight.data(), grads.weight[l].data(), state.m_weight[l].data(),
               state.v_weight[l].data(), params.layers[l].weight.size(), true);
        update(params.layers[l].bias.data(), grads.bias[l].data(), state.m_bias[l].data(),
               state.v_bias[l].data(), params.layers[l].bias.size(), false);
    }
    for (std::size_t l = 0; l < params.batchnorm.size(); ++l) {
        if (!params.batchnorm[l].enabled()) continue;
        update(params.batchnorm[l].gamma.data(), grads.gamma[l].data(), state.m_gamma[l].data(),
               state.v_gamma[l].data(), params.batchnorm[l].gamma.size(), false);
        update(params.batchnorm[l].beta.data(), grads.beta[l].data(), state.m_beta[l].data(),
               state.v_beta[l].data(), params.batchnorm[l].beta.size(), false);
    }
    state.step = t;
}

namespace {

template <typename T>
void commit_running_stats(NetworkParameters<T>& params, const ForwardTrace<T>& trace) {
    for (std::size_t l = 0; l < trace.hidden.size(); ++l) {
        const auto& cache = trace.hidden[l];
        if (cache.new_running_mean.empty()) continue;
        params.batchnorm[l].running_mean = cache.new_running_mean;
        params.batchnorm[l].running_var = cache.new_running_var;
    }
}

// Accuracy over a contiguous range of an evaluation batch.
double range_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                      std::size_t begin, std::size_t count) {
    if (count == 0) return 0.0;
    long hits = 0;
    for (std::size_t i = begin; i < begin + count; ++i)
        if (predictions[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(count);
}

template <typename T>
Matrix<T> gather_rows(const Matrix<T>& m, const std::vector<int>& rows) {
    Matrix<T> out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(m.row(static_cast<std::size_t>(rows[i])),
                  m.row(static_cast<std::size_t>(rows[i])) + m.cols(), out.row(i));
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out[i] = labels[static_cast<std::size_t>(rows[i])];
    return out;
}

// Supervised loss over the given rows, with the gradient scattered back to
// full-batch logit coordinates.
template <typename T>
std::pair<T, Matrix<T>> supervised_term(const ForwardTrace<T>& trace,
                                        const std::vector<int>& labels,
                                        const std::vector<int>& rows) {
    Matrix<T> sub_logits = gather_rows(trace.logits, rows);
    auto [loss, sub_grad] = softmax_cross_entropy(sub_logits, gather_labels(labels, rows));
    Matrix<T> grad(trace.logits.rows(), trace.logits.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(sub_grad.row(i), sub_grad.row(i) + sub_grad.cols(),
                  grad.row(static_cast<std::size_t>(rows[i])));
    return {loss, std::move(grad)};
}

struct FlatEdge {
    WeightedEdge edge;
    int bucket;  // 0 = ll, 1 = lu, 2 = uu
};

std::vector<FlatEdge> flatten_partition(const EdgePartition& partition) {
    std::vector<FlatEdge> flat;
    flat.reserve(partition.total_edges());
    for (const auto& e : partition.ll) flat.push_back({e, 0});
    for (const auto& e : partition.lu) flat.push_back({e, 1});
    for (const auto& e : partition.uu) flat.push_back({e, 2});
    return flat;
}

} // namespace

template <typename T>
TrainResult<T> train(const CitationGraph& graph, const SplitMasks& masks,
                     const NetworkConfig& net_config, const GraphLossConfig& loss_config,
                     const TrainConfig& train_config) {
    net_config.validate();
    loss_config.validate();
    train_config.validate();
    masks.validate(graph);
    if (net_config.input_width() != graph.num_features() ||
        net_config.num_classes() != graph.num_classes)
        throw std::invalid_argument("train: network widths do not match the dataset");

    const Matrix<T> features = convert_matrix<T>(graph.features);
    const EdgePartition partition = partition_edges(graph, masks, 1.0);

    NetworkParameters<T> params = init_params<T>(net_config, train_config.seed);
    AdamState<T> adam = AdamState<T>::zeros_like(params);
    Rng dropout_rng = Rng::derive(train_config.seed, 0xD0);
    Rng sample_rng = Rng::derive(train_config.seed, 0x5A);
    const bool needs_rng = net_config.dropout_rate > 0.0;

    // Edge-sampled mode state.
    const std::vector<FlatEdge> all_edges = flatten_partition(partition);
    std::vector<std::size_t> edge_order(all_edges.size());
    for (std::size_t i = 0; i < edge_order.size(); ++i) edge_order[i] = i;
    std::vector<int> labeled_pool = masks.train_idx;
    std::vector<char> labeled_mask(static_cast<std::size_t>(graph.num_nodes()), 0);
    for (int i : masks.train_idx) labeled_mask[static_cast<std::size_t>(i)] = 1;

    NetworkParameters<T> best_params = params;
    AdamState<T> best_adam = adam;
    double best_val = -1.0;
    int best_epoch = -1;
    const bool track_val = !masks.val_idx.empty();
    long step_count = 0;

    // Per-epoch accuracies come from one infer pass over the split subsets.
    std::vector<int> eval_rows = masks.train_idx;
    eval_rows.insert(eval_rows.end(), masks.val_idx.begin(), masks.val_idx.end());
    eval_rows.insert(eval_rows.end(), masks.test_idx.begin(), masks.test_idx.end());
    const Matrix<T> eval_features = gather_rows(features, eval_rows);
    const std::vector<int> eval_labels = gather_labels(graph.labels, eval_rows);
    const std::size_t train_count = masks.train_idx.size();
    const std::size_t val_count = masks.val_idx.size();
    const std::size_t test_count = masks.test_idx.size();

    MetricsLog log;
    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double sup_loss = 0.0;
        double graph_loss = 0.0;

        if (train_config.batch_mode == TrainConfig::BatchMode::Full) {
            ForwardTrace<T> trace = forward(params, net_config, features, Mode::Train,
                                            needs_rng ? &dropout_rng : nullptr);
            auto [sup, grad_logits] = supervised_term(trace, graph.labels, masks.train_idx);
            auto reg = graph_regularizer(trace.latent, partition, loss_config);
            sup_loss = static_cast<double>(sup);
            graph_loss = static_cast<double>(reg.value);
            if (!std::isfinite(sup_loss) || !std::isfinite(graph_loss))
                throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch));
            auto grads = backward(trace, params, net_config, grad_logits, reg.grad_latents);
            adam_step(params, grads, adam, train_config, ++step_count);
            commit_running_stats(params, trace);
        } else {
            const std::size_t total = all_edges.size();
            const std::size_t per_step = std::min<std::size_t>(
                static_cast<std::size_t>(train_config.batch_edges), std::max<std::size_t>(total, 1));
            const std::size_t steps =
                total == 0 ? 1 : (total + per_step - 1) / per_step;
            for (std::size_t s = 0; s < steps; ++s) {
                // Uniform edge sample without replacement.
                std::vector<FlatEdge> sampled;
                if (total > 0) {
                    for (std::size_t i = 0; i < per_step; ++i) {
                        const std::size_t j =
                            i + static_cast<std::size_t>(sample_rng.uniform_index(total - i));
                        std::swap(edge_order[i], edge_order[j]);
                        sampled.push_back(all_edges[edge_order[i]]);
                    }
                }
                // Active nodes: endpoints plus a same-size sample of labeled nodes.
                std::vector<int> active;
                for (const auto& fe : sampled) {
                    active.push_back(fe.edge.u);
                    active.push_back(fe.edge.v);
                }
                const std::size_t labeled_take = std::min(labeled_pool.size(),
                                                          std::max<std::size_t>(per_step, 2));
                for (std::size_t i = 0; i < labeled_take; ++i) {
                    const std::size_t j =
                        i + static_cast<std::size_t>(sample_rng.uniform_index(labeled_pool.size() - i));
                    std::swap(labeled_pool[i], labeled_pool[j]);
                    active.push_back(labeled_pool[i]);
                }
                std::sort(active.begin(), active.end());
                active.erase(std::unique(active.begin(), active.end()), active.end());

                std::vector<int> node_to_row(static_cast<std::size_t>(graph.num_nodes()), -1);
                for (std::size_t i = 0; i < active.size(); ++i)
                    node_to_row[static_cast<std::size_t>(active[i])] = static_cast<int>(i);

                std::vector<int> active_labeled_rows;
                std::vector<int> batch_labels(active.size());
                for (std::size_t i = 0; i < active.size(); ++i) {
                    batch_labels[i] = graph.labels[static_cast<std::size_t>(active[i])];
                    if (labeled_mask[static_cast<std::size_t>(active[i])])
                        active_labeled_rows.push_back(static_cast<int>(i));
                }

                EdgePartition mini;
                for (const auto& fe : sampled) {
                    if (fe.bucket == 0)
                        mini.ll.push_back(fe.edge);
                    else if (fe.bucket == 1)
                        mini.lu.push_back(fe.edge);
                    else
                        mini.uu.push_back(fe.edge);
                }

                Matrix<T> batch = gather_rows(features, active);
                ForwardTrace<T> trace = forward(params, net_config, batch, Mode::Train,
                                                needs_rng ? &dropout_rng : nullptr);
                T sup = T(0);
                Matrix<T> grad_logits(batch.rows(), trace.logits.cols());
                if (!active_labeled_rows.empty()) {
                    auto [loss, grad] = supervised_term(trace, batch_labels,
                                                        active_labeled_rows);
                    sup = loss;
                    grad_logits = std::move(grad);
                }
                auto reg = graph_regularizer(trace.latent, mini, loss_config, &node_to_row);
                sup_loss += static_cast<double>(sup);
                graph_loss += static_cast<double>(reg.value);
                if (!std::isfinite(sup_loss) || !std::isfinite(graph_loss))
                    throw TrainingDiverged(epoch,
                                           "training diverged at epoch " + std::to_string(epoch));
                auto grads = backward(trace, params, net_config, grad_logits, reg.grad_latents);
                adam_step(params, grads, adam, train_config, ++step_count);
                commit_running_stats(params, trace);
            }
            sup_loss /= static_cast<double>(steps);
            graph_loss /= static_cast<double>(steps);
        }

        const double total_loss = total_cost(sup_loss, graph_loss);

        const std::vector<int> predictions = predict(params, net_config, eval_features);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.total_loss = total_loss;
        rec.supervised_loss = sup_loss;
        rec.graph_loss = graph_loss;
        rec.train_acc = range_accuracy(predictions, eval_labels, 0, train_count);
        rec.val_acc = range_accuracy(predictions, eval_labels, train_count, val_count);
        rec.test_acc = range_accuracy(predictions, eval_labels, train_count + val_count,
                                      test_count);
        if (train_config.record_timing) {
            rec.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        log.epochs.push_back(rec);

        if (track_val && rec.val_acc > best_val) {
            best_val = rec.val_acc;
            best_epoch = epoch;
            best_params = params;
            best_adam = adam;
        }
        if (track_val && train_config.patience > 0 && best_epoch >= 0 &&
            epoch - best_epoch >= train_config.patience)
            break;
    }

    if (!track_val || best_epoch < 0) {
        best_epoch = static_cast<int>(log.epochs.size()) - 1;
        best_params = params;
        best_adam = adam;
    }
    log.best_epoch = best_epoch;
    return {std::move(best_params), std::move(best_adam), std::move(log)};
}

template <typename T>
double evaluate(const NetworkParameters<T>& params, const NetworkConfig& net_config,
                const Matrix<T>& features, const std::vector<int>& labels,
                const std::vector<int>& index_set) {
    if (index_set.empty()) throw std::invalid_argument("evaluate: empty index set");
    Matrix<T> subset = gather_rows(features, index_set);
    const std::vector<int> predictions = predict(params, net_config, subset);
    long hits = 0;
    for (std::size_t i = 0; i < index_set.size(); ++i)
        if (predictions[i] == labels[static_cast<std::size_t>(index_set[i])]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(index_set.size());
}

GradCheckInstance make_gradcheck_instance(std::uint64_t seed) {
    constexpr int n = 12, f = 6, k = 3;
    Rng rng = Rng::derive(seed, 0x6C);
    GradCheckInstance inst;
    inst.features = Matrix<double>(n, f);
    for (std::size_t i = 0; i < inst.features.size(); ++i)
        inst.features.data()[i] = rng.uniform(0.0, 1.0);
    inst.labels.resize(n);
    for (int i = 0; i < n; ++i)
        inst.labels[static_cast<std::size_t>(i)] = i < k ? i : static_cast<int>(rng.uniform_index(k));

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    // Keep the first k nodes (one per class) labeled so stratification holds.
    std::vector<int> tail(order.begin() + k, order.end());
    rng.shuffle(tail);
    inst.masks.train_idx.assign(order.begin(), order.begin() + k);
    inst.masks.train_idx.insert(inst.masks.train_idx.end(), tail.begin(), tail.begin() + 3);
    inst.masks.val_idx.assign(tail.begin() + 3, tail.begin() + 6);
    inst.masks.test_idx.assign(tail.begin() + 6, tail.end());
    std::sort(inst.masks.train_idx.begin(), inst.masks.train_idx.end());
    std::sort(inst.masks.val_idx.begin(), inst.masks.val_idx.end());
    std::sort(inst.masks.test_idx.begin(), inst.masks.test_idx.end());

    std::vector<char> labeled(n, 0);
    for (int i : inst.masks.train_idx) labeled[static_cast<std::size_t>(i)] = 1;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            if (!rng.bernoulli(0.3)) continue;
            WeightedEdge e{u, v, 1.0};
            const int count = labeled[static_cast<std::size_t>(u)] + labeled[static_cast<std::size_t>(v)];
            if (count == 2)
                inst.partition.ll.push_back(e);
            else if (count == 1)
                inst.partition.lu.push_back(e);
            else
                inst.partition.uu.push_back(e);
        }
    return inst;
}

double gradient_check(const NetworkConfig& net_config, const GraphLossConfig& loss_config,
                      const GradCheckInstance& instance, std::uint64_t param_seed,
                      double corruption) {
    net_config.validate();
    loss_config.validate();
    if (net_config.dropout_rate != 0.0)
        throw std::invalid_argument("gradient_check: dropout must be disabled");

    NetworkParameters<double> params = init_params<double>(net_config, param_seed);

    const auto cost = [&](const NetworkParameters<double>& p) -> double {
        ForwardTrace<double> trace =
            forward(p, net_config, instance.features, Mode::Train, nullptr);
        Matrix<double> sub_logits = gather_rows(trace.logits, instance.masks.train_idx);
        const auto sup = softmax_cross_entropy(
            sub_logits, gather_labels(instance.labels, instance.masks.train_idx));
        auto reg = graph_regularizer(trace.latent, instance.partition, loss_config);
        return sup.first + reg.value;
    };

    ForwardTrace<double> trace =
        forward(params, net_config, instance.features, Mode::Train, nullptr);
    auto [sup, grad_logits] = supervised_term(trace, instance.labels, instance.masks.train_idx);
    auto reg = graph_regularizer(trace.latent, instance.partition, loss_config);
    ParameterGradients<double> analytic =
        backward(trace, params, net_config, grad_logits, reg.grad_latents);
    if (corruption != 0.0) analytic.weight[0].data()[0] += corruption;

    double worst = 0.0;
    const auto check_tensor = [&](double* values, const double* grads, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            const double original = values[i];
            const double h = 1e-5 * std::max(1.0, std::abs(original));
            values[i] = original + h;
            const double c_plus = cost(params);
            values[i] = original - h;
            const double c_minus = cost(params);
            values[i] = original;
            const double numeric = (c_plus - c_minus) / (2.0 * h);
            const double a = grads[i];
            const double rel =
                std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, rel);
        }
    };

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        check_tensor(params.layers[l].weight.data(), analytic.weight[l].data(),
                     params.layers[l].weight.size());
        check_tensor(params.layers[l].bias.data(), analytic.bias[l].data(),
                     params.layers[l].bias.size());
    }
    for (std::size_t l = 0; l < params.batchnorm.size(); ++l) {
        if (!params.batchnorm[l].enabled()) continue;
        check_tensor(params.batchnorm[l].gamma.data(), analytic.gamma[l].data(),
                     params.batchnorm[l].gamma.size());
        check_tensor(params.batchnorm[l].beta.data(), analytic.beta[l].data(),
                     params.batchnorm[l].beta.size());
    }
    return worst;
}

template struct AdamState<double>;
template struct AdamState<float>;

template void adam_step<double>(NetworkParameters<double>&, const ParameterGradients<double>&,
                                AdamState<double>&, const TrainConfig&, long);
template void adam_step<float>(NetworkParameters<float>&, const ParameterGradients<float>&,
                               AdamState<float>&, const TrainConfig&, long);

template TrainResult<double> train<double>(const CitationGraph&, const SplitMasks&,
                                           const NetworkConfig&, const GraphLossConfig&,
                                           const TrainConfig&);
template TrainResult<float> train<float>(const CitationGraph&, const SplitMasks&,
                                         const NetworkConfig&, const GraphLossConfig&,
                                         const TrainConfig&);

template double evaluate<double>(const NetworkParameters<double>&, const NetworkConfig&,
                                 const Matrix<double>&, const std::vector<int>&,
                                 const std::vector<int>&);
template double evaluate<float>(const NetworkParameters<float>&, const NetworkConfig&,
                                const Matrix<float>&, const std::vector<int>&,
                                const std::vector<int>&);

} // namespace nodenet

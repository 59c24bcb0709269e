#include <benchmark/benchmark.h>

#include <sstream>

#include "nodenet/citegraph.hpp"
#include "nodenet/featurize.hpp"
#include "nodenet/graphloss.hpp"
#include "nodenet/neuralnet.hpp"
#include "nodenet/trainer.hpp"
#include "support/synthetic.hpp"

using namespace nodenet;

namespace {

// Cora-shaped random problem: 2708 nodes, 1433 features, 7 classes.
struct CoraShaped {
    CitationGraph graph;
    SplitMasks masks;
    EdgePartition partition;
    NetworkConfig net;
    NetworkParameters<double> params;

    CoraShaped() {
        testsupport::SyntheticSpec spec;
        spec.nodes = 2708;
        spec.classes = 7;
        spec.features = 1433;
        spec.feature_on_signal = 0.02;
        spec.feature_on_noise = 0.005;
        spec.p_in = 0.004;
        spec.p_out = 0.0003;
        graph = testsupport::make_synthetic_graph(spec);
        SplitSpec split;
        masks = make_split(graph, split, 1);
        partition = partition_edges(graph, masks);
        net = NetworkConfig::dense(spec.features, {64, 64}, spec.classes, 0.5, true);
        params = init_params<double>(net, 1);
    }
};

CoraShaped& fixture() {
    static CoraShaped f;
    return f;
}

} // namespace

static void BM_ForwardTrain(benchmark::State& state) {
    auto& f = fixture();
    Rng rng(3);
    for (auto _ : state) {
        auto trace = forward(f.params, f.net, f.graph.features, Mode::Train, &rng);
        benchmark::DoNotOptimize(trace.logits.data());
    }
}
BENCHMARK(BM_ForwardTrain)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackward(benchmark::State& state) {
    auto& f = fixture();
    Rng rng(3);
    GraphLossConfig loss;
    loss.alpha_ll = loss.alpha_lu = loss.alpha_uu = 0.2;
    for (auto _ : state) {
        auto trace = forward(f.params, f.net, f.graph.features, Mode::Train, &rng);
        auto [sup, grad_logits] = softmax_cross_entropy(trace.logits, f.graph.labels);
        auto reg = graph_regularizer(trace.latent, f.partition, loss);
        auto grads = backward(trace, f.params, f.net, grad_logits, reg.grad_latents);
        benchmark::DoNotOptimize(grads.weight[0].data());
    }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

static void BM_GraphRegularizer(benchmark::State& state) {
    auto& f = fixture();
    Matrix<double> latents(static_cast<std::size_t>(f.graph.num_nodes()), 64);
    Rng rng(5);
    for (std::size_t i = 0; i < latents.size(); ++i) latents.data()[i] = rng.uniform(-1, 1);
    GraphLossConfig loss;
    loss.alpha_ll = loss.alpha_lu = loss.alpha_uu = 0.2;
    for (auto _ : state) {
        auto res = graph_regularizer(latents, f.partition, loss);
        benchmark::DoNotOptimize(res.value);
    }
}
BENCHMARK(BM_GraphRegularizer)->Unit(benchmark::kMillisecond);

static void BM_MTfidf(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        auto out = transform_mtfidf(f.graph.features, fit_idf(f.graph.features));
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_MTfidf)->Unit(benchmark::kMillisecond);

static void BM_ParseContent(benchmark::State& state) {
    auto& f = fixture();
    std::ostringstream buffer;
    write_content(f.graph, buffer);
    const std::string text = buffer.str();
    for (auto _ : state) {
        std::istringstream in(text);
        auto data = parse_content(in);
        benchmark::DoNotOptimize(data.features.data());
    }
}
BENCHMARK(BM_ParseContent)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

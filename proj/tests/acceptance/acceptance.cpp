// Acceptance suite: one pass/fail line per criterion. Criteria that need the
// canonical citation datasets look them up under NODENET_DATA_DIR (falling
// back to NODENET_DATA_DIR_DEFAULT, then ./data) and report SKIP when the
// files are absent; everything else runs unconditionally. Exit code is
// nonzero iff any executed criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nodenet/checkpoint.hpp"
#include "nodenet/citegraph.hpp"
#include "nodenet/featurize.hpp"
#include "nodenet/graphloss.hpp"
#include "nodenet/run_config.hpp"
#include "nodenet/trainer.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace nodenet;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
    std::cout << "[" << id << "] " << (pass ? "PASS" : "FAIL") << " - " << detail << "\n";
    if (!pass) ++g_failures;
}

void report_skip(const std::string& id, const std::string& reason) {
    std::cout << "[" << id << "] SKIP - " << reason << "\n";
}

double elapsed_seconds(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << std::fixed << v;
    return ss.str();
}

// ---------------------------------------------------------------- datasets

struct DatasetSpec {
    std::string name;
    int nodes, features, classes;
    long raw_cite_lines;
    double reported_accuracy;       // reported reference point
    double floor_accuracy;       // soft-reproduction floor (60/20/20 split)
    double efficacy_budget_sec;  // per-dataset wall budget for criterion 4
};

const DatasetSpec kDatasets[] = {
    {"cora", 2708, 1433, 7, 5429, 0.8680, 0.80, 300.0},
    {"citeseer", 3327, 3703, 6, 4732, 0.8009, 0.72, 300.0},
    {"pubmed", 19717, 500, 3, 44338, 0.9021, 0.85, 900.0},
};

fs::path data_dir() {
    if (const char* dir = std::getenv("NODENET_DATA_DIR"); dir && *dir) return dir;
    if (const char* dir = std::getenv("NODENET_DATA_DIR_DEFAULT"); dir && *dir) return dir;
    return "data";
}

std::optional<std::pair<fs::path, fs::path>> dataset_files(const std::string& name) {
    const fs::path base = data_dir();
    for (const fs::path candidate :
         {base / name / (name + ".content"), base / (name + ".content")}) {
        if (!fs::exists(candidate)) continue;
        fs::path cites = candidate;
        cites.replace_extension(".cites");
        if (fs::exists(cites)) return std::make_pair(candidate, cites);
    }
    return std::nullopt;
}

// Preset hyperparameters shared by the dataset criteria (mirrors configs/),
// except that acceptance sweeps run in the documented f32 fast mode to fit
// the stated single-core runtime budgets.
RunConfig preset_config(const DatasetSpec& spec, const fs::path& content, const fs::path& cites) {
    RunConfig cfg;
    cfg.dataset_name = spec.name;
    cfg.content_path = content.string();
    cfg.cites_path = cites.string();
    cfg.featurize_mode = spec.name == "pubmed" ? FeaturizeMode::Identity : FeaturizeMode::MTfidf;
    cfg.loss.metric = Metric::CosinePenalty;
    cfg.loss.alpha_ll = 1.0;
    cfg.loss.alpha_lu = 1.0;
    cfg.loss.alpha_uu = 0.5;
    cfg.train.epochs = 200;
    cfg.train.patience = 50;
    cfg.precision = Precision::F32;
    cfg.seeds = {1, 2, 3, 4, 5};
    return cfg;
}

struct SweepResult {
    double mean_test_acc = 0.0;
    int completed = 0;
};

template <typename T>
SweepResult run_seeds_typed(const RunConfig& cfg, const CitationGraph& featurized) {
    SweepResult res;
    const Matrix<T> features = convert_matrix<T>(featurized.features);
    for (std::uint64_t seed : cfg.seeds) {
        const SplitMasks masks = make_split(featurized, cfg.split, cfg.split_seed_for(seed));
        const NetworkConfig net =
            cfg.network_config(featurized.num_features(), featurized.num_classes);
        TrainResult<T> out = train<T>(featurized, masks, net, cfg.loss, cfg.train_config(seed));
        res.mean_test_acc += evaluate(out.params, net, features, featurized.labels,
                                      masks.test_idx);
        ++res.completed;
    }
    if (res.completed > 0) res.mean_test_acc /= res.completed;
    return res;
}

SweepResult run_seeds(const RunConfig& cfg, const CitationGraph& featurized) {
    return cfg.precision == Precision::F64 ? run_seeds_typed<double>(cfg, featurized)
                                           : run_seeds_typed<float>(cfg, featurized);
}

// --------------------------------------------------------------- criteria

// Isolates a criterion body so one failure cannot crash the suite.
template <typename Fn>
void guarded(const std::string& id, Fn&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, std::string("unexpected exception: ") + e.what());
    }
}

void criterion_1_dataset_fidelity() {
    for (const DatasetSpec& spec : kDatasets) {
        const std::string id = "1:" + spec.name;
        const auto files = dataset_files(spec.name);
        if (!files) {
            report_skip(id, "dataset not found under " + data_dir().string());
            continue;
        }
        guarded(id, [&] {
        const auto t0 = Clock::now();
        LoadedDataset ds = load_dataset(files->first.string(), files->second.string());
        const double secs = elapsed_seconds(t0);
        const bool counts_ok = ds.graph.num_nodes() == spec.nodes &&
                               ds.graph.num_features() == spec.features &&
                               ds.graph.num_classes == spec.classes &&
                               ds.raw_cite_lines == spec.raw_cite_lines;
        const bool time_ok = secs < 10.0;
        std::ostringstream detail;
        detail << "nodes=" << ds.graph.num_nodes() << "/" << spec.nodes
               << " features=" << ds.graph.num_features() << "/" << spec.features
               << " classes=" << ds.graph.num_classes << "/" << spec.classes
               << " raw_cites=" << ds.raw_cite_lines << "/" << spec.raw_cite_lines
               << " undirected=" << ds.graph.edges.size() << " load=" << fmt(secs) << "s";
        report(id, counts_ok && time_ok, detail.str());
        });
    }
}

void criterion_2_gradient_suite() {
    const auto t0 = Clock::now();
    const GradCheckInstance instance = make_gradcheck_instance(42);
    bool all_ok = instance.features.rows() <= 20;
    std::ostringstream detail;
    for (Metric metric : {Metric::L1, Metric::L2, Metric::CosinePenalty}) {
        for (bool bn : {false, true}) {
            NetworkConfig net = NetworkConfig::dense(
                static_cast<int>(instance.features.cols()), {8, 8}, 3, 0.0, bn);
            GraphLossConfig loss;
            loss.alpha_ll = loss.alpha_lu = loss.alpha_uu = 0.5;
            loss.metric = metric;
            const double tol = bn ? 1e-4 : 1e-5;
            const double err = gradient_check(net, loss, instance);
            if (!(err < tol)) all_ok = false;
            detail << to_string(metric) << (bn ? "+bn" : "") << "=" << err << " ";
        }
    }
    const double secs = elapsed_seconds(t0);
    if (secs >= 60.0) all_ok = false;
    report("2", all_ok, detail.str() + "elapsed=" + fmt(secs) + "s (tol 1e-5, 1e-4 with bn)");
}

void criterion_3_oracle_equivalence() {
    // Modified TF-IDF vs the brute-force oracle on a 50-doc random corpus.
    Rng rng(777);
    Matrix<double> corpus(50, 64);
    for (std::size_t i = 0; i < corpus.size(); ++i)
        corpus.data()[i] = rng.bernoulli(0.15) ? 1.0 : 0.0;
    const Matrix<double> expected = testsupport::mtfidf_oracle(corpus);
    const Matrix<double> actual = transform_mtfidf(corpus, fit_idf(corpus));
    double worst = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i)
        worst = std::max(worst, std::abs(actual.data()[i] - expected.data()[i]));
    const bool tfidf_ok = worst < 1e-12;

    // Edge partition vs an independent per-edge membership recheck.
    bool partition_ok = true;
    for (std::uint64_t seed = 0; seed < 100 && partition_ok; ++seed) {
        testsupport::SyntheticSpec spec;
        spec.nodes = 24;
        spec.classes = 3;
        spec.features = 6;
        spec.p_in = 0.25;
        spec.p_out = 0.12;
        spec.seed = seed;
        const CitationGraph g = testsupport::make_synthetic_graph(spec);
        SplitSpec split;
        split.strategy = SplitStrategy::StratifiedRandom;
        const SplitMasks masks = make_split(g, split, seed * 31 + 1);
        const EdgePartition part = partition_edges(g, masks);
        if (part.total_edges() != g.edges.size()) partition_ok = false;

        std::vector<char> labeled(static_cast<std::size_t>(g.num_nodes()), 0);
        for (int i : masks.train_idx) labeled[static_cast<std::size_t>(i)] = 1;
        auto verify_bucket = [&](const std::vector<WeightedEdge>& bucket, int want) {
            for (const auto& e : bucket) {
                const int got = labeled[static_cast<std::size_t>(e.u)] +
                                labeled[static_cast<std::size_t>(e.v)];
                if (got != want) partition_ok = false;
            }
        };
        verify_bucket(part.ll, 2);
        verify_bucket(part.lu, 1);
        verify_bucket(part.uu, 0);
    }
    report("3", tfidf_ok && partition_ok,
           "mtfidf max_abs_err=" + std::to_string(worst) +
               " (tol 1e-12); partition recheck on 100 random graphs " +
               (partition_ok ? "consistent" : "inconsistent"));
}

void criterion_4_regularization_efficacy() {
    for (const DatasetSpec& spec : kDatasets) {
        const std::string id = "4:" + spec.name;
        const auto files = dataset_files(spec.name);
        if (!files) {
            report_skip(id, "dataset not found under " + data_dir().string());
            continue;
        }
        guarded(id, [&] {
        const auto t0 = Clock::now();
        RunConfig cfg = preset_config(spec, files->first, files->second);
        cfg.split.strategy = SplitStrategy::Planetoid;  // 20/class, 500 val, 1000 test
        LoadedDataset ds = load_dataset(cfg.content_path, cfg.cites_path);
        const CitationGraph featurized =
            featurize_dataset(ds.graph, cfg.featurize_mode, cfg.featurize_log_base);

        const SweepResult with_reg = run_seeds(cfg, featurized);
        RunConfig baseline = cfg;
        baseline.loss.alpha_ll = baseline.loss.alpha_lu = baseline.loss.alpha_uu = 0.0;
        const SweepResult without = run_seeds(baseline, featurized);
        const double secs = elapsed_seconds(t0);

        const double gain = with_reg.mean_test_acc - without.mean_test_acc;
        const bool margin_ok = spec.name == "cora" ? gain >= 0.02 : gain > 0.0;
        const bool time_ok = secs < spec.efficacy_budget_sec;
        report(id, margin_ok && time_ok,
               "reg=" + fmt(with_reg.mean_test_acc) + " baseline=" + fmt(without.mean_test_acc) +
                   " gain=" + fmt(gain) + (spec.name == "cora" ? " (need >= 0.02)" : " (need > 0)") +
                   " elapsed=" + fmt(secs) + "s/" + fmt(spec.efficacy_budget_sec) + "s");
        });
    }
}

void criterion_4s_synthetic_efficacy() {
    // Mechanism check that runs without the canonical datasets: weakish
    // features, strong homophily, few labels.
    testsupport::SyntheticSpec spec;
    spec.nodes = 400;
    spec.classes = 4;
    spec.features = 16;
    spec.feature_on_signal = 0.35;
    spec.feature_on_noise = 0.08;
    spec.p_in = 0.08;
    spec.p_out = 0.004;
    spec.seed = 5;
    const CitationGraph g = testsupport::make_synthetic_graph(spec);

    RunConfig cfg;
    cfg.split.strategy = SplitStrategy::Planetoid;
    cfg.split.train_per_class = 5;
    cfg.split.val_count = 80;
    cfg.split.test_count = 200;
    cfg.loss.alpha_ll = 1.0;
    cfg.loss.alpha_lu = 1.0;
    cfg.loss.alpha_uu = 0.5;
    cfg.hidden_widths = {32, 32};
    cfg.train.epochs = 500;
    cfg.train.patience = 100;
    cfg.seeds = {1, 2, 3, 4, 5};

    const SweepResult with_reg = run_seeds(cfg, g);
    RunConfig baseline = cfg;
    baseline.loss.alpha_ll = baseline.loss.alpha_lu = baseline.loss.alpha_uu = 0.0;
    const SweepResult without = run_seeds(baseline, g);
    const double gain = with_reg.mean_test_acc - without.mean_test_acc;
    report("4s", gain >= 0.02,
           "synthetic analogue: reg=" + fmt(with_reg.mean_test_acc) +
               " baseline=" + fmt(without.mean_test_acc) + " gain=" + fmt(gain) +
               " (need >= 0.02)");
}

void criterion_5_soft_reproduction() {
    for (const DatasetSpec& spec : kDatasets) {
        const std::string id = "5:" + spec.name;
        const auto files = dataset_files(spec.name);
        if (!files) {
            report_skip(id, "dataset not found under " + data_dir().string());
            continue;
        }
        guarded(id, [&] {
        RunConfig cfg = preset_config(spec, files->first, files->second);
        cfg.split.strategy = SplitStrategy::StratifiedRandom;  // documented 60/20/20
        // The reported reference accuracies are for raw binary-count features.
        cfg.featurize_mode = FeaturizeMode::Identity;
        LoadedDataset ds = load_dataset(cfg.content_path, cfg.cites_path);
        const CitationGraph featurized =
            featurize_dataset(ds.graph, cfg.featurize_mode, cfg.featurize_log_base);
        const SweepResult res = run_seeds(cfg, featurized);
        const double gap = spec.reported_accuracy - res.mean_test_acc;
        report(id, res.mean_test_acc >= spec.floor_accuracy,
               "test_acc=" + fmt(res.mean_test_acc) + " floor=" + fmt(spec.floor_accuracy) +
                   " reported=" + fmt(spec.reported_accuracy) + " gap_to_reported=" + fmt(gap) +
                   " (gap is reported, only the floor gates)");
        });
    }
}

bool stable_after_warmup(const MetricsLog& log, int warmup, double initial_fraction) {
    if (log.epochs.size() <= static_cast<std::size_t>(warmup + 1)) return true;
    const double budget = initial_fraction * log.epochs.front().total_loss;
    for (std::size_t i = static_cast<std::size_t>(warmup) + 1; i < log.epochs.size(); ++i) {
        const double increase = log.epochs[i].total_loss - log.epochs[i - 1].total_loss;
        if (increase > budget) return false;
    }
    return true;
}

void criterion_6_loss_stability() {
    const auto files = dataset_files("cora");
    if (!files) {
        report_skip("6", "cora not found under " + data_dir().string());
        return;
    }
    guarded("6", [&] {
    const DatasetSpec& spec = kDatasets[0];
    RunConfig cfg = preset_config(spec, files->first, files->second);
    cfg.split.strategy = SplitStrategy::StratifiedRandom;
    LoadedDataset ds = load_dataset(cfg.content_path, cfg.cites_path);
    const CitationGraph featurized = featurize_dataset(ds.graph, FeaturizeMode::MTfidf);
    const SplitMasks masks = make_split(featurized, cfg.split, 1);
    const NetworkConfig net =
        cfg.network_config(featurized.num_features(), featurized.num_classes);
    TrainConfig tc = cfg.train_config(1);
    tc.patience = 0;  // full curve
    tc.epochs = 150;
    TrainResult<double> out = train<double>(featurized, masks, net, cfg.loss, tc);
    const bool ok = stable_after_warmup(out.log, 20, 0.25);
    report("6", ok,
           std::string("cora+mtfidf loss curve: no post-epoch-20 jump above 25% of the initial "
                       "loss -> ") +
               (ok ? "holds" : "violated"));
    });
}

void criterion_6s_synthetic_stability() {
    testsupport::SyntheticSpec spec;
    spec.nodes = 300;
    spec.classes = 3;
    spec.features = 30;
    spec.feature_on_signal = 0.3;
    spec.feature_on_noise = 0.06;
    spec.p_in = 0.06;
    spec.p_out = 0.005;
    const CitationGraph g = testsupport::make_synthetic_graph(spec);
    const CitationGraph featurized = featurize_dataset(g, FeaturizeMode::MTfidf);
    SplitSpec split;
    split.strategy = SplitStrategy::StratifiedRandom;
    const SplitMasks masks = make_split(featurized, split, 2);
    NetworkConfig net = NetworkConfig::dense(featurized.num_features(), {32, 32},
                                             featurized.num_classes, 0.5, true);
    GraphLossConfig loss;
    loss.alpha_ll = 1.0;
    loss.alpha_lu = 1.0;
    loss.alpha_uu = 0.5;
    TrainConfig tc;
    tc.epochs = 120;
    tc.patience = 0;
    tc.seed = 4;
    TrainResult<double> out = train<double>(featurized, masks, net, loss, tc);
    report("6s", stable_after_warmup(out.log, 20, 0.25),
           "synthetic analogue of the mtfidf stability check");
}

// Criteria 7 and 8 exercise the CLI surface end to end on synthetic files.

std::string cli_binary() {
    const char* bin = std::getenv("NODENET_BIN");
    return bin ? bin : "";
}

int run_cmd(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SyntheticFiles {
    fs::path dir, content, cites;
    explicit SyntheticFiles(const std::string& tag) : dir("acceptance_tmp_" + tag) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        testsupport::SyntheticSpec spec;
        spec.nodes = 90;
        spec.classes = 3;
        spec.features = 18;
        spec.p_in = 0.12;
        spec.p_out = 0.01;
        spec.seed = 8;
        content = dir / "synth.content";
        cites = dir / "synth.cites";
        testsupport::write_dataset_files(testsupport::make_synthetic_graph(spec),
                                         content.string(), cites.string());
    }
    ~SyntheticFiles() { fs::remove_all(dir); }

    std::string args(const fs::path& out) const {
        return " --set dataset.name=synth --set dataset.content=" + content.string() +
               " --set dataset.cites=" + cites.string() + " --set run.output_dir=" +
               out.string() +
               " --set split.strategy=stratified --set train.epochs=25 --set run.seeds=1" +
               " --set loss.alpha_ll=0.2 --set loss.alpha_lu=0.2 --set loss.alpha_uu=0.1";
    }
};

void criterion_7_inference_locality() {
    if (cli_binary().empty()) {
        report_skip("7", "NODENET_BIN not set");
        return;
    }
    SyntheticFiles fx("c7");
    const fs::path out = fx.dir / "runs";
    const std::string quiet = " > " + (fx.dir / "log.txt").string() + " 2>&1";
    if (run_cmd(cli_binary() + " train" + fx.args(out) + quiet) != 0) {
        report("7", false, "training run failed");
        return;
    }
    if (run_cmd(cli_binary() + " eval" + fx.args(out) + quiet) != 0) {
        report("7", false, "eval with edges failed");
        return;
    }
    const std::string with_edges = slurp(out / "predictions_synth_1.csv");
    if (run_cmd(cli_binary() + " eval" + fx.args(out) + " --set dataset.ignore_edges=true" +
                quiet) != 0) {
        report("7", false, "eval without edges failed");
        return;
    }
    const std::string without_edges = slurp(out / "predictions_synth_1.csv");
    report("7", !with_edges.empty() && with_edges == without_edges,
           "predictions byte-identical after deleting every edge (" +
               std::to_string(with_edges.size()) + " bytes)");
}

void criterion_8_determinism() {
    if (cli_binary().empty()) {
        report_skip("8", "NODENET_BIN not set");
        return;
    }
    SyntheticFiles fx("c8");
    const std::string quiet = " > " + (fx.dir / "log.txt").string() + " 2>&1";
    const fs::path out_a = fx.dir / "run_a";
    const fs::path out_b = fx.dir / "run_b";
    if (run_cmd(cli_binary() + " train" + fx.args(out_a) + quiet) != 0 ||
        run_cmd(cli_binary() + " train" + fx.args(out_b) + quiet) != 0) {
        report("8", false, "training run failed");
        return;
    }
    const std::string a = slurp(out_a / "metrics_synth_1.csv");
    const std::string b = slurp(out_b / "metrics_synth_1.csv");
    report("8", !a.empty() && a == b,
           "two identical invocations produced byte-identical metrics CSVs (" +
               std::to_string(a.size()) + " bytes)");
}

} // namespace

int main() {
    std::cout << "NodeNet acceptance suite (data dir: " << data_dir().string() << ")\n";
    guarded("1", criterion_1_dataset_fidelity);
    guarded("2", criterion_2_gradient_suite);
    guarded("3", criterion_3_oracle_equivalence);
    guarded("4", criterion_4_regularization_efficacy);
    guarded("4s", criterion_4s_synthetic_efficacy);
    guarded("5", criterion_5_soft_reproduction);
    guarded("6", criterion_6_loss_stability);
    guarded("6s", criterion_6s_synthetic_stability);
    guarded("7", criterion_7_inference_locality);
    guarded("8", criterion_8_determinism);
    std::cout << (g_failures == 0 ? "ALL EXECUTED CRITERIA PASSED"
                                  : std::to_string(g_failures) + " CRITERIA FAILED")
              << "\n";
    return g_failures == 0 ? 0 : 1;
}

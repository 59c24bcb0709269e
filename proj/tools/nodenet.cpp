// NodeNet command-line runner: dataset statistics, training with metric
// export, checkpoint evaluation, and the finite-difference gradient suite.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nodenet/checkpoint.hpp"
#include "nodenet/citegraph.hpp"
#include "nodenet/featurize.hpp"
#include "nodenet/graphloss.hpp"
#include "nodenet/neuralnet.hpp"
#include "nodenet/run_config.hpp"
#include "nodenet/trainer.hpp"

namespace fs = std::filesystem;
using namespace nodenet;

namespace {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// All artifacts are written via temp-then-rename so concurrent runs never
// interleave bytes.
void write_file_atomic(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
    }
    fs::rename(tmp, path);
}

RunConfig load_run_config(const std::string& config_path, const std::vector<std::string>& sets) {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = parse_key_value_file(config_path);
    apply_overrides(kv, sets);
    RunConfig cfg = config_from_key_values(kv);
    if (const char* out_dir = std::getenv("NODENET_OUT_DIR"); out_dir && *out_dir)
        cfg.output_dir = out_dir;
    return cfg;
}

struct PreparedDataset {
    LoadedDataset loaded;
    CitationGraph featurized;
};

PreparedDataset prepare_dataset(const RunConfig& cfg) {
    if (cfg.content_path.empty())
        throw std::runtime_error("config: dataset.content is required for this command");
    if (!cfg.ignore_edges && cfg.cites_path.empty())
        throw std::runtime_error("config: dataset.cites is required (or set dataset.ignore_edges)");
    PreparedDataset out;
    out.loaded = load_dataset(cfg.content_path, cfg.cites_path, cfg.ignore_edges);
    out.loaded.graph.validate();
    out.featurized =
        featurize_dataset(out.loaded.graph, cfg.featurize_mode, cfg.featurize_log_base);
    return out;
}

int cmd_stats(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    LoadedDataset ds = load_dataset(cfg.content_path, cfg.cites_path, cfg.ignore_edges);
    ds.graph.validate();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ostringstream table;
    table << "dataset\tnodes\tedges_raw\tedges_undirected\tfeatures\tclasses\n";
    table << cfg.dataset_name << '\t' << ds.graph.num_nodes() << '\t' << ds.raw_cite_lines << '\t'
          << ds.graph.edges.size() << '\t' << ds.graph.num_features() << '\t'
          << ds.graph.num_classes << '\n';
    std::cout << table.str();
    std::cout << "# self_loops=" << ds.self_loops << " unknown_ids=" << ds.unknown_ids
              << " duplicate_cites=" << ds.duplicate_cites << " load_seconds=" << secs << "\n";
    return 0;
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool diverged = false;
    double best_val_acc = 0.0;
    double test_acc = 0.0;
};

template <typename T>
SeedOutcome run_one_seed(const RunConfig& cfg, const PreparedDataset& data, std::uint64_t seed) {
    const CitationGraph& graph = data.featurized;
    const SplitMasks masks = make_split(graph, cfg.split, cfg.split_seed_for(seed));
    const NetworkConfig net_cfg = cfg.network_config(graph.num_features(), graph.num_classes);
    const TrainConfig train_cfg = cfg.train_config(seed);

    SeedOutcome outcome;
    outcome.seed = seed;

    TrainResult<T> result;
    try {
        result = train<T>(graph, masks, net_cfg, cfg.loss, train_cfg);
    } catch (const TrainingDiverged& e) {
        std::cerr << "seed " << seed << ": " << e.what() << "\n";
        outcome.diverged = true;
        return outcome;
    }

    const fs::path out_dir = cfg.output_dir;
    {
        std::ostringstream csv;
        result.log.write_csv(csv);
        write_file_atomic(out_dir / ("metrics_" + cfg.dataset_name + "_" + std::to_string(seed) +
                                     ".csv"),
                          csv.str());
    }
    {
        Checkpoint<T> ckpt;
        ckpt.config = net_cfg;
        ckpt.seed = seed;
        ckpt.params = result.params;
        ckpt.optimizer = result.optimizer;
        ckpt.epoch = result.log.best_epoch;
        const fs::path path = out_dir / ("checkpoint_" + cfg.dataset_name + "_" +
                                         std::to_string(seed) + ".ckpt");
        fs::create_directories(out_dir);
        save_checkpoint(ckpt, path.string());
    }

    const Matrix<T> features = convert_matrix<T>(graph.features);
    if (!masks.val_idx.empty() && result.log.best_epoch >= 0)
        outcome.best_val_acc =
            result.log.epochs[static_cast<std::size_t>(result.log.best_epoch)].val_acc;
    outcome.test_acc = masks.test_idx.empty()
                           ? 0.0
                           : evaluate(result.params, net_cfg, features, graph.labels,
                                      masks.test_idx);
    return outcome;
}

int cmd_train(const RunConfig& cfg) {
    const PreparedDataset data = prepare_dataset(cfg);
    const std::string metric_label =
        cfg.loss.all_alpha_zero() ? "baseline" : to_string(cfg.loss.metric);

    std::vector<SeedOutcome> outcomes;
    for (std::uint64_t seed : cfg.seeds) {
        outcomes.push_back(cfg.precision == Precision::F64
                               ? run_one_seed<double>(cfg, data, seed)
                               : run_one_seed<float>(cfg, data, seed));
        const auto& o = outcomes.back();
        std::cout << "seed " << seed
                  << (o.diverged ? ": diverged"
                                 : ": best_val_acc=" + format_double(o.best_val_acc) +
                                       " test_acc=" + format_double(o.test_acc))
                  << "\n";
    }

    std::string summary = "dataset,metric,alpha_ll,alpha_lu,alpha_uu,seed,best_val_acc,test_acc\n";
    for (const auto& o : outcomes) {
        summary += cfg.dataset_name + "," + metric_label + "," + format_double(cfg.loss.alpha_ll) +
                   "," + format_double(cfg.loss.alpha_lu) + "," + format_double(cfg.loss.alpha_uu) +
                   "," + std::to_string(o.seed) + ",";
        summary += o.diverged ? "nan,nan" : format_double(o.best_val_acc) + "," +
                                                format_double(o.test_acc);
        summary += '\n';
    }
    write_file_atomic(fs::path(cfg.output_dir) / ("summary_" + cfg.dataset_name + ".csv"), summary);

    // Aggregate: mean and sample standard deviation over completed seeds.
    std::vector<double> accs;
    for (const auto& o : outcomes)
        if (!o.diverged) accs.push_back(o.test_acc);
    double mean = 0.0, stddev = 0.0;
    for (double a : accs) mean += a;
    if (!accs.empty()) mean /= static_cast<double>(accs.size());
    if (accs.size() > 1) {
        for (double a : accs) stddev += (a - mean) * (a - mean);
        stddev = std::sqrt(stddev / static_cast<double>(accs.size() - 1));
    }
    std::string aggregate =
        "dataset,metric,alpha_ll,alpha_lu,alpha_uu,seeds,completed,test_acc_mean,test_acc_std\n";
    aggregate += cfg.dataset_name + "," + metric_label + "," + format_double(cfg.loss.alpha_ll) +
                 "," + format_double(cfg.loss.alpha_lu) + "," + format_double(cfg.loss.alpha_uu) +
                 "," + std::to_string(cfg.seeds.size()) + "," + std::to_string(accs.size()) + "," +
                 format_double(mean) + "," + format_double(stddev) + "\n";
    write_file_atomic(fs::path(cfg.output_dir) / ("aggregate_" + cfg.dataset_name + ".csv"),
                      aggregate);

    std::cout << cfg.dataset_name << " [" << metric_label << "] test accuracy " << mean << " +- "
              << stddev << " over " << accs.size() << "/" << cfg.seeds.size() << " seeds\n";

    const bool any_diverged =
        std::any_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.diverged; });
    return any_diverged ? 1 : 0;
}

template <typename T>
int eval_with_checkpoint(const RunConfig& cfg, const PreparedDataset& data,
                         const std::string& ckpt_path) {
    const Checkpoint<T> ckpt = load_checkpoint<T>(ckpt_path);
    const CitationGraph& graph = data.featurized;
    if (ckpt.config.input_width() != graph.num_features() ||
        ckpt.config.num_classes() != graph.num_classes)
        throw std::runtime_error("eval: checkpoint does not match dataset shape");

    const Matrix<T> features = convert_matrix<T>(graph.features);
    const std::vector<int> predictions = predict(ckpt.params, ckpt.config, features);

    std::string pred_csv = "node_id,predicted_class\n";
    for (int i = 0; i < graph.num_nodes(); ++i) {
        pred_csv += graph.node_ids[static_cast<std::size_t>(i)];
        pred_csv += ',';
        pred_csv += graph.label_names[static_cast<std::size_t>(
            predictions[static_cast<std::size_t>(i)])];
        pred_csv += '\n';
    }
    write_file_atomic(fs::path(cfg.output_dir) /
                          ("predictions_" + cfg.dataset_name + "_" + std::to_string(ckpt.seed) +
                           ".csv"),
                      pred_csv);

    const SplitMasks masks = make_split(graph, cfg.split, cfg.split_seed_for(ckpt.seed));
    auto subset_acc = [&](const std::vector<int>& idx) {
        return idx.empty() ? 0.0 : evaluate(ckpt.params, ckpt.config, features, graph.labels, idx);
    };
    std::cout << "train_acc=" << subset_acc(masks.train_idx)
              << " val_acc=" << subset_acc(masks.val_idx)
              << " test_acc=" << subset_acc(masks.test_idx) << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, std::string ckpt_path) {
    const PreparedDataset data = prepare_dataset(cfg);
    if (ckpt_path.empty())
        ckpt_path = (fs::path(cfg.output_dir) /
                     ("checkpoint_" + cfg.dataset_name + "_" + std::to_string(cfg.seeds.front()) +
                      ".ckpt"))
                        .string();
    return checkpoint_scalar_width(ckpt_path) == 8
               ? eval_with_checkpoint<double>(cfg, data, ckpt_path)
               : eval_with_checkpoint<float>(cfg, data, ckpt_path);
}

int cmd_gradcheck(const RunConfig& cfg, double corruption) {
    const GradCheckInstance instance = make_gradcheck_instance(cfg.seeds.front());
    const int features = static_cast<int>(instance.features.cols());
    int classes = 0;
    for (int label : instance.labels) classes = std::max(classes, label + 1);

    GraphLossConfig loss = cfg.loss;
    if (loss.all_alpha_zero()) {
        loss.alpha_ll = 0.5;
        loss.alpha_lu = 0.5;
        loss.alpha_uu = 0.5;
    }

    bool all_pass = true;
    std::string worst_name;
    double worst_err = 0.0;
    for (Metric metric : {Metric::L1, Metric::L2, Metric::CosinePenalty}) {
        for (bool bn : {false, true}) {
            NetworkConfig net = NetworkConfig::dense(features, cfg.hidden_widths, classes,
                                                     /*dropout_rate=*/0.0, bn);
            net.activation = cfg.activation;
            net.bn_epsilon = cfg.bn_epsilon;
            net.bn_momentum = cfg.bn_momentum;
            loss.metric = metric;
            const double tol = bn ? 1e-4 : 1e-5;
            const double err =
                gradient_check(net, loss, instance, cfg.seeds.front(), corruption);
            const bool pass = err < tol;
            all_pass = all_pass && pass;
            if (err > worst_err) {
                worst_err = err;
                worst_name = to_string(metric) + (bn ? "+batchnorm" : "");
            }
            std::cout << "metric=" << to_string(metric) << " batchnorm=" << (bn ? "on" : "off")
                      << " max_rel_err=" << err << " tol=" << tol << " "
                      << (pass ? "PASS" : "FAIL") << "\n";
        }
    }
    if (!all_pass) {
        std::cerr << "gradcheck failed; worst offender: " << worst_name << " (" << worst_err
                  << ")\n";
        return 1;
    }
    return 0;
}

// Normalizes the PubMed research distribution (NODE.paper.tab +
// DIRECTED.cites.tab) into the .content/.cites layout used everywhere else.
int cmd_convert_pubmed(const std::string& node_path, const std::string& cites_path,
                       const std::string& out_content, const std::string& out_cites) {
    std::ifstream nodes(node_path);
    if (!nodes) throw std::runtime_error("cannot open " + node_path);
    std::string line;
    if (!std::getline(nodes, line)) throw std::runtime_error("node file: missing first header");
    if (!std::getline(nodes, line)) throw std::runtime_error("node file: missing feature header");

    // Feature header tokens look like "numeric:w-insulin:0.0"; collect the
    // names in order to fix the dense column layout.
    std::vector<std::string> feature_names;
    std::map<std::string, std::size_t> feature_index;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, '\t')) {
            if (tok.rfind("numeric:", 0) != 0) continue;
            const auto first = tok.find(':');
            const auto last = tok.rfind(':');
            const std::string name =
                last > first ? tok.substr(first + 1, last - first - 1) : tok.substr(first + 1);
            feature_index.emplace(name, feature_names.size());
            feature_names.push_back(name);
        }
    }
    if (feature_names.empty()) throw std::runtime_error("node file: no numeric feature columns");

    std::string content;
    long node_count = 0;
    while (std::getline(nodes, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> toks;
        while (std::getline(ss, tok, '\t')) toks.push_back(tok);
        if (toks.size() < 2) continue;
        const std::string& id = toks[0];
        if (toks[1].rfind("label=", 0) != 0)
            throw std::runtime_error("node file: expected label=... for node " + id);
        const std::string label = toks[1].substr(6);
        std::vector<double> dense(feature_names.size(), 0.0);
        for (std::size_t i = 2; i < toks.size(); ++i) {
            const auto eq = toks[i].find('=');
            if (eq == std::string::npos) continue;  // trailing summary column
            const auto it = feature_index.find(toks[i].substr(0, eq));
            if (it == feature_index.end()) continue;
            dense[it->second] = std::stod(toks[i].substr(eq + 1));
        }
        content += id;
        for (double v : dense) {
            content += '\t';
            content += format_double(v);
        }
        content += '\t';
        content += label;
        content += '\n';
        ++node_count;
    }

    std::ifstream cites(cites_path);
    if (!cites) throw std::runtime_error("cannot open " + cites_path);
    std::string cites_out;
    long edge_count = 0;
    std::getline(cites, line);  // two header lines
    std::getline(cites, line);
    while (std::getline(cites, line)) {
        if (line.empty()) continue;
        // "<n>\tpaper:<a>\t|\tpaper:<b>"
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> refs;
        while (std::getline(ss, tok, '\t'))
            if (tok.rfind("paper:", 0) == 0) refs.push_back(tok.substr(6));
        if (refs.size() != 2) continue;
        cites_out += refs[0];
        cites_out += '\t';
        cites_out += refs[1];
        cites_out += '\n';
        ++edge_count;
    }

    write_file_atomic(out_content, content);
    write_file_atomic(out_cites, cites_out);
    std::cout << "converted " << node_count << " nodes, " << edge_count << " citation lines\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"NodeNet: graph-regularized node classification on citation networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--set", sets, "override a config key, e.g. --set loss.alpha_ll=0.2");

    auto* stats = app.add_subcommand("stats", "dataset statistics table");
    stats->fallthrough();
    auto* train_cmd = app.add_subcommand("train", "train over run.seeds and export artifacts");
    train_cmd->fallthrough();
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and write predictions");
    eval_cmd->fallthrough();
    std::string ckpt_path;
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file (default: first seed's)");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->fallthrough();
    double corruption = 0.0;
    gradcheck->add_option("--corrupt", corruption, "perturb one analytic gradient (test hook)")
        ->group("");  // hidden

    auto* convert = app.add_subcommand("convert-pubmed",
                                       "normalize the PubMed tab distribution to .content/.cites");
    std::string node_file, cites_file, out_content, out_cites;
    convert->add_option("--nodes", node_file, "Pubmed-Diabetes.NODE.paper.tab")->required();
    convert->add_option("--cites", cites_file, "Pubmed-Diabetes.DIRECTED.cites.tab")->required();
    convert->add_option("--out-content", out_content, "output .content path")->required();
    convert->add_option("--out-cites", out_cites, "output .cites path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (convert->parsed())
            return cmd_convert_pubmed(node_file, cites_file, out_content, out_cites);
        const RunConfig cfg = load_run_config(config_path, sets);
        if (stats->parsed()) return cmd_stats(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (eval_cmd->parsed()) return cmd_eval(cfg, ckpt_path);
        if (gradcheck->parsed()) return cmd_gradcheck(cfg, corruption);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

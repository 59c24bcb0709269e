#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nodenet/citegraph.hpp"
#include "nodenet/featurize.hpp"
#include "nodenet/graphloss.hpp"
#include "nodenet/neuralnet.hpp"
#include "nodenet/trainer.hpp"

namespace nodenet {

// Experiment configuration: a flat key-value text file with dotted section
// keys (`loss.alpha_ll = 0.1`), overridable from the command line. Files
// are diff-friendly records of a run.

enum class Precision { F64, F32 };

struct RunConfig {
    // dataset.*
    std::string dataset_name = "dataset";
    std::string content_path;
    std::string cites_path;
    bool ignore_edges = false;
    // featurize.*
    FeaturizeMode featurize_mode = FeaturizeMode::Identity;
    double featurize_log_base = kNaturalLog;
    // split.*
    SplitSpec split;
    std::optional<std::uint64_t> split_seed;  // unset: each run seed splits
    // net.*
    std::vector<int> hidden_widths = {64, 64};
    double dropout_rate = 0.5;
    bool batchnorm = true;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;
    Activation activation = Activation::Relu;
    int latent_layer = -1;  // -1 selects the last hidden layer
    // loss.*
    GraphLossConfig loss;
    // train.*
    TrainConfig train;
    Precision precision = Precision::F64;
    // run.*
    std::vector<std::uint64_t> seeds = {1};
    std::string output_dir = "runs/out";

    void validate() const;

    // Concrete module configs for a loaded dataset / chosen seed.
    NetworkConfig network_config(int feature_width, int num_classes) const;
    TrainConfig train_config(std::uint64_t seed) const;
    std::uint64_t split_seed_for(std::uint64_t run_seed) const {
        return split_seed ? *split_seed : run_seed;
    }
};

// `key = value` lines, '#' comments, later keys win.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> parse_key_value_file(const std::string& path);

// Applies entries over defaults; unknown keys or malformed values throw
// with the offending key named.
RunConfig config_from_key_values(const std::map<std::string, std::string>& kv);

// "key=value" strings, e.g. from repeated --set flags.
void apply_overrides(std::map<std::string, std::string>& kv,
                     const std::vector<std::string>& overrides);

// Full serialization; parse(serialize(cfg)) reproduces cfg.
std::map<std::string, std::string> to_key_values(const RunConfig& config);
std::string serialize_config(const RunConfig& config);

} // namespace nodenet

#include "nodenet/run_config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nodenet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::runtime_error("config: invalid value '" + value + "' for key '" + key + "'");
}

double parse_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value);
    return out;
}

long parse_long(const std::string& key, const std::string& value) {
    long out = 0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value);
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::string item;
    std::stringstream ss(value);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace

void RunConfig::validate() const {
    if (seeds.empty()) throw std::runtime_error("config: run.seeds must be non-empty");
    if (hidden_widths.empty()) throw std::runtime_error("config: net.hidden must be non-empty");
    for (int w : hidden_widths)
        if (w <= 0) throw std::runtime_error("config: net.hidden widths must be positive");
    if (latent_layer < -1 || latent_layer >= static_cast<int>(hidden_widths.size()))
        throw std::runtime_error("config: net.latent_layer out of range");
    loss.validate();
    TrainConfig probe = train;
    probe.validate();
}

NetworkConfig RunConfig::network_config(int feature_width, int num_classes) const {
    NetworkConfig cfg = NetworkConfig::dense(feature_width, hidden_widths, num_classes,
                                             dropout_rate, batchnorm);
    cfg.bn_epsilon = bn_epsilon;
    cfg.bn_momentum = bn_momentum;
    cfg.activation = activation;
    if (latent_layer >= 0) cfg.latent_layer = latent_layer;
    cfg.validate();
    return cfg;
}

TrainConfig RunConfig::train_config(std::uint64_t seed) const {
    TrainConfig cfg = train;
    cfg.seed = seed;
    return cfg;
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        const std::string key = trim(trimmed.substr(0, eq));
        const std::string value = trim(trimmed.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> parse_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open file: " + path);
    return parse_key_values(in);
}

void apply_overrides(std::map<std::string, std::string>& kv,
                     const std::vector<std::string>& overrides) {
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config override must be key=value: '" + item + "'");
        kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
}

RunConfig config_from_key_values(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    for (const auto& [key, value] : kv) {
        if (key == "dataset.name") cfg.dataset_name = value;
        else if (key == "dataset.content") cfg.content_path = value;
        else if (key == "dataset.cites") cfg.cites_path = value;
        else if (key == "dataset.ignore_edges") cfg.ignore_edges = parse_bool(key, value);
        else if (key == "featurize.mode") {
            if (value == "identity") cfg.featurize_mode = FeaturizeMode::Identity;
            else if (value == "mtfidf") cfg.featurize_mode = FeaturizeMode::MTfidf;
            else bad_value(key, value);
        } else if (key == "featurize.log_base") {
            if (value == "e") cfg.featurize_log_base = kNaturalLog;
            else {
                cfg.featurize_log_base = parse_double(key, value);
                if (cfg.featurize_log_base <= 1.0) bad_value(key, value);
            }
        } else if (key == "split.strategy") {
            if (value == "planetoid") cfg.split.strategy = SplitStrategy::Planetoid;
            else if (value == "stratified") cfg.split.strategy = SplitStrategy::StratifiedRandom;
            else bad_value(key, value);
        } else if (key == "split.train_per_class")
            cfg.split.train_per_class = static_cast<int>(parse_long(key, value));
        else if (key == "split.val_count") cfg.split.val_count = static_cast<int>(parse_long(key, value));
        else if (key == "split.test_count") cfg.split.test_count = static_cast<int>(parse_long(key, value));
        else if (key == "split.train_frac") cfg.split.train_frac = parse_double(key, value);
        else if (key == "split.val_frac") cfg.split.val_frac = parse_double(key, value);
        else if (key == "split.test_frac") cfg.split.test_frac = parse_double(key, value);
        else if (key == "split.seed") {
            if (value == "auto") cfg.split_seed.reset();
            else cfg.split_seed = parse_u64(key, value);
        } else if (key == "net.hidden") {
            cfg.hidden_widths.clear();
            for (const auto& item : split_list(value))
                cfg.hidden_widths.push_back(static_cast<int>(parse_long(key, item)));
            if (cfg.hidden_widths.empty()) bad_value(key, value);
        } else if (key == "net.dropout") cfg.dropout_rate = parse_double(key, value);
        else if (key == "net.batchnorm") cfg.batchnorm = parse_bool(key, value);
        else if (key == "net.bn_epsilon") cfg.bn_epsilon = parse_double(key, value);
        else if (key == "net.bn_momentum") cfg.bn_momentum = parse_double(key, value);
        else if (key == "net.activation") cfg.activation = activation_from_string(value);
        else if (key == "net.latent_layer") cfg.latent_layer = static_cast<int>(parse_long(key, value));
        else if (key == "loss.metric") cfg.loss.metric = metric_from_string(value);
        else if (key == "loss.alpha_ll") cfg.loss.alpha_ll = parse_double(key, value);
        else if (key == "loss.alpha_lu") cfg.loss.alpha_lu = parse_double(key, value);
        else if (key == "loss.alpha_uu") cfg.loss.alpha_uu = parse_double(key, value);
        else if (key == "loss.cosine_epsilon") cfg.loss.cosine_epsilon = parse_double(key, value);
        else if (key == "loss.average_buckets") cfg.loss.average_buckets = parse_bool(key, value);
        else if (key == "train.learning_rate") cfg.train.learning_rate = parse_double(key, value);
        else if (key == "train.beta1") cfg.train.beta1 = parse_double(key, value);
        else if (key == "train.beta2") cfg.train.beta2 = parse_double(key, value);
        else if (key == "train.adam_epsilon") cfg.train.adam_epsilon = parse_double(key, value);
        else if (key == "train.weight_decay") cfg.train.weight_decay = parse_double(key, value);
        else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(parse_long(key, value));
        else if (key == "train.patience") cfg.train.patience = static_cast<int>(parse_long(key, value));
        else if (key == "train.batch_mode") {
            if (value == "full") cfg.train.batch_mode = TrainConfig::BatchMode::Full;
            else if (value == "edge-sampled") cfg.train.batch_mode = TrainConfig::BatchMode::EdgeSampled;
            else bad_value(key, value);
        } else if (key == "train.batch_edges")
            cfg.train.batch_edges = static_cast<int>(parse_long(key, value));
        else if (key == "train.precision") {
            if (value == "f64") cfg.precision = Precision::F64;
            else if (value == "f32") cfg.precision = Precision::F32;
            else bad_value(key, value);
        } else if (key == "train.record_timing") cfg.train.record_timing = parse_bool(key, value);
        else if (key == "run.seeds") {
            cfg.seeds.clear();
            for (const auto& item : split_list(value)) cfg.seeds.push_back(parse_u64(key, item));
            if (cfg.seeds.empty()) bad_value(key, value);
        } else if (key == "run.output_dir") cfg.output_dir = value;
        else throw std::runtime_error("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string> to_key_values(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["dataset.name"] = cfg.dataset_name;
    kv["dataset.content"] = cfg.content_path;
    kv["dataset.cites"] = cfg.cites_path;
    kv["dataset.ignore_edges"] = cfg.ignore_edges ? "true" : "false";
    kv["featurize.mode"] = cfg.featurize_mode == FeaturizeMode::Identity ? "identity" : "mtfidf";
    kv["featurize.log_base"] =
        cfg.featurize_log_base == kNaturalLog ? "e" : format_double(cfg.featurize_log_base);
    kv["split.strategy"] =
        cfg.split.strategy == SplitStrategy::Planetoid ? "planetoid" : "stratified";
    kv["split.train_per_class"] = std::to_string(cfg.split.train_per_class);
    kv["split.val_count"] = std::to_string(cfg.split.val_count);
    kv["split.test_count"] = std::to_string(cfg.split.test_count);
    kv["split.train_frac"] = format_double(cfg.split.train_frac);
    kv["split.val_frac"] = format_double(cfg.split.val_frac);
    kv["split.test_frac"] = format_double(cfg.split.test_frac);
    kv["split.seed"] = cfg.split_seed ? std::to_string(*cfg.split_seed) : "auto";
    {
        std::string list;
        for (std::size_t i = 0; i < cfg.hidden_widths.size(); ++i) {
            if (i) list += ',';
            list += std::to_string(cfg.hidden_widths[i]);
        }
        kv["net.hidden"] = list;
    }
    kv["net.dropout"] = format_double(cfg.dropout_rate);
    kv["net.batchnorm"] = cfg.batchnorm ? "true" : "false";
    kv["net.bn_epsilon"] = format_double(cfg.bn_epsilon);
    kv["net.bn_momentum"] = format_double(cfg.bn_momentum);
    kv["net.activation"] = to_string(cfg.activation);
    kv["net.latent_layer"] = std::to_string(cfg.latent_layer);
    kv["loss.metric"] = to_string(cfg.loss.metric);
    kv["loss.alpha_ll"] = format_double(cfg.loss.alpha_ll);
    kv["loss.alpha_lu"] = format_double(cfg.loss.alpha_lu);
    kv["loss.alpha_uu"] = format_double(cfg.loss.alpha_uu);
    kv["loss.cosine_epsilon"] = format_double(cfg.loss.cosine_epsilon);
    kv["loss.average_buckets"] = cfg.loss.average_buckets ? "true" : "false";
    kv["train.learning_rate"] = format_double(cfg.train.learning_rate);
    kv["train.beta1"] = format_double(cfg.train.beta1);
    kv["train.beta2"] = format_double(cfg.train.beta2);
    kv["train.adam_epsilon"] = format_double(cfg.train.adam_epsilon);
    kv["train.weight_decay"] = format_double(cfg.train.weight_decay);
    kv["train.epochs"] = std::to_string(cfg.train.epochs);
    kv["train.patience"] = std::to_string(cfg.train.patience);
    kv["train.batch_mode"] =
        cfg.train.batch_mode == TrainConfig::BatchMode::Full ? "full" : "edge-sampled";
    kv["train.batch_edges"] = std::to_string(cfg.train.batch_edges);
    kv["train.precision"] = cfg.precision == Precision::F64 ? "f64" : "f32";
    kv["train.record_timing"] = cfg.train.record_timing ? "true" : "false";
    {
        std::string list;
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
            if (i) list += ',';
            list += std::to_string(cfg.seeds[i]);
        }
        kv["run.seeds"] = list;
    }
    kv["run.output_dir"] = cfg.output_dir;
    return kv;
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, value] : to_key_values(cfg)) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    }
    return out;
}

} // namespace nodenet

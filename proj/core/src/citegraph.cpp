#include "nodenet/citegraph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "nodenet/rng.hpp"

namespace nodenet {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

double parse_feature(std::string_view token, long line_no) {
    double value = 0.0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw std::runtime_error("content line " + std::to_string(line_no) +
                                 ": invalid feature value '" + std::string(token) + "'");
    }
    return value;
}

void append_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

} // namespace

void CitationGraph::validate() const {
    const int n = num_nodes();
    if (static_cast<int>(features.rows()) != n || static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("graph: node_ids, features and labels disagree on n");
    if (num_classes < 2) throw std::invalid_argument("graph: num_classes must be >= 2");
    if (static_cast<int>(label_names.size()) != num_classes)
        throw std::invalid_argument("graph: label_names size does not match num_classes");
    for (int y : labels)
        if (y < 0 || y >= num_classes) throw std::invalid_argument("graph: label index out of range");
    std::set<std::pair<int, int>> seen;
    for (auto [u, v] : edges) {
        if (u == v) throw std::invalid_argument("graph: self-loop present");
        if (u > v) throw std::invalid_argument("graph: edge not normalized to u < v");
        if (u < 0 || v >= n) throw std::invalid_argument("graph: edge endpoint out of range");
        if (!seen.insert({u, v}).second) throw std::invalid_argument("graph: duplicate edge");
    }
}

void SplitMasks::validate(const CitationGraph& graph) const {
    const int n = graph.num_nodes();
    std::vector<char> owner(static_cast<std::size_t>(n), 0);
    auto claim = [&](const std::vector<int>& idx, const char* name) {
        for (int i : idx) {
            if (i < 0 || i >= n)
                throw std::invalid_argument(std::string("split: ") + name + " index out of range");
            if (owner[static_cast<std::size_t>(i)]++)
                throw std::invalid_argument("split: node assigned to more than one set");
        }
    };
    claim(train_idx, "train");
    claim(val_idx, "val");
    claim(test_idx, "test");
    if (train_idx.empty()) throw std::invalid_argument("split: train set is empty");
    std::vector<char> covered(static_cast<std::size_t>(graph.num_classes), 0);
    for (int i : train_idx) covered[static_cast<std::size_t>(graph.labels[static_cast<std::size_t>(i)])] = 1;
    for (int k = 0; k < graph.num_classes; ++k)
        if (!covered[static_cast<std::size_t>(k)])
            throw std::invalid_argument("split: class " + std::to_string(k) + " has no train node");
}

ContentData parse_content(std::istream& in) {
    ContentData out;
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    long expected_cols = -1;
    while (std::getline(in, line)) {
        ++line_no;
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (expected_cols < 0) {
            expected_cols = static_cast<long>(tokens.size());
            if (expected_cols < 3)
                throw std::runtime_error("content line " + std::to_string(line_no) +
                                         ": expected at least 3 columns (id, features, label)");
        } else if (static_cast<long>(tokens.size()) != expected_cols) {
            throw std::runtime_error("content line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(expected_cols) + " columns, got " +
                                     std::to_string(tokens.size()));
        }
        out.node_ids.emplace_back(tokens.front());
        out.label_strings.emplace_back(tokens.back());
        std::vector<double> feats(tokens.size() - 2);
        for (std::size_t j = 1; j + 1 < tokens.size(); ++j)
            feats[j - 1] = parse_feature(tokens[j], line_no);
        rows.push_back(std::move(feats));
    }
    const std::size_t n = rows.size();
    const std::size_t f = n ? rows.front().size() : 0;
    out.features = Matrix<double>(n, f);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(rows[i].begin(), rows[i].end(), out.features.row(i));
    return out;
}

std::unordered_map<std::string, int> build_id_index(const std::vector<std::string>& node_ids) {
    std::unordered_map<std::string, int> index;
    index.reserve(node_ids.size());
    for (std::size_t i = 0; i < node_ids.size(); ++i) {
        if (!index.emplace(node_ids[i], static_cast<int>(i)).second)
            throw std::runtime_error("duplicate node id '" + node_ids[i] + "'");
    }
    return index;
}

CitesResult parse_cites(std::istream& in, const std::unordered_map<std::string, int>& id_index) {
    CitesResult res;
    std::set<std::pair<int, int>> unique;
    std::string line;
    while (std::getline(in, line)) {
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        ++res.raw_line_count;
        if (tokens.size() != 2) {
            ++res.unknown_id_count;  // malformed line, treat like an unresolvable reference
            continue;
        }
        auto a = id_index.find(std::string(tokens[0]));
        auto b = id_index.find(std::string(tokens[1]));
        if (a == id_index.end() || b == id_index.end()) {
            ++res.unknown_id_count;
            continue;
        }
        int u = a->second, v = b->second;
        if (u == v) {
            ++res.self_loop_count;
            continue;
        }
        if (u > v) std::swap(u, v);
        if (!unique.insert({u, v}).second) ++res.duplicate_count;
    }
    res.edges.assign(unique.begin(), unique.end());
    return res;
}

void write_content(const CitationGraph& graph, std::ostream& out) {
    std::string line;
    for (int i = 0; i < graph.num_nodes(); ++i) {
        line.clear();
        line += graph.node_ids[static_cast<std::size_t>(i)];
        for (int j = 0; j < graph.num_features(); ++j) {
            line += '\t';
            append_double(line, graph.features(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
        }
        line += '\t';
        line += graph.label_names[static_cast<std::size_t>(graph.labels[static_cast<std::size_t>(i)])];
        line += '\n';
        out << line;
    }
}

LoadedDataset load_dataset(const std::string& content_path, const std::string& cites_path,
                           bool ignore_edges) {
    std::ifstream content(content_path);
    if (!content) throw std::runtime_error("cannot open content file: " + content_path);
    ContentData data = parse_content(content);
    if (data.node_ids.empty()) throw std::runtime_error("content file has no rows: " + content_path);

    LoadedDataset out;
    out.graph.node_ids = std::move(data.node_ids);
    out.graph.features = std::move(data.features);

    // Deterministic label mapping: lexicographic order of the distinct strings.
    std::map<std::string, int> label_index;
    for (const auto& s : data.label_strings) label_index.emplace(s, 0);
    int next = 0;
    for (auto& [name, idx] : label_index) {
        idx = next++;
        out.graph.label_names.push_back(name);
    }
    out.graph.num_classes = next;
    out.graph.labels.reserve(data.label_strings.size());
    for (const auto& s : data.label_strings) out.graph.labels.push_back(label_index.at(s));

    if (!ignore_edges) {
        std::ifstream cites(cites_path);
        if (!cites) throw std::runtime_error("cannot open cites file: " + cites_path);
        auto index = build_id_index(out.graph.node_ids);
        CitesResult res = parse_cites(cites, index);
        out.graph.edges = std::move(res.edges);
        out.raw_cite_lines = res.raw_line_count;
        out.self_loops = res.self_loop_count;
        out.unknown_ids = res.unknown_id_count;
        out.duplicate_cites = res.duplicate_count;
    }
    return out;
}

namespace {

std::vector<std::vector<int>> indices_by_class(const CitationGraph& graph) {
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(graph.num_classes));
    for (int i = 0; i < graph.num_nodes(); ++i)
        by_class[static_cast<std::size_t>(graph.labels[static_cast<std::size_t>(i)])].push_back(i);
    return by_class;
}

void finish(SplitMasks& masks) {
    std::sort(masks.train_idx.begin(), masks.train_idx.end());
    std::sort(masks.val_idx.begin(), masks.val_idx.end());
    std::sort(masks.test_idx.begin(), masks.test_idx.end());
}

} // namespace

SplitMasks make_split(const CitationGraph& graph, const SplitSpec& spec, std::uint64_t seed) {
    auto by_class = indices_by_class(graph);
    for (std::size_t k = 0; k < by_class.size(); ++k)
        if (by_class[k].empty())
            throw std::runtime_error("split: class " + std::to_string(k) + " has no nodes");

    Rng rng = Rng::derive(seed, 0xC17E5);
    SplitMasks masks;

    if (spec.strategy == SplitStrategy::Planetoid) {
        if (spec.train_per_class < 1) throw std::runtime_error("split: train_per_class must be >= 1");
        const long train_total = static_cast<long>(spec.train_per_class) * graph.num_classes;
        if (train_total < graph.num_classes)
            throw std::runtime_error("split: requested train count smaller than number of classes");
        std::vector<char> in_train(static_cast<std::size_t>(graph.num_nodes()), 0);
        for (auto& bucket : by_class) {
            if (static_cast<int>(bucket.size()) < spec.train_per_class)
                throw std::runtime_error("split: a class has fewer nodes than train_per_class");
            rng.shuffle(bucket);
            for (int i = 0; i < spec.train_per_class; ++i) {
                masks.train_idx.push_back(bucket[static_cast<std::size_t>(i)]);
                in_train[static_cast<std::size_t>(bucket[static_cast<std::size_t>(i)])] = 1;
            }
        }
        std::vector<int> pool;
        for (int i = 0; i < graph.num_nodes(); ++i)
            if (!in_train[static_cast<std::size_t>(i)]) pool.push_back(i);
        if (static_cast<long>(pool.size()) < static_cast<long>(spec.val_count) + spec.test_count)
            throw std::runtime_error("split: not enough nodes left for val/test counts");
        rng.shuffle(pool);
        masks.val_idx.assign(pool.begin(), pool.begin() + spec.val_count);
        masks.test_idx.assign(pool.begin() + spec.val_count,
                              pool.begin() + spec.val_count + spec.test_count);
    } else {
        if (spec.train_frac <= 0.0 || spec.val_frac < 0.0 || spec.test_frac < 0.0 ||
            spec.train_frac + spec.val_frac + spec.test_frac > 1.0 + 1e-9)
            throw std::runtime_error("split: fractions must be positive-train and sum to at most 1");
        const bool covers_all = spec.train_frac + spec.val_frac + spec.test_frac > 1.0 - 1e-9;
        for (auto& bucket : by_class) {
            rng.shuffle(bucket);
            const auto c = static_cast<long>(bucket.size());
            long n_train = std::max<long>(1, static_cast<long>(spec.train_frac * static_cast<double>(c)));
            long n_val = static_cast<long>(spec.val_frac * static_cast<double>(c));
            if (n_train + n_val > c) n_val = c - n_train;
            long n_test = covers_all ? c - n_train - n_val
                                     : static_cast<long>(spec.test_frac * static_cast<double>(c));
            n_test = std::min(n_test, c - n_train - n_val);
            for (long i = 0; i < n_train; ++i) masks.train_idx.push_back(bucket[static_cast<std::size_t>(i)]);
            for (long i = 0; i < n_val; ++i)
                masks.val_idx.push_back(bucket[static_cast<std::size_t>(n_train + i)]);
            for (long i = 0; i < n_test; ++i)
                masks.test_idx.push_back(bucket[static_cast<std::size_t>(n_train + n_val + i)]);
        }
        if (static_cast<int>(masks.train_idx.size()) < graph.num_classes)
            throw std::runtime_error("split: requested train count smaller than number of classes");
    }

    finish(masks);
    masks.validate(graph);
    return masks;
}

EdgePartition partition_edges(const CitationGraph& graph, const SplitMasks& masks,
                              double default_weight) {
    masks.validate(graph);
    std::vector<char> labeled(static_cast<std::size_t>(graph.num_nodes()), 0);
    for (int i : masks.train_idx) labeled[static_cast<std::size_t>(i)] = 1;
    EdgePartition part;
    for (auto [u, v] : graph.edges) {
        const int count = labeled[static_cast<std::size_t>(u)] + labeled[static_cast<std::size_t>(v)];
        WeightedEdge e{u, v, default_weight};
        if (count == 2)
            part.ll.push_back(e);
        else if (count == 1)
            part.lu.push_back(e);
        else
            part.uu.push_back(e);
    }
    return part;
}

} // namespace nodenet

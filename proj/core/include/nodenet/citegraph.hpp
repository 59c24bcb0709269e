#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nodenet/matrix.hpp"

namespace nodenet {

// Citation dataset loading in the standard `.content`/`.cites` layout,
// split construction, and the labeled/unlabeled edge partition that the
// graph loss consumes.

struct CitationGraph {
    std::vector<std::string> node_ids;
    Matrix<double> features;                 // n x f, non-negative
    std::vector<int> labels;                 // class indices in [0, num_classes)
    std::vector<std::pair<int, int>> edges;  // undirected, u < v, sorted, unique
    int num_classes = 0;
    std::vector<std::string> label_names;    // class index -> original label string

    int num_nodes() const { return static_cast<int>(node_ids.size()); }
    int num_features() const { return static_cast<int>(features.cols()); }

    // Checks the structural invariants; throws std::invalid_argument.
    void validate() const;
};

struct SplitMasks {
    std::vector<int> train_idx;
    std::vector<int> val_idx;
    std::vector<int> test_idx;

    // Disjointness, range, and the at-least-one-train-node-per-class rule.
    void validate(const CitationGraph& graph) const;
};

struct WeightedEdge {
    int u;
    int v;
    double weight;
};

struct EdgePartition {
    std::vector<WeightedEdge> ll;  // both endpoints in train set
    std::vector<WeightedEdge> lu;  // exactly one endpoint in train set
    std::vector<WeightedEdge> uu;  // neither endpoint in train set

    std::size_t total_edges() const { return ll.size() + lu.size() + uu.size(); }
};

struct ContentData {
    std::vector<std::string> node_ids;
    Matrix<double> features;
    std::vector<std::string> label_strings;  // verbatim, in file order
};

// Each non-empty line: <id> <f feature values> <label>, whitespace separated.
// Column count is fixed by the first line; violations name the line number.
ContentData parse_content(std::istream& in);

struct CitesResult {
    std::vector<std::pair<int, int>> edges;  // deduplicated undirected, u < v, sorted
    long raw_line_count = 0;                 // non-empty citation lines seen
    long self_loop_count = 0;
    long unknown_id_count = 0;               // lines referencing ids missing from the index
    long duplicate_count = 0;                // repeated unordered pairs
};

// Each line: <cited_id> <citing_id>. Self-loops and unknown ids are dropped
// and counted, never fatal.
CitesResult parse_cites(std::istream& in, const std::unordered_map<std::string, int>& id_index);

std::unordered_map<std::string, int> build_id_index(const std::vector<std::string>& node_ids);

// Writes the graph back in .content layout (feature values round-trip).
void write_content(const CitationGraph& graph, std::ostream& out);

struct LoadedDataset {
    CitationGraph graph;
    long raw_cite_lines = 0;
    long self_loops = 0;
    long unknown_ids = 0;
    long duplicate_cites = 0;
};

// Label strings are mapped to indices in lexicographic order so the mapping
// is independent of file row order.
LoadedDataset load_dataset(const std::string& content_path, const std::string& cites_path,
                           bool ignore_edges = false);

enum class SplitStrategy {
    Planetoid,         // fixed counts: train_per_class / val_count / test_count
    StratifiedRandom,  // per-class fractions
};

struct SplitSpec {
    SplitStrategy strategy = SplitStrategy::Planetoid;
    int train_per_class = 20;
    int val_count = 500;
    int test_count = 1000;
    double train_frac = 0.6;
    double val_frac = 0.2;
    double test_frac = 0.2;
};

// Deterministic for (graph, spec, seed).
SplitMasks make_split(const CitationGraph& graph, const SplitSpec& spec, std::uint64_t seed);

// Buckets every edge by train-set membership of its endpoints. "Labeled"
// means train: validation and test nodes count as unlabeled for the loss.
EdgePartition partition_edges(const CitationGraph& graph, const SplitMasks& masks,
                              double default_weight = 1.0);

} // namespace nodenet

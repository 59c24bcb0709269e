#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "nodenet/citegraph.hpp"
#include "nodenet/rng.hpp"
#include "support/synthetic.hpp"

using namespace nodenet;

TEST_CASE("parse_content echoes a small well-formed file") {
    std::istringstream in("a1 1 0 0.5 physics\nb2\t0\t1\t2\tbiology\n");
    ContentData data = parse_content(in);
    REQUIRE(data.node_ids == std::vector<std::string>{"a1", "b2"});
    REQUIRE(data.features.rows() == 2);
    REQUIRE(data.features.cols() == 3);
    CHECK(data.features(0, 2) == 0.5);
    CHECK(data.features(1, 2) == 2.0);
    CHECK(data.label_strings == std::vector<std::string>{"physics", "biology"});
}

TEST_CASE("parse_content rejects ragged and non-numeric rows") {
    std::istringstream ragged("a 1 0 x1\nb 1 x2\n");
    CHECK_THROWS_WITH_AS(parse_content(ragged), doctest::Contains("line 2"), std::runtime_error);

    std::istringstream bad("a 1 zebra x\n");
    CHECK_THROWS_WITH_AS(parse_content(bad), doctest::Contains("zebra"), std::runtime_error);
}

TEST_CASE("parse_cites deduplicates reversed pairs and drops self-loops") {
    const std::unordered_map<std::string, int> index{{"A", 0}, {"B", 1}};
    SUBCASE("A-B and B-A collapse to one undirected edge") {
        std::istringstream in("A B\nB A\n");
        CitesResult res = parse_cites(in, index);
        CHECK(res.edges == std::vector<std::pair<int, int>>{{0, 1}});
        CHECK(res.raw_line_count == 2);
        CHECK(res.duplicate_count == 1);
    }
    SUBCASE("self-loop dropped and counted") {
        std::istringstream in("A A\n");
        CitesResult res = parse_cites(in, index);
        CHECK(res.edges.empty());
        CHECK(res.self_loop_count == 1);
    }
    SUBCASE("unknown ids dropped and counted") {
        std::istringstream in("A Z\nQ B\nA B\n");
        CitesResult res = parse_cites(in, index);
        CHECK(res.edges.size() == 1);
        CHECK(res.unknown_id_count == 2);
        CHECK(res.raw_line_count == 3);
    }
}

TEST_CASE("duplicate node ids are rejected") {
    CHECK_THROWS_AS(build_id_index({"a", "b", "a"}), std::runtime_error);
}

namespace {

CitationGraph tiny_graph() {
    CitationGraph g;
    g.node_ids = {"A", "B", "C"};
    g.features = Matrix<double>(3, 2, 1.0);
    g.labels = {0, 1, 0};
    g.num_classes = 2;
    g.label_names = {"x", "y"};
    g.edges = {{0, 1}, {1, 2}};
    g.validate();
    return g;
}

} // namespace

TEST_CASE("stratified-random 60/20/20 on a balanced 10-node 2-class graph") {
    CitationGraph g;
    for (int i = 0; i < 10; ++i) {
        g.node_ids.push_back("n" + std::to_string(i));
        g.labels.push_back(i % 2);
    }
    g.features = Matrix<double>(10, 1, 1.0);
    g.num_classes = 2;
    g.label_names = {"a", "b"};
    g.validate();

    SplitSpec spec;
    spec.strategy = SplitStrategy::StratifiedRandom;
    SplitMasks masks = make_split(g, spec, 99);
    CHECK(masks.train_idx.size() == 6);
    CHECK(masks.val_idx.size() == 2);
    CHECK(masks.test_idx.size() == 2);

    std::set<int> train_classes;
    for (int i : masks.train_idx) train_classes.insert(g.labels[static_cast<std::size_t>(i)]);
    CHECK(train_classes.size() == 2);

    SUBCASE("same seed twice gives identical masks") {
        SplitMasks again = make_split(g, spec, 99);
        CHECK(again.train_idx == masks.train_idx);
        CHECK(again.val_idx == masks.val_idx);
        CHECK(again.test_idx == masks.test_idx);
    }
    SUBCASE("different seed moves nodes") {
        SplitMasks other = make_split(g, spec, 100);
        CHECK((other.train_idx != masks.train_idx || other.val_idx != masks.val_idx));
    }
}

TEST_CASE("planetoid split takes 20 per class, 500 val, 1000 test") {
    testsupport::SyntheticSpec spec;
    spec.nodes = 1700;
    spec.classes = 7;
    spec.features = 14;
    spec.p_in = 0.004;
    spec.p_out = 0.0005;
    CitationGraph g = testsupport::make_synthetic_graph(spec);

    SplitSpec split;  // planetoid defaults
    SplitMasks masks = make_split(g, split, 3);
    CHECK(masks.train_idx.size() == 140);  // 20 x 7 classes
    CHECK(masks.val_idx.size() == 500);
    CHECK(masks.test_idx.size() == 1000);
    masks.validate(g);
}

TEST_CASE("split error paths") {
    CitationGraph g = tiny_graph();
    SplitSpec spec;
    spec.strategy = SplitStrategy::Planetoid;
    spec.train_per_class = 0;
    CHECK_THROWS_AS(make_split(g, spec, 1), std::runtime_error);

    spec.train_per_class = 1;
    spec.val_count = 5;  // not enough nodes left
    spec.test_count = 5;
    CHECK_THROWS_AS(make_split(g, spec, 1), std::runtime_error);
}

TEST_CASE("partition_edges buckets by train membership") {
    CitationGraph g = tiny_graph();  // edges (A,B), (B,C)
    SplitMasks masks;
    masks.train_idx = {0, 1};  // A, B labeled
    masks.test_idx = {2};

    EdgePartition part = partition_edges(g, masks);
    REQUIRE(part.ll.size() == 1);
    CHECK(part.ll[0].u == 0);
    CHECK(part.ll[0].v == 1);
    CHECK(part.ll[0].weight == 1.0);
    REQUIRE(part.lu.size() == 1);
    CHECK(part.lu[0].u == 1);
    CHECK(part.lu[0].v == 2);
    CHECK(part.uu.empty());

    SUBCASE("all nodes labeled leaves lu and uu empty") {
        SplitMasks all;
        all.train_idx = {0, 1, 2};
        EdgePartition p = partition_edges(g, all);
        CHECK(p.ll.size() == 2);
        CHECK(p.lu.empty());
        CHECK(p.uu.empty());
    }
}

TEST_CASE("partition matches a per-edge membership recheck on random graphs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        testsupport::SyntheticSpec spec;
        spec.nodes = 30;
        spec.classes = 3;
        spec.features = 6;
        spec.p_in = 0.2;
        spec.p_out = 0.1;
        spec.seed = seed;
        CitationGraph g = testsupport::make_synthetic_graph(spec);
        SplitSpec split;
        split.strategy = SplitStrategy::StratifiedRandom;
        SplitMasks masks = make_split(g, split, seed + 7);
        EdgePartition part = partition_edges(g, masks);

        CHECK(part.total_edges() == g.edges.size());

        // Independent recheck, one edge at a time.
        std::set<int> train(masks.train_idx.begin(), masks.train_idx.end());
        std::set<std::pair<int, int>> ll, lu, uu;
        for (auto [u, v] : g.edges) {
            const int c = static_cast<int>(train.count(u)) + static_cast<int>(train.count(v));
            (c == 2 ? ll : c == 1 ? lu : uu).insert({u, v});
        }
        auto as_set = [](const std::vector<WeightedEdge>& b) {
            std::set<std::pair<int, int>> s;
            for (const auto& e : b) s.insert({e.u, e.v});
            return s;
        };
        CHECK(as_set(part.ll) == ll);
        CHECK(as_set(part.lu) == lu);
        CHECK(as_set(part.uu) == uu);

        // Only train membership matters: swapping val and test changes nothing.
        SplitMasks swapped = masks;
        std::swap(swapped.val_idx, swapped.test_idx);
        EdgePartition part2 = partition_edges(g, swapped);
        CHECK(as_set(part2.ll) == ll);
        CHECK(as_set(part2.lu) == lu);
        CHECK(as_set(part2.uu) == uu);
    }
}

TEST_CASE("content round-trips through write_content and parse_content") {
    testsupport::SyntheticSpec spec;
    spec.nodes = 40;
    spec.classes = 4;
    spec.features = 9;
    CitationGraph g = testsupport::make_synthetic_graph(spec);

    std::stringstream buffer;
    write_content(g, buffer);
    ContentData reparsed = parse_content(buffer);

    CHECK(reparsed.node_ids == g.node_ids);
    CHECK(reparsed.features == g.features);
    for (std::size_t i = 0; i < reparsed.label_strings.size(); ++i)
        CHECK(reparsed.label_strings[i] ==
              g.label_names[static_cast<std::size_t>(g.labels[i])]);
}

TEST_CASE("load_dataset maps labels lexicographically") {
    const char* content = "n1 1 0 zeta\nn2 0 1 alpha\nn3 1 1 zeta\n";
    const char* cites = "n1 n2\nn2 n3\nn9 n1\n";
    const std::string dir = "load_dataset_tmp";
    std::filesystem::create_directories(dir);
    {
        std::ofstream c(dir + "/d.content");
        c << content;
        std::ofstream e(dir + "/d.cites");
        e << cites;
    }
    LoadedDataset ds = load_dataset(dir + "/d.content", dir + "/d.cites");
    CHECK(ds.graph.label_names == std::vector<std::string>{"alpha", "zeta"});
    CHECK(ds.graph.labels == std::vector<int>{1, 0, 1});
    CHECK(ds.graph.edges.size() == 2);
    CHECK(ds.raw_cite_lines == 3);
    CHECK(ds.unknown_ids == 1);
    std::filesystem::remove_all(dir);
}

#include <gtest/gtest.h>

#include <filesystem>
#include <nlohmann/json.hpp>

#include "mldoc/errors.hpp"
#include "mldoc/graph.hpp"
#include "mldoc/io.hpp"
#include "mldoc/store.hpp"

using namespace mldoc;
namespace fs = std::filesystem;

namespace {

Chunk chunk(const std::string& id) {
    Chunk c;
    c.chunk_id = id;
    c.doc_id = "d";
    c.text_content = id;
    c.page_indices = {0};
    return c;
}

QueryNode node(const std::string& id, const std::string& anchor, std::vector<float> v) {
    QueryNode q;
    q.query_id = id;
    q.chunk_id = anchor;
    q.query_text = "Q " + id;
    q.answer_text = "A " + id;
    Embedding e = Eigen::Map<Embedding>(v.data(), static_cast<Eigen::Index>(v.size()));
    q.embedding = e / e.norm();
    return q;
}

McqGraph small_graph(int k = 1) {
    GraphParams p;
    p.k = k;
    return build_graph({chunk("c0"), chunk("c1")},
                       {node("a", "c0", {1, 0}), node("b", "c0", {0.8f, 0.6f}),
                        node("c", "c1", {0, 1}), node("d", "c1", {-1, 0})},
                       p);
}

fs::path temp_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("mldoc-unit-" + std::to_string(::getpid()) + "-" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST(Graph, EdgesAndAdjacency) {
    const auto g = small_graph();
    EXPECT_EQ(g.params().dim, 2);
    EXPECT_EQ(g.qq_out().at("a").at(0).query_id, "b");
    EXPECT_EQ(g.qq_out().at("c").at(0).query_id, "b");
    // d is equidistant from b and c? No: sim(d,b) = -0.8, sim(d,c) = 0.
    EXPECT_EQ(g.qq_out().at("d").at(0).query_id, "c");
    EXPECT_EQ(g.adjacency().at("b"), (std::set<std::string>{"a", "c"}));
    EXPECT_EQ(g.cq_edges().at("d"), "c1");
    EXPECT_EQ(hop_distances(g, {"a"}, 3), (std::map<std::string, int>{{"a", 0}, {"b", 1}, {"c", 2}, {"d", 3}}));
    EXPECT_EQ(neighbors_within(g, {"d"}, 1), (std::set<std::string>{"c", "d"}));
    EXPECT_THROW(hop_distances(g, {"zz"}, 1), InputError);
}

TEST(Graph, DegreeCappedByNodeCount) {
    const auto g = small_graph(10);
    for (const auto& [id, out] : g.qq_out()) EXPECT_EQ(out.size(), 3u);
}

TEST(Graph, TiesBreakById) {
    GraphParams p;
    p.k = 1;
    const auto g = build_graph({chunk("c")},
                               {node("x", "c", {1, 0}), node("m", "c", {0, 1}), node("b", "c", {0, 1})}, p);
    EXPECT_EQ(g.qq_out().at("x").at(0).query_id, "b");
    EXPECT_EQ(g.qq_out().at("m").at(0).query_id, "b");
}

TEST(Graph, BuildErrorsListOffenders) {
    GraphParams p;
    QueryNode bare = node("n1", "c0", {1, 0});
    bare.embedding.reset();
    try {
        build_graph({chunk("c0")}, {bare, node("n2", "missing", {1, 0}), node("n3", "c0", {1, 0, 0})}, p);
        FAIL() << "expected BuildError";
    } catch (const BuildError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("n1 (no embedding)"), std::string::npos);
        EXPECT_NE(msg.find("n2 (dangling anchor)"), std::string::npos);
        EXPECT_NE(msg.find("n3 (dim 3)"), std::string::npos);
    }
    EXPECT_THROW(build_graph({chunk("c0"), chunk("c0")}, {}, p), BuildError);
    p.k = 0;
    EXPECT_THROW(build_graph({}, {}, p), ConfigError);
}

TEST(Graph, KnnQueriesAndProbeValidation) {
    const auto g = small_graph();
    const Embedding probe = Embedding::Unit(2, 0);
    const auto top = knn_queries(g, probe, 2);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0].query_id, "a");
    EXPECT_DOUBLE_EQ(top[0].sim, 2.0);
    EXPECT_EQ(knn_queries(g, probe, 100).size(), 4u);
    EXPECT_THROW(knn_queries(g, Embedding::Unit(3, 0), 1), InputError);
}

TEST(Store, RoundTripAndLayout) {
    const auto dir = temp_dir("store");
    const auto g = small_graph(2);
    EXPECT_FALSE(has_graph(dir));
    save_graph(g, dir);
    EXPECT_TRUE(has_graph(dir));
    EXPECT_EQ(load_graph(dir), g);
    EXPECT_EQ(fs::file_size(dir / "vectors.bin"), 4u * 2u * sizeof(float));
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(manifest.at("format_version"), kStoreFormatVersion);
    EXPECT_EQ(manifest.at("k"), 2);
    EXPECT_EQ(manifest.at("repr"), "qa");
    fs::remove_all(dir);
}

TEST(Store, MissingOrTruncatedFilesFailToLoad) {
    const auto dir = temp_dir("broken");
    save_graph(small_graph(), dir);
    const std::string vectors = read_file(dir / "vectors.bin");
    write_file(dir / "vectors.bin", vectors.substr(0, vectors.size() - 4));
    EXPECT_THROW(load_graph(dir), LoadError);
    fs::remove(dir / "qq_edges.jsonl");
    EXPECT_THROW(load_graph(dir), LoadError);
    write_file(dir / "manifest.json", "{not json");
    EXPECT_THROW(load_graph(dir), LoadError);
    fs::remove_all(dir);
}

TEST(Store, FromPartsRejectsInconsistentEdges) {
    const auto g = small_graph();
    auto qq = g.qq_out();
    qq["a"][0].query_id = "nope";
    EXPECT_THROW(McqGraph::from_parts(g.params(), g.chunks(), g.queries(), qq), BuildError);
}

#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mldoc/corpus.hpp"
#include "mldoc/embedding.hpp"
#include "mldoc/mdoc2query.hpp"

namespace mldoc {

struct GraphParams {
    int k = 3;
    double epsilon = 1.0;
    Eigen::Index dim = 0;
    NodeRepr repr = NodeRepr::query_plus_answer;

    void validate() const;
    bool operator==(const GraphParams&) const = default;
};

struct ScoredQuery {
    std::string query_id;
    double sim = 0.0;

    bool operator==(const ScoredQuery&) const = default;
};

// (sim desc, id asc)
inline bool ranks_before(const ScoredQuery& a, const ScoredQuery& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.query_id < b.query_id;
}

/// Chunk nodes, query nodes, chunk-query anchor edges and top-k query-query
/// similarity edges. Immutable once built or loaded.
class McqGraph {
public:
    McqGraph() = default;

    const GraphParams& params() const { return params_; }
    const std::map<std::string, Chunk>& chunks() const { return chunks_; }
    const std::map<std::string, QueryNode>& queries() const { return queries_; }
    const std::map<std::string, std::string>& cq_edges() const { return cq_edges_; }
    const std::map<std::string, std::vector<ScoredQuery>>& qq_out() const { return qq_out_; }

    /// Query ids in the row order of `vectors()` (ascending id).
    const std::vector<std::string>& query_order() const { return order_; }
    /// Row i is the embedding of query_order()[i].
    const RowMatrix<float>& vectors() const { return vectors_; }

    const QueryNode& query(const std::string& id) const;
    const Chunk& chunk(const std::string& id) const;

    /// Undirected adjacency over Q-Q edges.
    const std::map<std::string, std::set<std::string>>& adjacency() const { return adjacency_; }

    bool operator==(const McqGraph& other) const;

    // Assembles a graph from already computed parts and checks every invariant.
    static McqGraph from_parts(GraphParams params, std::map<std::string, Chunk> chunks,
                               std::map<std::string, QueryNode> queries,
                               std::map<std::string, std::vector<ScoredQuery>> qq_out);

private:
    void index();

    GraphParams params_;
    std::map<std::string, Chunk> chunks_;
    std::map<std::string, QueryNode> queries_;
    std::map<std::string, std::string> cq_edges_;
    std::map<std::string, std::vector<ScoredQuery>> qq_out_;
    std::vector<std::string> order_;
    RowMatrix<float> vectors_;
    std::map<std::string, std::set<std::string>> adjacency_;
};

/// Exact top-k query-query edges under sim(), ties by query id. Throws
/// BuildError listing every node without an embedding or with a dangling anchor.
McqGraph build_graph(const std::vector<Chunk>& chunks, const std::vector<QueryNode>& nodes,
                     const GraphParams& params);

/// Exact top-`limit` query nodes for a probe, ordered (sim desc, id asc).
std::vector<ScoredQuery> knn_queries(const McqGraph& graph, const Embedding& probe,
                                     std::size_t limit);

/// Every query node's sim to the probe, in query_order().
std::vector<double> probe_sims(const McqGraph& graph, const Embedding& probe);

/// Breadth-first closure over Q-Q edges treated as undirected, depth <= h.
/// Values are minimum hop distances; seeds map to 0.
std::map<std::string, int> hop_distances(const McqGraph& graph,
                                         const std::set<std::string>& seeds, int h);

std::set<std::string> neighbors_within(const McqGraph& graph, const std::set<std::string>& seeds,
                                       int h);

}  // namespace mldoc

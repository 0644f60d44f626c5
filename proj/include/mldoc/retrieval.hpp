#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mldoc/gateway.hpp"
#include "mldoc/graph.hpp"

namespace mldoc {

enum class Aggregation { max, mean };

std::string_view to_string(Aggregation agg);
Aggregation parse_aggregation(std::string_view s);

struct RetrievalConfig {
    int n = 10;
    double alpha = 1.2;
    int h = 2;
    int K = 5;
    Aggregation agg = Aggregation::max;
    NodeRepr repr = NodeRepr::query_plus_answer;
    // Fall back to dense chunk retrieval when no query node clears alpha.
    bool dense_fallback = false;

    void validate(double epsilon) const;
};

struct ExpandedQuery {
    std::string query_id;
    double sim = 0.0;  // to the user query
    int hops = 0;      // minimum distance from any entry node

    bool operator==(const ExpandedQuery&) const = default;
};

struct Supporter {
    std::string query_id;
    double sim = 0.0;
    int hops = 0;

    bool operator==(const Supporter&) const = default;
};

struct ChunkCandidate {
    std::string chunk_id;
    std::vector<Supporter> supporters;  // (sim desc, id asc)
};

struct RankedChunk {
    std::string chunk_id;
    double score = 0.0;
    std::vector<Supporter> supporters;

    bool operator==(const RankedChunk&) const = default;
};

struct RetrievalResult {
    std::string query;
    std::vector<RankedChunk> ranked;
    std::vector<ScoredQuery> entry_nodes;
    std::size_t expanded_count = 0;
    bool used_fallback = false;
};

/// Nodes with sim >= alpha, ordered (sim desc, id asc), truncated to n.
std::vector<ScoredQuery> retrieve_entry_nodes(const McqGraph& graph, const Embedding& user,
                                              int n, double alpha);

/// Entry nodes plus every node within h undirected Q-Q hops. Expanded nodes
/// are not re-filtered by alpha. Ordered (sim desc, id asc).
std::vector<ExpandedQuery> expand_queries(const McqGraph& graph, const Embedding& user,
                                          const std::vector<ScoredQuery>& entries, int h);

/// Anchor chunks of the expanded set, each with all of its supporters. Sorted by chunk id.
std::vector<ChunkCandidate> collect_candidates(const McqGraph& graph,
                                          const std::vector<ExpandedQuery>& expanded);

std::vector<RankedChunk> rank_chunks(const std::vector<ChunkCandidate>& candidates, Aggregation agg);

std::vector<RankedChunk> select_context(const std::vector<RankedChunk>& ranked, int K);

/// Full pipeline for a probe embedding.
RetrievalResult retrieve_embedded(const McqGraph& graph, const Embedding& user,
                                  const RetrievalConfig& cfg);

/// Embeds the user query, then runs retrieve_embedded. Throws ConfigError if
/// cfg.repr differs from the representation the graph was built with.
RetrievalResult retrieve(const McqGraph& graph, const std::string& user_query,
                         const RetrievalConfig& cfg, const Embedder& embedder);

nlohmann::json to_json(const RetrievalResult& result);

// Baselines over raw chunks.

struct ChunkScore {
    std::string chunk_id;
    double score = 0.0;

    bool operator==(const ChunkScore&) const = default;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 over text_content with idf = ln(1 + (N - df + 0.5) / (df + 0.5)).
/// Terms are lowercased word tokens; punctuation-only tokens are ignored and
/// repeated query terms count once. Returns the top K, ties by chunk id.
std::vector<ChunkScore> bm25_retrieve(const std::vector<Chunk>& chunks,
                                      const std::string& user_query, int K,
                                      const std::string& tokenizer_id = "word",
                                      const Bm25Params& params = {});

/// Top K chunks by inner product with the probe, ties by chunk id.
std::vector<ChunkScore> dense_chunk_retrieve(const std::map<std::string, Embedding>& chunk_embeddings,
                                             const Embedding& user, int K);

}  // namespace mldoc

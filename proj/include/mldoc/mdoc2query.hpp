#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mldoc/corpus.hpp"
#include "mldoc/embedding.hpp"
#include "mldoc/gateway.hpp"

namespace mldoc {

enum class QueryLevel { entity_integrated, detailed_content, macro_hierarchy, context_restoration };

std::string_view to_string(QueryLevel level);
/// Accepts "level_1_entity_integrated" style tags or the bare level name.
std::optional<QueryLevel> parse_query_level(std::string_view s);

// How a query node is turned into the text that gets embedded.
enum class NodeRepr { query_only, answer_only, query_plus_answer };

std::string_view to_string(NodeRepr repr);          // "q" | "a" | "qa"
NodeRepr parse_node_repr(std::string_view s);       // accepts short and long names

struct QueryNode {
    std::string query_id;
    std::string chunk_id;
    std::string query_text;
    std::string answer_text;
    std::optional<QueryLevel> level;
    std::optional<Embedding> embedding;

    bool operator==(const QueryNode&) const = default;
};

enum class GenerationMode { chunk_only, page_context };

struct GenerationConfig {
    GenerationMode mode = GenerationMode::chunk_only;
    int max_pairs = 20;
    int min_pairs_page_mode = 5;
    std::string prompt_version = "v1";
    NodeRepr repr = NodeRepr::query_plus_answer;

    void validate() const;
};

std::vector<ChatMessage> build_generation_request(const Chunk& chunk, const Page* page,
                                                  const GenerationConfig& cfg);

/// Extracts the first JSON array from raw model output, keeps objects with a
/// non-empty query and answer, collapses exact duplicates, caps at
/// `max_pairs`, and assigns ids `<chunk_id>-<i>`.
/// Throws GenerationParseError when no array or no valid item is found.
std::vector<QueryNode> parse_generation_response(std::string_view raw,
                                                 const std::string& chunk_id,
                                                 const GenerationConfig& cfg);

struct GenerationDiagnostics {
    int attempts = 0;
    bool skipped = false;
    std::vector<std::string> messages;
};

/// Request, complete, parse. A parse failure is retried once with the same
/// prompt; a second failure yields an empty list and `skipped = true`.
std::vector<QueryNode> generate_queries_for_chunk(const Chunk& chunk, const Page* page,
                                                  const GenerationConfig& cfg,
                                                  const ChatModel& model,
                                                  GenerationDiagnostics* diagnostics = nullptr,
                                                  const DecodeParams& decode = {});

std::string node_text(const QueryNode& node, NodeRepr repr);

/// Attaches unit-norm embeddings of node_text(node, repr). `expected_dim`
/// (when non-zero) is enforced against every returned vector.
std::vector<QueryNode> embed_query_nodes(std::vector<QueryNode> nodes, NodeRepr repr,
                                         const Embedder& embedder,
                                         Eigen::Index expected_dim = 0);

}  // namespace mldoc

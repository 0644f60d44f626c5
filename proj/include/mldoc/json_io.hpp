#pragma once

#include <nlohmann/json.hpp>

#include "mldoc/corpus.hpp"
#include "mldoc/mdoc2query.hpp"

// JSON mappings for the on-disk and wire formats.
namespace mldoc {

nlohmann::json to_json(const DocumentBundle& bundle);
DocumentBundle bundle_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Chunk& chunk);
Chunk chunk_from_json(const nlohmann::json& j);

// {"q_id","chunk_id","query","answer","level"}; the embedding is not included.
nlohmann::json to_json(const QueryNode& node);
QueryNode query_node_from_json(const nlohmann::json& j);

}  // namespace mldoc

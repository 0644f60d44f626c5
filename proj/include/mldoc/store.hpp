#pragma once

#include <filesystem>

#include "mldoc/graph.hpp"

namespace mldoc {

inline constexpr int kStoreFormatVersion = 1;

/// Writes manifest.json, chunks.jsonl, queries.jsonl, vectors.bin (row-major
/// little-endian binary32, row i = i-th line of queries.jsonl) and
/// qq_edges.jsonl into `dir`.
void save_graph(const McqGraph& graph, const std::filesystem::path& dir);

/// Throws LoadError on a missing file, format_version mismatch or checksum failure.
McqGraph load_graph(const std::filesystem::path& dir);

bool has_graph(const std::filesystem::path& dir);

}  // namespace mldoc

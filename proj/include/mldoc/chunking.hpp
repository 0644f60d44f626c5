#pragma once

#include <vector>

#include "mldoc/corpus.hpp"

namespace mldoc {

/// Sliding windows of at most `max_window` tokens; consecutive windows share
/// exactly `overlap` tokens and the last window ends at `token_count`.
std::vector<TokenSpan> segment_text(std::size_t token_count, const ChunkingConfig& cfg);

/// Text elements are joined into one stream and windowed across element
/// boundaries; every figure/table element becomes one image chunk.
/// Chunk ids are `<doc_id>-<ordinal>` in emission order (text windows first).
std::vector<Chunk> assemble_chunks(const DocumentBundle& bundle, const ChunkingConfig& cfg);

}  // namespace mldoc

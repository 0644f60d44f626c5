#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mldoc/corpus.hpp"
#include "mldoc/gateway.hpp"

namespace mldoc {

enum class AnswerMode { plain, page_context };

using PageLookup = std::function<const Page*(const std::string& doc_id, int page_index)>;

/// System prompt plus one user message: the question, then every context
/// chunk in rank order (text part, crop image for image chunks, and in
/// page-context mode the render of each page the chunk comes from).
std::vector<ChatMessage> build_answer_prompt(const std::string& question,
                                             const std::vector<Chunk>& context, AnswerMode mode,
                                             const PageLookup& pages = {});

struct GeneratedAnswer {
    std::string full_text;
    std::string final_answer;
    std::size_t context_used = 0;  // chunks left after overflow handling
};

/// On a context-overflow rejection the lowest-ranked chunk is dropped and the
/// request retried once.
GeneratedAnswer generate_answer(const ChatModel& model, const std::string& question,
                                const std::vector<Chunk>& context, AnswerMode mode,
                                const PageLookup& pages = {}, const DecodeParams& decode = {});

/// Text after the last case-insensitive "Final Answer:" marker, trimmed of
/// whitespace and markdown emphasis; the whole trimmed text when absent.
std::string extract_final_answer(std::string_view text);

/// True for explicit "no answer" statements and negative-existence assertions.
bool is_unanswerable_equivalent(std::string_view text);

}  // namespace mldoc

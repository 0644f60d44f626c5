#include "mldoc/answer.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "mldoc/prompts.hpp"

namespace mldoc {

std::vector<ChatMessage> build_answer_prompt(const std::string& question,
                                             const std::vector<Chunk>& context, AnswerMode mode,
                                             const PageLookup& pages) {
    std::vector<ChatMessage> messages;
    messages.push_back(system_message(std::string(
        mode == AnswerMode::plain ? prompts::response() : prompts::response_page_context())));

    ChatMessage user{Role::user, {TextPart{"Question: " + question}}};
    for (std::size_t i = 0; i < context.size(); ++i) {
        const Chunk& c = context[i];
        std::string header = "Context " + std::to_string(i + 1) + " [" +
                             std::string(to_string(c.content_type)) + ", pages";
        for (int p : c.page_indices) header += " " + std::to_string(p);
        header += "]:\n";
        user.parts.push_back(TextPart{header + c.text_content});
        if (c.image_ref) user.parts.push_back(ImagePart{*c.image_ref});
        if (mode == AnswerMode::page_context) {
            for (int p : c.page_indices) {
                const Page* page = pages ? pages(c.doc_id, p) : nullptr;
                if (page == nullptr || !page->render_ref || page->render_ref->empty()) {
                    throw ConfigError("no page render for " + c.doc_id + " page " +
                                      std::to_string(p) + " (needed by " + c.chunk_id + ")");
                }
                user.parts.push_back(ImagePart{*page->render_ref});
            }
        }
    }
    messages.push_back(std::move(user));
    return messages;
}

GeneratedAnswer generate_answer(const ChatModel& model, const std::string& question,
                                const std::vector<Chunk>& context, AnswerMode mode,
                                const PageLookup& pages, const DecodeParams& decode) {
    std::vector<Chunk> used = context;
    std::string text;
    try {
        text = model.complete(build_answer_prompt(question, used, mode, pages), decode);
    } catch (const ContextOverflowError&) {
        if (used.empty()) throw;
        used.pop_back();
        text = model.complete(build_answer_prompt(question, used, mode, pages), decode);
    }
    return {text, extract_final_answer(text), used.size()};
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s, std::string_view chars) {
    const auto b = s.find_first_not_of(chars);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(chars);
    return s.substr(b, e - b + 1);
}

// Lowercase, punctuation removed (apostrophes dropped so "don't" == "dont"),
// whitespace collapsed.
std::string normalize_phrase(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '\'') {
            continue;
        } else {
            pending_space = true;
        }
    }
    return out;
}

}  // namespace

std::string extract_final_answer(std::string_view text) {
    static constexpr std::string_view marker = "final answer:";
    const std::string lowered = lower(text);
    std::string_view tail = text;
    if (const auto pos = lowered.rfind(marker); pos != std::string::npos) {
        tail = text.substr(pos + marker.size());
    }
    // Emphasis can wrap the marker ("**Final Answer:** 541") or the answer.
    std::string_view out = trim(tail, " \t\r\n*_`");
    return std::string(out);
}

bool is_unanswerable_equivalent(std::string_view text) {
    const std::string s = normalize_phrase(extract_final_answer(text));
    static const char* explicit_phrases[] = {
        "i dont know",
        "i do not know",
        "not answerable",
        "unanswerable",
        "no answer",
        "not enough information",
        "insufficient information",
        "not mentioned",
        "unknown",
        "cannot be determined",
        "can not be determined",
        "cannot determine",
        "no information provided",
        "n a",
        "na",
        "not applicable",
        "none",
        "unable to answer",
        "i cannot answer this question",
        "based on the provided documents i cannot answer this question",
    };
    for (const char* p : explicit_phrases) {
        if (s == p) return true;
    }
    static const std::regex negative_existence[] = {
        std::regex(R"(^there (are|is|were|was) (none|no\b.*)$)"),
        std::regex(R"(^none of\b.*$)"),
        std::regex(R"(^no such\b.*$)"),
        std::regex(R"(^no( \w+)+ (is|are|was|were) (present|found|shown|listed|mentioned|included|available|given|provided)$)"),
        std::regex(R"(^no( \w+)+ (exist|exists|require|requires|appear|appears|contain|contains|have|has)\b.*$)"),
    };
    // Long free-form answers are substantive; also bounds regex backtracking.
    if (s.size() > 200) return false;
    for (const auto& re : negative_existence) {
        if (std::regex_match(s, re)) return true;
    }
    return false;
}

}  // namespace mldoc

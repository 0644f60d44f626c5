#include "mldoc/mdoc2query.hpp"

#include <nlohmann/json.hpp>

#include <set>
#include <utility>

#include "mldoc/prompts.hpp"

namespace mldoc {

using json = nlohmann::json;

std::string_view to_string(QueryLevel level) {
    switch (level) {
        case QueryLevel::entity_integrated: return "level_1_entity_integrated";
        case QueryLevel::detailed_content: return "level_2_detailed_content";
        case QueryLevel::macro_hierarchy: return "level_3_macro_hierarchy";
        case QueryLevel::context_restoration: return "level_4_context_restoration";
    }
    return "";
}

std::optional<QueryLevel> parse_query_level(std::string_view s) {
    static const std::pair<std::string_view, QueryLevel> names[] = {
        {"entity_integrated", QueryLevel::entity_integrated},
        {"detailed_content", QueryLevel::detailed_content},
        {"macro_hierarchy", QueryLevel::macro_hierarchy},
        {"context_restoration", QueryLevel::context_restoration},
    };
    for (const auto& [name, level] : names) {
        if (s == name || s == to_string(level)) return level;
    }
    return std::nullopt;
}

std::string_view to_string(NodeRepr repr) {
    switch (repr) {
        case NodeRepr::query_only: return "q";
        case NodeRepr::answer_only: return "a";
        case NodeRepr::query_plus_answer: return "qa";
    }
    return "qa";
}

NodeRepr parse_node_repr(std::string_view s) {
    if (s == "q" || s == "query_only") return NodeRepr::query_only;
    if (s == "a" || s == "answer_only") return NodeRepr::answer_only;
    if (s == "qa" || s == "query_plus_answer") return NodeRepr::query_plus_answer;
    throw ConfigError("unknown node representation '" + std::string(s) + "'");
}

void GenerationConfig::validate() const {
    if (max_pairs < 1) throw ConfigError("max_pairs must be >= 1");
    if (min_pairs_page_mode < 0) throw ConfigError("min_pairs_page_mode must be >= 0");
    if (prompt_version != prompts::version()) {
        throw ConfigError("prompt version '" + prompt_version + "' is not available (have '" +
                          std::string(prompts::version()) + "')");
    }
}

std::vector<ChatMessage> build_generation_request(const Chunk& chunk, const Page* page,
                                                  const GenerationConfig& cfg) {
    cfg.validate();
    std::vector<ChatMessage> messages;
    ChatMessage user{Role::user, {}};

    if (cfg.mode == GenerationMode::chunk_only) {
        messages.push_back(system_message(std::string(prompts::mdoc2query())));
        if (chunk.image_ref) user.parts.push_back(ImagePart{*chunk.image_ref});
        if (!chunk.text_content.empty() || user.parts.empty()) {
            user.parts.push_back(TextPart{chunk.text_content});
        }
    } else {
        if (page == nullptr || !page->render_ref || page->render_ref->empty()) {
            throw ConfigError("page-context generation for " + chunk.chunk_id +
                              " needs a page with a render_ref");
        }
        messages.push_back(system_message(std::string(prompts::mdoc2query_page_context())));
        user.parts.push_back(TextPart{"Target Chunk (" + std::string(to_string(chunk.content_type)) +
                                      "):\n" + chunk.text_content});
        if (chunk.image_ref) user.parts.push_back(ImagePart{*chunk.image_ref});
        user.parts.push_back(TextPart{"Source Page Image:"});
        user.parts.push_back(ImagePart{*page->render_ref});
    }
    messages.push_back(std::move(user));
    return messages;
}

namespace {

// End offset (exclusive) of the bracketed value starting at `open`, skipping
// string literals and comments, or npos if it is not closed.
std::size_t matching_close(std::string_view s, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '"') {
            for (++i; i < s.size() && s[i] != '"'; ++i) {
                if (s[i] == '\\') ++i;
            }
        } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') {
            while (i < s.size() && s[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
            const auto end = s.find("*/", i + 2);
            if (end == std::string_view::npos) return std::string_view::npos;
            i = end + 1;
        } else if (c == '[' || c == '{') {
            ++depth;
        } else if (c == ']' || c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::optional<json> first_json_array(std::string_view raw) {
    for (std::size_t pos = raw.find('['); pos != std::string_view::npos;
         pos = raw.find('[', pos + 1)) {
        const std::size_t end = matching_close(raw, pos);
        if (end == std::string_view::npos) continue;
        json parsed = json::parse(raw.begin() + static_cast<std::ptrdiff_t>(pos),
                                  raw.begin() + static_cast<std::ptrdiff_t>(end), nullptr,
                                  /*allow_exceptions=*/false, /*ignore_comments=*/true);
        if (parsed.is_array()) return parsed;
    }
    return std::nullopt;
}

std::optional<std::string> field_text(const json& item, const char* key) {
    const auto it = item.find(key);
    if (it == item.end()) return std::nullopt;
    std::string value;
    if (it->is_string()) {
        value = it->get<std::string>();
    } else if (it->is_number()) {
        value = it->dump();
    } else {
        return std::nullopt;
    }
    const auto first = value.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return std::nullopt;
    const auto last = value.find_last_not_of(" \t\r\n");
    return value.substr(first, last - first + 1);
}

}  // namespace

std::vector<QueryNode> parse_generation_response(std::string_view raw,
                                                 const std::string& chunk_id,
                                                 const GenerationConfig& cfg) {
    const auto array = first_json_array(raw);
    if (!array) throw GenerationParseError("no JSON array in generation output", std::string(raw));

    std::vector<QueryNode> nodes;
    std::set<std::pair<std::string, std::string>> seen;
    for (const json& item : *array) {
        if (static_cast<int>(nodes.size()) >= cfg.max_pairs) break;
        if (!item.is_object()) continue;
        auto query = field_text(item, "query");
        auto answer = field_text(item, "answer");
        if (!query || !answer) continue;
        if (!seen.emplace(*query, *answer).second) continue;

        QueryNode node;
        node.query_id = chunk_id + "-" + std::to_string(nodes.size());
        node.chunk_id = chunk_id;
        node.query_text = std::move(*query);
        node.answer_text = std::move(*answer);
        if (cfg.mode == GenerationMode::page_context) {
            if (const auto level = item.find("level"); level != item.end() && level->is_string()) {
                node.level = parse_query_level(level->get<std::string>());
            }
        }
        nodes.push_back(std::move(node));
    }
    if (nodes.empty()) {
        throw GenerationParseError("generation output has no valid query-answer items",
                                   std::string(raw));
    }
    return nodes;
}

std::vector<QueryNode> generate_queries_for_chunk(const Chunk& chunk, const Page* page,
                                                  const GenerationConfig& cfg,
                                                  const ChatModel& model,
                                                  GenerationDiagnostics* diagnostics,
                                                  const DecodeParams& decode) {
    GenerationDiagnostics local;
    GenerationDiagnostics& diag = diagnostics ? *diagnostics : local;
    const auto request = build_generation_request(chunk, page, cfg);
    for (int attempt = 0; attempt < 2; ++attempt) {
        ++diag.attempts;
        const std::string raw = model.complete(request, decode);
        try {
            auto nodes = parse_generation_response(raw, chunk.chunk_id, cfg);
            if (cfg.mode == GenerationMode::page_context &&
                static_cast<int>(nodes.size()) < cfg.min_pairs_page_mode) {
                diag.messages.push_back(chunk.chunk_id + ": " + std::to_string(nodes.size()) +
                                        " pairs, fewer than the page-mode minimum of " +
                                        std::to_string(cfg.min_pairs_page_mode));
            }
            return nodes;
        } catch (const GenerationParseError& e) {
            diag.messages.push_back(chunk.chunk_id + ": attempt " + std::to_string(attempt + 1) +
                                    ": " + e.what());
        }
    }
    diag.skipped = true;
    diag.messages.push_back(chunk.chunk_id + ": skipped after 2 unparseable responses");
    return {};
}

std::string node_text(const QueryNode& node, NodeRepr repr) {
    switch (repr) {
        case NodeRepr::query_only: return node.query_text;
        case NodeRepr::answer_only: return node.answer_text;
        case NodeRepr::query_plus_answer: return node.query_text + "\n" + node.answer_text;
    }
    return node.query_text;
}

std::vector<QueryNode> embed_query_nodes(std::vector<QueryNode> nodes, NodeRepr repr,
                                         const Embedder& embedder, Eigen::Index expected_dim) {
    if (nodes.empty()) return nodes;
    std::vector<std::string> texts;
    texts.reserve(nodes.size());
    for (const auto& n : nodes) texts.push_back(node_text(n, repr));
    auto vectors = embed_texts(embedder, texts);
    Eigen::Index dim = expected_dim;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (dim == 0) dim = vectors[i].size();
        if (vectors[i].size() != dim) {
            throw ProtocolError("embedding dimension drift: expected " + std::to_string(dim) +
                                ", got " + std::to_string(vectors[i].size()) + " for " +
                                nodes[i].query_id);
        }
        nodes[i].embedding = std::move(vectors[i]);
    }
    return nodes;
}

}  // namespace mldoc

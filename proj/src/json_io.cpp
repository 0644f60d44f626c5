#include "mldoc/json_io.hpp"

#include "mldoc/errors.hpp"

namespace mldoc {

using json = nlohmann::json;

namespace {

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

void put_optional(json& j, const char* key, const std::optional<std::string>& v) {
    j[key] = v ? json(*v) : json(nullptr);
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

json to_json(const DocumentBundle& bundle) {
    json pages = json::array();
    for (const Page& p : bundle.pages) {
        json elements = json::array();
        for (const Element& e : p.elements) {
            json je = {{"kind", to_string(e.kind)}};
            put_optional(je, "text", e.text);
            put_optional(je, "image_ref", e.image_ref);
            put_optional(je, "ocr_text", e.ocr_text);
            elements.push_back(std::move(je));
        }
        json jp = {{"page_index", p.page_index}, {"elements", std::move(elements)}};
        put_optional(jp, "render_ref", p.render_ref);
        pages.push_back(std::move(jp));
    }
    return {{"doc_id", bundle.doc_id}, {"source_meta", bundle.source_meta}, {"pages", pages}};
}

DocumentBundle bundle_from_json(const json& j) {
    return guarded("bundle", [&] {
        DocumentBundle b;
        b.doc_id = j.at("doc_id").get<std::string>();
        if (const auto it = j.find("source_meta"); it != j.end() && !it->is_null()) {
            b.source_meta = it->get<std::map<std::string, std::string>>();
        }
        for (const json& jp : j.at("pages")) {
            Page p;
            p.page_index = jp.at("page_index").get<int>();
            p.render_ref = optional_field<std::string>(jp, "render_ref");
            if (const auto it = jp.find("elements"); it != jp.end()) {
                for (const json& je : *it) {
                    Element e;
                    e.kind = parse_element_kind(je.at("kind").get<std::string>());
                    e.text = optional_field<std::string>(je, "text");
                    e.image_ref = optional_field<std::string>(je, "image_ref");
                    e.ocr_text = optional_field<std::string>(je, "ocr_text");
                    p.elements.push_back(std::move(e));
                }
            }
            b.pages.push_back(std::move(p));
        }
        return b;
    });
}

json to_json(const Chunk& c) {
    json j = {{"chunk_id", c.chunk_id},
              {"doc_id", c.doc_id},
              {"modality", to_string(c.modality)},
              {"content_type", to_string(c.content_type)},
              {"text_content", c.text_content},
              {"page_indices", c.page_indices}};
    put_optional(j, "image_ref", c.image_ref);
    j["span"] = c.span ? json::array({c.span->start, c.span->end}) : json(nullptr);
    return j;
}

Chunk chunk_from_json(const json& j) {
    return guarded("chunk", [&] {
        Chunk c;
        c.chunk_id = j.at("chunk_id").get<std::string>();
        c.doc_id = j.at("doc_id").get<std::string>();
        c.modality = parse_modality(j.at("modality").get<std::string>());
        c.content_type = parse_content_type(j.at("content_type").get<std::string>());
        c.text_content = j.at("text_content").get<std::string>();
        c.image_ref = optional_field<std::string>(j, "image_ref");
        c.page_indices = j.at("page_indices").get<std::vector<int>>();
        if (const auto it = j.find("span"); it != j.end() && !it->is_null()) {
            c.span = TokenSpan{it->at(0).get<std::size_t>(), it->at(1).get<std::size_t>()};
        }
        return c;
    });
}

json to_json(const QueryNode& n) {
    return {{"q_id", n.query_id},
            {"chunk_id", n.chunk_id},
            {"query", n.query_text},
            {"answer", n.answer_text},
            {"level", n.level ? json(to_string(*n.level)) : json(nullptr)}};
}

QueryNode query_node_from_json(const json& j) {
    return guarded("query node", [&] {
        QueryNode n;
        n.query_id = j.at("q_id").get<std::string>();
        n.chunk_id = j.at("chunk_id").get<std::string>();
        n.query_text = j.at("query").get<std::string>();
        n.answer_text = j.at("answer").get<std::string>();
        if (const auto level = optional_field<std::string>(j, "level")) {
            n.level = parse_query_level(*level);
        }
        return n;
    });
}

}  // namespace mldoc

#include "mldoc/corpus.hpp"

#include <algorithm>

#include "mldoc/errors.hpp"

namespace mldoc {

std::string_view to_string(ElementKind kind) {
    switch (kind) {
        case ElementKind::paragraph: return "paragraph";
        case ElementKind::title: return "title";
        case ElementKind::equation: return "equation";
        case ElementKind::figure: return "figure";
        case ElementKind::table: return "table";
    }
    return "paragraph";
}

std::string_view to_string(Modality modality) {
    return modality == Modality::text ? "text" : "image";
}

std::string_view to_string(ContentType type) {
    switch (type) {
        case ContentType::paragraph: return "paragraph";
        case ContentType::figure: return "figure";
        case ContentType::table: return "table";
        case ContentType::equation: return "equation";
    }
    return "paragraph";
}

ElementKind parse_element_kind(std::string_view s) {
    if (s == "paragraph") return ElementKind::paragraph;
    if (s == "title") return ElementKind::title;
    if (s == "equation") return ElementKind::equation;
    if (s == "figure") return ElementKind::figure;
    if (s == "table") return ElementKind::table;
    throw InputError("unknown element kind '" + std::string(s) + "'");
}

Modality parse_modality(std::string_view s) {
    if (s == "text") return Modality::text;
    if (s == "image") return Modality::image;
    throw InputError("unknown modality '" + std::string(s) + "'");
}

ContentType parse_content_type(std::string_view s) {
    if (s == "paragraph") return ContentType::paragraph;
    if (s == "figure") return ContentType::figure;
    if (s == "table") return ContentType::table;
    if (s == "equation") return ContentType::equation;
    throw InputError("unknown content type '" + std::string(s) + "'");
}

const Page* DocumentBundle::page(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= pages.size()) return nullptr;
    return &pages[static_cast<std::size_t>(index)];
}

void validate(const DocumentBundle& bundle) {
    if (bundle.doc_id.empty()) throw InputError("bundle doc_id must be non-empty");
    for (std::size_t i = 0; i < bundle.pages.size(); ++i) {
        const Page& page = bundle.pages[i];
        if (page.page_index != static_cast<int>(i)) {
            throw InputError("bundle " + bundle.doc_id + ": page_index " +
                             std::to_string(page.page_index) + " at position " +
                             std::to_string(i) + " (indices must be 0-based and contiguous)");
        }
        for (std::size_t e = 0; e < page.elements.size(); ++e) {
            const Element& el = page.elements[e];
            const std::string where = bundle.doc_id + " page " + std::to_string(i) +
                                      " element " + std::to_string(e);
            if (is_text_kind(el.kind)) {
                if (!el.text) throw InputError(where + ": text element without text");
                if (el.image_ref) throw InputError(where + ": text element with image_ref");
            } else if (!el.image_ref || el.image_ref->empty()) {
                throw InputError(where + ": figure/table element without image_ref");
            }
        }
    }
}

void validate(const Chunk& chunk) {
    if (chunk.modality == Modality::text && chunk.image_ref) {
        throw InputError("chunk " + chunk.chunk_id + ": text chunk carries an image_ref");
    }
    if (chunk.modality == Modality::image && !chunk.image_ref) {
        throw InputError("chunk " + chunk.chunk_id + ": image chunk without image_ref");
    }
    if (chunk.page_indices.empty()) {
        throw InputError("chunk " + chunk.chunk_id + ": empty page_indices");
    }
    if (!std::is_sorted(chunk.page_indices.begin(), chunk.page_indices.end())) {
        throw InputError("chunk " + chunk.chunk_id + ": page_indices not sorted");
    }
}

void ChunkingConfig::validate() const {
    if (max_window < 1) throw ConfigError("max_window must be >= 1");
    if (overlap >= max_window) throw ConfigError("overlap must be < max_window");
}

}  // namespace mldoc

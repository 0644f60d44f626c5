#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mldoc {

enum class ElementKind { paragraph, title, equation, figure, table };
enum class Modality { text, image };
enum class ContentType { paragraph, figure, table, equation };

std::string_view to_string(ElementKind kind);
std::string_view to_string(Modality modality);
std::string_view to_string(ContentType type);
ElementKind parse_element_kind(std::string_view s);
Modality parse_modality(std::string_view s);
ContentType parse_content_type(std::string_view s);

inline bool is_text_kind(ElementKind k) {
    return k == ElementKind::paragraph || k == ElementKind::title || k == ElementKind::equation;
}

// Image references are file paths (relative to the bundle root until the
// bundle is ingested, absolute afterwards) or opaque URIs.
using ImageRef = std::string;

struct Element {
    ElementKind kind = ElementKind::paragraph;
    std::optional<std::string> text;
    std::optional<ImageRef> image_ref;
    std::optional<std::string> ocr_text;

    bool operator==(const Element&) const = default;
};

struct Page {
    int page_index = 0;
    std::vector<Element> elements;
    std::optional<ImageRef> render_ref;

    bool operator==(const Page&) const = default;
};

struct DocumentBundle {
    std::string doc_id;
    std::vector<Page> pages;
    std::map<std::string, std::string> source_meta;

    const Page* page(int index) const;

    bool operator==(const DocumentBundle&) const = default;
};

/// Throws InputError on the first violated invariant.
void validate(const DocumentBundle& bundle);

struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    bool operator==(const TokenSpan&) const = default;
};

struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    Modality modality = Modality::text;
    ContentType content_type = ContentType::paragraph;
    std::string text_content;
    std::optional<ImageRef> image_ref;
    std::vector<int> page_indices;
    std::optional<TokenSpan> span;

    bool operator==(const Chunk&) const = default;
};

void validate(const Chunk& chunk);

struct ChunkingConfig {
    std::size_t max_window = 1200;
    std::size_t overlap = 100;
    std::string tokenizer_id = "word";

    void validate() const;
};

}  // namespace mldoc

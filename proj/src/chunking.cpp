#include "mldoc/chunking.hpp"

#include <algorithm>
#include <set>

#include "mldoc/tokenizer.hpp"

namespace mldoc {

namespace {

constexpr std::string_view kElementSeparator = "\n\n";

// One text element's byte range inside the concatenated stream.
struct StreamPiece {
    std::size_t begin = 0;
    std::size_t end = 0;
    int page_index = 0;
    bool equation = false;
};

}  // namespace

std::vector<TokenSpan> segment_text(std::size_t token_count, const ChunkingConfig& cfg) {
    cfg.validate();
    std::vector<TokenSpan> windows;
    if (token_count == 0) return windows;
    std::size_t start = 0;
    for (;;) {
        const std::size_t end = std::min(start + cfg.max_window, token_count);
        windows.push_back({start, end});
        if (end == token_count) break;
        start = end - cfg.overlap;
    }
    return windows;
}

std::vector<Chunk> assemble_chunks(const DocumentBundle& bundle, const ChunkingConfig& cfg) {
    cfg.validate();
    validate(bundle);

    std::string stream;
    std::vector<StreamPiece> pieces;
    for (const Page& page : bundle.pages) {
        for (const Element& el : page.elements) {
            if (!is_text_kind(el.kind)) continue;
            if (!pieces.empty()) stream.append(kElementSeparator);
            const std::size_t begin = stream.size();
            stream.append(*el.text);
            pieces.push_back({begin, stream.size(), page.page_index, el.kind == ElementKind::equation});
        }
    }

    std::vector<Chunk> chunks;
    std::size_t ordinal = 0;
    auto next_id = [&] { return bundle.doc_id + "-" + std::to_string(ordinal++); };

    const std::vector<Token> tokens = tokenize_spans(stream, cfg.tokenizer_id);
    // Equations are windowed with the surrounding text; a window is labeled
    // equation only when every contributing element is one.
    for (const TokenSpan& w : segment_text(tokens.size(), cfg)) {
        const std::size_t byte_begin = tokens[w.start].offset;
        const std::size_t byte_end = tokens[w.end - 1].offset + tokens[w.end - 1].length;
        std::set<int> pages;
        bool all_equation = true;
        for (const StreamPiece& p : pieces) {
            if (p.begin < byte_end && byte_begin < p.end) {
                pages.insert(p.page_index);
                all_equation = all_equation && p.equation;
            }
        }
        Chunk c;
        c.chunk_id = next_id();
        c.doc_id = bundle.doc_id;
        c.modality = Modality::text;
        c.content_type = all_equation ? ContentType::equation : ContentType::paragraph;
        c.text_content = stream.substr(byte_begin, byte_end - byte_begin);
        c.page_indices.assign(pages.begin(), pages.end());
        c.span = w;
        chunks.push_back(std::move(c));
    }

    for (const Page& page : bundle.pages) {
        for (const Element& el : page.elements) {
            if (is_text_kind(el.kind)) continue;
            Chunk c;
            c.chunk_id = next_id();
            c.doc_id = bundle.doc_id;
            c.modality = Modality::image;
            c.content_type =
                el.kind == ElementKind::table ? ContentType::table : ContentType::figure;
            std::string text = el.text.value_or("");
            if (el.ocr_text && !el.ocr_text->empty()) {
                if (!text.empty()) text.append("\n");
                text.append(*el.ocr_text);
            }
            c.text_content = std::move(text);
            c.image_ref = el.image_ref;
            c.page_indices = {page.page_index};
            chunks.push_back(std::move(c));
        }
    }
    return chunks;
}

}  // namespace mldoc

#include "mldoc/tokenizer.hpp"

#include <map>
#include <mutex>
#include <shared_mutex>

#include "mldoc/errors.hpp"

namespace mldoc {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           c == '_' || c >= 0x80;
}

struct Registry {
    std::shared_mutex mutex;
    std::map<std::string, TokenizerFn> fns{
        {"word", word_punct_tokens},
        {"whitespace", whitespace_tokens},
    };
};

Registry& registry() {
    static Registry r;
    return r;
}

}  // namespace

std::vector<Token> word_punct_tokens(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c)) {
            ++i;
        } else if (is_word(c)) {
            const std::size_t start = i;
            while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
            out.push_back({start, i - start});
        } else {
            out.push_back({i, 1});
            ++i;
        }
    }
    return out;
}

std::vector<Token> whitespace_tokens(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_space(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
        out.push_back({start, i - start});
    }
    return out;
}

const TokenizerFn& tokenizer(const std::string& tokenizer_id) {
    auto& r = registry();
    std::shared_lock lock(r.mutex);
    auto it = r.fns.find(tokenizer_id);
    if (it == r.fns.end()) throw ConfigError("unknown tokenizer '" + tokenizer_id + "'");
    return it->second;
}

void register_tokenizer(const std::string& tokenizer_id, TokenizerFn fn) {
    auto& r = registry();
    std::unique_lock lock(r.mutex);
    r.fns[tokenizer_id] = std::move(fn);
}

std::vector<Token> tokenize_spans(std::string_view text, const std::string& tokenizer_id) {
    return tokenizer(tokenizer_id)(text);
}

std::vector<std::string> tokenize(std::string_view text, const std::string& tokenizer_id) {
    std::vector<std::string> out;
    for (const Token& t : tokenize_spans(text, tokenizer_id)) out.emplace_back(t.view(text));
    return out;
}

}  // namespace mldoc

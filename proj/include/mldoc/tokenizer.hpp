#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace mldoc {

// A token with its byte range in the source text.
struct Token {
    std::size_t offset = 0;
    std::size_t length = 0;

    std::string_view view(std::string_view text) const { return text.substr(offset, length); }
};

using TokenizerFn = std::function<std::vector<Token>(std::string_view)>;

// Default segmentation: runs of word characters (ASCII alphanumerics,
// underscore, and any non-ASCII byte) form one token; every other
// non-whitespace byte is a token on its own.
std::vector<Token> word_punct_tokens(std::string_view text);

// Whitespace-separated runs.
std::vector<Token> whitespace_tokens(std::string_view text);

/// Looks up a registered tokenizer. Built-ins: "word" (default) and "whitespace".
/// Throws ConfigError for unknown ids.
const TokenizerFn& tokenizer(const std::string& tokenizer_id);

void register_tokenizer(const std::string& tokenizer_id, TokenizerFn fn);

std::vector<Token> tokenize_spans(std::string_view text, const std::string& tokenizer_id);

std::vector<std::string> tokenize(std::string_view text, const std::string& tokenizer_id = "word");

}  // namespace mldoc

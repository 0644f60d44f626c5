#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mldoc/corpus.hpp"
#include "mldoc/embedding.hpp"
#include "mldoc/visual_filter.hpp"

namespace mldoc {

struct TextPart {
    std::string text;
    bool operator==(const TextPart&) const = default;
};

struct ImagePart {
    ImageRef image;
    bool operator==(const ImagePart&) const = default;
};

using MessagePart = std::variant<TextPart, ImagePart>;

enum class Role { system, user };

struct ChatMessage {
    Role role = Role::user;
    std::vector<MessagePart> parts;

    std::size_t text_part_count() const;
    std::size_t image_part_count() const;
    // Concatenation of all text parts separated by newlines.
    std::string joined_text() const;
};

ChatMessage system_message(std::string text);

struct DecodeParams {
    double temperature = 0.2;
    int max_output_tokens = 2048;
};

struct EndpointConfig {
    std::string base_url;
    std::string model_name;
    std::optional<std::string> api_key;
    std::chrono::milliseconds timeout{120'000};
    int max_retries = 2;
    // Delay before retry i is backoff[min(i, size-1)]; empty means no delay.
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(500),
                                                   std::chrono::milliseconds(2000)};
    // Upper bound on in-flight requests issued through one client.
    int max_concurrency = 4;

    void validate() const;
};

// Raw embedding endpoint. Inputs are plain strings or image data URIs.
// Implementations must be safe for concurrent use.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<Vector<double>> embed_raw(std::span<const std::string> inputs) const = 0;
};

// Multimodal chat endpoint; returns the assistant text verbatim.
class ChatModel {
public:
    virtual ~ChatModel() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages,
                                 const DecodeParams& decode) const = 0;
};

/// Embeds texts in order and l2-normalizes every vector client-side.
/// Empty input lists or empty strings are input errors; mixed dimensions are
/// protocol errors.
std::vector<Embedding> embed_texts(const Embedder& embedder, std::span<const std::string> texts,
                                   std::size_t batch_size = 64);

/// Zero-shot label scores: cosine similarity between the image embedding and
/// the embedding of the policy prompt for each label.
LabelScores classify_image(const Embedder& embedder, const ImageRef& image,
                           const VisualFilterPolicy& policy);

// VisualClassifier backed by an embedding endpoint that accepts images.
class EmbeddingVisualClassifier : public VisualClassifier {
public:
    explicit EmbeddingVisualClassifier(const Embedder& embedder) : embedder_(embedder) {}
    LabelScores classify(const ImageRef& image, const VisualFilterPolicy& policy) const override;

private:
    const Embedder& embedder_;
};

/// Reads an image file into a `data:<mime>;base64,...` URI. Strings that are
/// already data URIs or http(s) URLs pass through unchanged.
std::string image_data_uri(const ImageRef& image);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view encoded);

}  // namespace mldoc

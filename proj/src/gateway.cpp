#include "mldoc/gateway.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace mldoc {

std::size_t ChatMessage::text_part_count() const {
    return static_cast<std::size_t>(std::count_if(parts.begin(), parts.end(), [](const auto& p) {
        return std::holds_alternative<TextPart>(p);
    }));
}

std::size_t ChatMessage::image_part_count() const {
    return parts.size() - text_part_count();
}

std::string ChatMessage::joined_text() const {
    std::string out;
    for (const auto& p : parts) {
        if (const auto* t = std::get_if<TextPart>(&p)) {
            if (!out.empty()) out.push_back('\n');
            out.append(t->text);
        }
    }
    return out;
}

ChatMessage system_message(std::string text) {
    return ChatMessage{Role::system, {TextPart{std::move(text)}}};
}

void EndpointConfig::validate() const {
    if (base_url.empty()) throw ConfigError("endpoint base_url is empty");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
    if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
}

std::vector<Embedding> embed_texts(const Embedder& embedder, std::span<const std::string> texts,
                                   std::size_t batch_size) {
    if (texts.empty()) throw InputError("embed_texts called with no texts");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) throw InputError("text " + std::to_string(i) + " is empty");
    }
    batch_size = std::max<std::size_t>(1, batch_size);

    std::vector<Embedding> out;
    out.reserve(texts.size());
    Eigen::Index dim = -1;
    for (std::size_t begin = 0; begin < texts.size(); begin += batch_size) {
        const std::size_t n = std::min(batch_size, texts.size() - begin);
        const auto raw = embedder.embed_raw(texts.subspan(begin, n));
        if (raw.size() != n) {
            throw ProtocolError("embedding endpoint returned " + std::to_string(raw.size()) +
                                " vectors for " + std::to_string(n) + " inputs");
        }
        for (const auto& v : raw) {
            if (v.size() == 0) throw ProtocolError("embedding endpoint returned an empty vector");
            if (dim < 0) dim = v.size();
            if (v.size() != dim) {
                throw ProtocolError("embedding dimension changed within a request: " +
                                    std::to_string(dim) + " vs " + std::to_string(v.size()));
            }
            out.push_back(normalized(v).cast<float>());
        }
    }
    return out;
}

LabelScores classify_image(const Embedder& embedder, const ImageRef& image,
                           const VisualFilterPolicy& policy) {
    const auto labels = policy.all_labels();
    std::vector<std::string> inputs;
    inputs.reserve(labels.size() + 1);
    inputs.push_back(image_data_uri(image));
    for (const auto& label : labels) inputs.push_back(policy.prompt_for(label));

    const auto vectors = embed_texts(embedder, inputs);
    LabelScores scores;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        scores[labels[i]] = inner(vectors[0], vectors[i + 1]);
    }
    return scores;
}

LabelScores EmbeddingVisualClassifier::classify(const ImageRef& image,
                                                const VisualFilterPolicy& policy) const {
    return classify_image(embedder_, image, policy);
}

namespace {

std::string mime_for(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    if (ext == ".bmp") return "image/bmp";
    return "image/png";
}

}  // namespace

std::string image_data_uri(const ImageRef& image) {
    if (image.rfind("data:", 0) == 0) return image;
    if (image.rfind("http://", 0) == 0 || image.rfind("https://", 0) == 0) return image;
    std::ifstream in(image, std::ios::binary);
    if (!in) throw InputError("cannot read image '" + image + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return "data:" + mime_for(image) + ";base64," + base64_encode(bytes);
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(std::string_view encoded) {
    if (encoded.size() % 4 != 0) throw InputError("base64 length is not a multiple of 4");
    std::string out(3 * encoded.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(encoded.data()),
                                  static_cast<int>(encoded.size()));
    if (n < 0) throw InputError("invalid base64 payload");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
    if (!encoded.empty() && encoded.back() == '=') --len;
    if (encoded.size() >= 2 && encoded[encoded.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

}  // namespace mldoc

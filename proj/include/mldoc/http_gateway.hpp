#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <string>

#include "mldoc/gateway.hpp"

namespace mldoc {

class ConcurrencyLimiter;

// Wire format helpers for the OpenAI-compatible protocol.
nlohmann::json chat_request_body(const std::vector<ChatMessage>& messages,
                                 const std::string& model, const DecodeParams& decode);
std::string parse_chat_response(const nlohmann::json& body);
nlohmann::json embeddings_request_body(std::span<const std::string> inputs,
                                       const std::string& model);
std::vector<Vector<double>> parse_embeddings_response(const nlohmann::json& body,
                                                      std::size_t expected);

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// POST with bounded retries. Transport failures, 429 and 5xx are retried;
/// other statuses are returned to the caller.
HttpResponse post_json(const EndpointConfig& cfg, const std::string& path,
                       const std::string& body);

class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(EndpointConfig cfg);
    ~HttpEmbedder() override;
    std::vector<Vector<double>> embed_raw(std::span<const std::string> inputs) const override;

private:
    EndpointConfig cfg_;
    std::unique_ptr<ConcurrencyLimiter> limiter_;
};

class HttpChatModel : public ChatModel {
public:
    explicit HttpChatModel(EndpointConfig cfg);
    ~HttpChatModel() override;
    std::string complete(const std::vector<ChatMessage>& messages,
                         const DecodeParams& decode) const override;

private:
    EndpointConfig cfg_;
    std::unique_ptr<ConcurrencyLimiter> limiter_;
};

}  // namespace mldoc

#include "mldoc/http_gateway.hpp"

#include <httplib.h>

#include <condition_variable>
#include <mutex>
#include <thread>

namespace mldoc {

using json = nlohmann::json;

class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(int slots) : free_(slots) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return free_ > 0; });
        --free_;
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            ++free_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int free_;
};

namespace {

struct SlotGuard {
    explicit SlotGuard(ConcurrencyLimiter& l) : limiter(l) { limiter.acquire(); }
    ~SlotGuard() { limiter.release(); }
    ConcurrencyLimiter& limiter;
};

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("base_url must include a scheme: '" + base_url + "'");
    }
    const auto path_begin = base_url.find('/', scheme_end + 3);
    if (path_begin == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_begin);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_begin), prefix};
}

bool looks_like_overflow(const std::string& body) {
    static const char* markers[] = {"context_length_exceeded", "maximum context length",
                                    "context length", "too many tokens"};
    for (const char* m : markers) {
        if (body.find(m) != std::string::npos) return true;
    }
    return false;
}

std::string role_name(Role role) { return role == Role::system ? "system" : "user"; }

}  // namespace

HttpResponse post_json(const EndpointConfig& cfg, const std::string& path,
                       const std::string& body) {
    cfg.validate();
    const auto [host, prefix] = split_base_url(cfg.base_url);
    std::vector<std::string> attempts;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0 && !cfg.backoff.empty()) {
            const auto idx = std::min<std::size_t>(static_cast<std::size_t>(attempt - 1),
                                                   cfg.backoff.size() - 1);
            std::this_thread::sleep_for(cfg.backoff[idx]);
        }
        httplib::Client client(host);
        const auto secs = cfg.timeout.count() / 1000;
        const auto usecs = (cfg.timeout.count() % 1000) * 1000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (cfg.api_key && !cfg.api_key->empty()) {
            headers.emplace("Authorization", "Bearer " + *cfg.api_key);
        }
        auto res = client.Post(prefix + path, headers, body, "application/json");
        if (!res) {
            attempts.push_back("attempt " + std::to_string(attempt + 1) + ": transport error: " +
                               httplib::to_string(res.error()));
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            attempts.push_back("attempt " + std::to_string(attempt + 1) + ": HTTP " +
                               std::to_string(res->status));
            continue;
        }
        return {res->status, res->body};
    }
    throw GatewayError("POST " + cfg.base_url + path + " failed after " +
                           std::to_string(attempts.size()) + " attempts",
                       std::move(attempts));
}

json chat_request_body(const std::vector<ChatMessage>& messages, const std::string& model,
                       const DecodeParams& decode) {
    json msgs = json::array();
    for (const ChatMessage& m : messages) {
        if (m.parts.empty()) throw InputError("chat message without parts");
        json content = json::array();
        for (const MessagePart& part : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&part)) {
                content.push_back({{"type", "text"}, {"text", t->text}});
            } else {
                const auto& img = std::get<ImagePart>(part);
                content.push_back(
                    {{"type", "image_url"}, {"image_url", {{"url", image_data_uri(img.image)}}}});
            }
        }
        msgs.push_back({{"role", role_name(m.role)}, {"content", std::move(content)}});
    }
    return {{"model", model},
            {"messages", std::move(msgs)},
            {"temperature", decode.temperature},
            {"max_tokens", decode.max_output_tokens}};
}

std::string parse_chat_response(const json& body) {
    try {
        const auto& content = body.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw ProtocolError("chat response content is not a string");
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed chat response: ") + e.what());
    }
}

json embeddings_request_body(std::span<const std::string> inputs, const std::string& model) {
    json input = json::array();
    for (const auto& s : inputs) input.push_back(s);
    return {{"model", model}, {"input", std::move(input)}};
}

std::vector<Vector<double>> parse_embeddings_response(const json& body, std::size_t expected) {
    std::vector<Vector<double>> out(expected);
    std::vector<bool> seen(expected, false);
    try {
        const auto& data = body.at("data");
        if (!data.is_array() || data.size() != expected) {
            throw ProtocolError("embedding response has " +
                                std::to_string(data.is_array() ? data.size() : 0) +
                                " items, expected " + std::to_string(expected));
        }
        for (std::size_t pos = 0; pos < data.size(); ++pos) {
            const auto& item = data[pos];
            const std::size_t index =
                item.contains("index") ? item.at("index").get<std::size_t>() : pos;
            if (index >= expected || seen[index]) {
                throw ProtocolError("embedding response has bad index " + std::to_string(index));
            }
            const auto values = item.at("embedding").get<std::vector<double>>();
            out[index] = Eigen::Map<const Vector<double>>(values.data(),
                                                           static_cast<Eigen::Index>(values.size()));
            seen[index] = true;
        }
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

HttpEmbedder::HttpEmbedder(EndpointConfig cfg)
    : cfg_(std::move(cfg)), limiter_(std::make_unique<ConcurrencyLimiter>(cfg_.max_concurrency)) {
    cfg_.validate();
}

HttpEmbedder::~HttpEmbedder() = default;

std::vector<Vector<double>> HttpEmbedder::embed_raw(std::span<const std::string> inputs) const {
    SlotGuard slot(*limiter_);
    const auto res =
        post_json(cfg_, "/v1/embeddings", embeddings_request_body(inputs, cfg_.model_name).dump());
    if (res.status != 200) {
        const bool has_image = std::any_of(inputs.begin(), inputs.end(), [](const auto& s) {
            return s.rfind("data:image/", 0) == 0;
        });
        if (has_image && res.status >= 400 && res.status < 500) {
            throw CapabilityError("embedding endpoint rejected image input (HTTP " +
                                  std::to_string(res.status) + "): " + res.body);
        }
        throw ProtocolError("embedding endpoint returned HTTP " + std::to_string(res.status) +
                            ": " + res.body);
    }
    json body;
    try {
        body = json::parse(res.body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("embedding response is not JSON: ") + e.what());
    }
    return parse_embeddings_response(body, inputs.size());
}

HttpChatModel::HttpChatModel(EndpointConfig cfg)
    : cfg_(std::move(cfg)), limiter_(std::make_unique<ConcurrencyLimiter>(cfg_.max_concurrency)) {
    cfg_.validate();
}

HttpChatModel::~HttpChatModel() = default;

std::string HttpChatModel::complete(const std::vector<ChatMessage>& messages,
                                    const DecodeParams& decode) const {
    const std::string request = chat_request_body(messages, cfg_.model_name, decode).dump();
    SlotGuard slot(*limiter_);
    const auto res = post_json(cfg_, "/v1/chat/completions", request);
    if (res.status != 200) {
        if (res.status == 400 || res.status == 413) {
            if (looks_like_overflow(res.body)) throw ContextOverflowError(res.body);
        }
        throw ProtocolError("chat endpoint returned HTTP " + std::to_string(res.status) + ": " +
                            res.body);
    }
    json body;
    try {
        body = json::parse(res.body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("chat response is not JSON: ") + e.what());
    }
    return parse_chat_response(body);
}

}  // namespace mldoc

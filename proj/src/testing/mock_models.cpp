#include "mldoc/testing/mock_models.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <array>
#include <cctype>
#include <chrono>
#include <mutex>
#include <nlohmann/json.hpp>
#include <regex>

#include "mldoc/answer.hpp"
#include "mldoc/http_gateway.hpp"
#include "mldoc/io.hpp"
#include "mldoc/prompts.hpp"
#include "mldoc/tokenizer.hpp"
#include "mldoc/visual_filter.hpp"

namespace mldoc::testing {

using json = nlohmann::json;

EmbedMode parse_embed_mode(std::string_view s) {
    if (s == "string" || s == "string_hash") return EmbedMode::string_hash;
    if (s == "bow" || s == "bag_of_words") return EmbedMode::bag_of_words;
    throw ConfigError("unknown mock embed mode '" + std::string(s) + "'");
}

Vector<double> hash_unit_vector(std::uint64_t seed, std::string_view text, int dim) {
    Vector<double> v(dim);
    int filled = 0;
    for (std::uint32_t block = 0; filled < dim; ++block) {
        std::string material;
        for (int b = 0; b < 8; ++b) material.push_back(static_cast<char>((seed >> (8 * b)) & 0xFF));
        for (int b = 0; b < 4; ++b) material.push_back(static_cast<char>((block >> (8 * b)) & 0xFF));
        material.append(text);
        std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
        unsigned int len = 0;
        EVP_Digest(material.data(), material.size(), digest.data(), &len, EVP_sha256(), nullptr);
        for (unsigned int i = 0; i + 4 <= len && filled < dim; i += 4) {
            const std::uint32_t word = static_cast<std::uint32_t>(digest[i]) |
                                       static_cast<std::uint32_t>(digest[i + 1]) << 8 |
                                       static_cast<std::uint32_t>(digest[i + 2]) << 16 |
                                       static_cast<std::uint32_t>(digest[i + 3]) << 24;
            v(filled++) = static_cast<double>(word) / 2147483648.0 - 1.0;
        }
    }
    return v / v.norm();
}

Vector<double> HashEmbedder::embed_one(std::string_view input) const {
    if (input.rfind("data:", 0) == 0) {
        const auto comma = input.find(',');
        if (comma != std::string_view::npos && input.substr(0, comma).find(";base64") != std::string_view::npos) {
            std::string payload;
            try {
                payload = base64_decode(input.substr(comma + 1));
            } catch (const Error&) {
            }
            static constexpr std::string_view tag = "MOCKLABEL:";
            if (payload.rfind(tag, 0) == 0) {
                auto label = payload.substr(tag.size());
                label = label.substr(0, label.find_first_of("\r\n"));
                return embed_one(VisualFilterPolicy::defaults().prompt_for(label));
            }
        }
        return hash_unit_vector(seed_, input, dim_);
    }
    if (mode_ == EmbedMode::string_hash) return hash_unit_vector(seed_, input, dim_);

    Vector<double> sum = Vector<double>::Zero(dim_);
    bool any = false;
    for (const Token& t : word_punct_tokens(input)) {
        std::string term(t.view(input));
        if (!std::isalnum(static_cast<unsigned char>(term.front()))) continue;
        for (auto& c : term) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        sum += hash_unit_vector(seed_, term, dim_);
        any = true;
    }
    if (!any || sum.norm() == 0.0) return hash_unit_vector(seed_, input, dim_);
    return sum / sum.norm();
}

std::vector<Vector<double>> HashEmbedder::embed_raw(std::span<const std::string> inputs) const {
    std::vector<Vector<double>> out;
    out.reserve(inputs.size());
    for (const auto& s : inputs) out.push_back(embed_one(s));
    return out;
}

std::string prompt_fingerprint(std::string_view system_prompt) {
    return sha256_hex(system_prompt.substr(0, 64)).substr(0, 16);
}

std::string sample_generation_fixture() {
    static const char* text = R"([
    {"index": 0, "query": "Which app store had more apps in 2015?", "answer": "Google Play Store", "q_id": "reportq32015-151009093138-lva1-app6891_95-6-0"},
    {"index": 1, "query": "How many apps were in the Apple App Store in 2015?", "answer": "1,5 million", "q_id": "reportq32015-151009093138-lva1-app6891_95-6-1"},
    {"index": 2, "query": "What was the number of apps in the Google Play Store in 2015?", "answer": "1,6 million", "q_id": "reportq32015-151009093138-lva1-app6891_95-6-2"},
    {"index": 3, "query": "In which year did the number of apps in both stores start to increase significantly?", "answer": "2013", "q_id": "reportq32015-151009093138-lva1-app6891_95-6-3"},
    {"index": 4, "query": "How many apps were in the Apple App Store in 2012?", "answer": "0,5 million", "q_id": "reportq32015-151009093138-lva1-app6891_95-6-4"},
    {"index": 5, "query": "What was the number of apps in the Google Play Store in 2012?", "answer": "0,35 million", "q_id": "reportq32015-151009093138-lva1-app6891_95-6-5"}
])";
    return text;
}

namespace {

std::string squash(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

const std::regex& fact_pattern() {
    static const std::regex re(R"([Tt]he value of ([A-Za-z0-9 _-]+?) is ([A-Za-z0-9_-]+)\.)");
    return re;
}

std::string generation_reply(const std::string& user_text, bool page_mode) {
    if (user_text.find("[fixture:sample-pairs]") != std::string::npos) return sample_generation_fixture();
    if (user_text.find("[fixture:garbage]") != std::string::npos) {
        return "I am unable to produce structured output for this chunk.";
    }
    json items = json::array();
    if (user_text.find("[fixture:many]") != std::string::npos) {
        for (int i = 0; i < 25; ++i) {
            items.push_back({{"index", i},
                             {"query", "What is item " + std::to_string(i) + "?"},
                             {"answer", "Item " + std::to_string(i)}});
        }
        return items.dump();
    }
    static const char* levels[] = {"level_1_entity_integrated", "level_2_detailed_content",
                                   "level_3_macro_hierarchy", "level_4_context_restoration"};
    int index = 0;
    for (auto it = std::sregex_iterator(user_text.begin(), user_text.end(), fact_pattern());
         it != std::sregex_iterator() && index < 20; ++it) {
        json item = {{"index", index},
                     {"query", "What is the value of " + (*it)[1].str() + "?"},
                     {"answer", (*it)[2].str()}};
        if (page_mode) item["level"] = levels[index % 4];
        items.push_back(std::move(item));
        ++index;
    }
    const std::string body = items.dump(2);
    if (user_text.find("[fixture:prose]") != std::string::npos) {
        return "Sure! Here are the pairs [as requested]:\n```json\n" + body +
               "\n```\nLet me know if you need more.";
    }
    return body;
}

std::string answer_reply(const std::string& user_text) {
    static const std::regex question(R"(Question: What is the value of ([A-Za-z0-9 _-]+?)\?)");
    std::smatch m;
    if (!std::regex_search(user_text, m, question)) return "Final Answer: I don't know";
    const std::string topic = m[1].str();
    for (auto it = std::sregex_iterator(user_text.begin(), user_text.end(), fact_pattern());
         it != std::sregex_iterator(); ++it) {
        if ((*it)[1].str() == topic) {
            return "Analysis: the context states the value of " + topic +
                   ".\nFinal Answer: " + (*it)[2].str();
        }
    }
    return "Analysis: the context does not mention " + topic + ".\nFinal Answer: I don't know";
}

std::string judge_reply(const std::string& user_text) {
    const auto ref_pos = user_text.find("Reference Answer: ");
    const auto cand_pos = user_text.find("\nCandidate Answer: ");
    if (ref_pos == std::string::npos || cand_pos == std::string::npos) return "Score: 0";
    const std::string reference =
        user_text.substr(ref_pos + 18, cand_pos - (ref_pos + 18));
    const std::string candidate = user_text.substr(cand_pos + 19);
    if (candidate.find("[fixture:judge-garbage]") != std::string::npos) {
        return "I would rather not grade this.";
    }
    const std::string final_answer = extract_final_answer(candidate);
    const bool reference_none = squash(reference).empty() || is_unanswerable_equivalent(reference);
    int score = 0;
    if (reference_none) {
        score = is_unanswerable_equivalent(final_answer) ? 1 : 0;
    } else {
        score = !is_unanswerable_equivalent(final_answer) &&
                        squash(final_answer) == squash(reference)
                    ? 1
                    : 0;
    }
    return "Score: " + std::to_string(score);
}

}  // namespace

std::string ScriptedChat::complete(const std::vector<ChatMessage>& messages,
                                   const DecodeParams&) const {
    std::string system;
    std::string user;
    for (const auto& m : messages) {
        (m.role == Role::system ? system : user) += m.joined_text();
    }
    const std::string fp = prompt_fingerprint(system);
    if (fp == prompt_fingerprint(prompts::mdoc2query())) return generation_reply(user, false);
    if (fp == prompt_fingerprint(prompts::mdoc2query_page_context())) return generation_reply(user, true);
    if (fp == prompt_fingerprint(prompts::response()) ||
        fp == prompt_fingerprint(prompts::response_page_context())) {
        return answer_reply(user);
    }
    if (fp == prompt_fingerprint(prompts::evaluation())) return judge_reply(user);
    throw ProtocolError("unknown prompt fingerprint " + fp);
}

// HTTP server

struct MockServer::Impl {
    httplib::Server server;
    mutable std::mutex mutex;
    std::string last_chat_body;
};

namespace {

ChatMessage message_from_wire(const json& m) {
    ChatMessage out;
    out.role = m.at("role").get<std::string>() == "system" ? Role::system : Role::user;
    const auto& content = m.at("content");
    if (content.is_string()) {
        out.parts.push_back(TextPart{content.get<std::string>()});
        return out;
    }
    for (const auto& part : content) {
        const std::string type = part.at("type").get<std::string>();
        if (type == "text") {
            out.parts.push_back(TextPart{part.at("text").get<std::string>()});
        } else if (type == "image_url") {
            out.parts.push_back(ImagePart{part.at("image_url").at("url").get<std::string>()});
        }
    }
    return out;
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(),
                    "application/json");
}

}  // namespace

MockServer::MockServer(std::uint64_t seed, EmbedMode mode)
    : impl_(std::make_unique<Impl>()), embedder_(seed, mode) {
    auto& server = impl_->server;

    auto injected_failure = [this](httplib::Response& res) {
        ++requests_;
        if (fail_remaining_.load() > 0) {
            --fail_remaining_;
            send_error(res, fail_status_.load(), "injected", "injected failure");
            return true;
        }
        return false;
    };

    server.Post("/v1/embeddings", [this, injected_failure](const httplib::Request& req,
                                                           httplib::Response& res) {
        if (injected_failure(res)) return;
        try {
            const json body = json::parse(req.body);
            std::vector<std::string> inputs;
            const auto& input = body.at("input");
            if (input.is_string()) {
                inputs.push_back(input.get<std::string>());
            } else {
                inputs = input.get<std::vector<std::string>>();
            }
            json data = json::array();
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                if (reject_images_.load() && inputs[i].rfind("data:image/", 0) == 0) {
                    send_error(res, 400, "unsupported_input", "image inputs are not supported");
                    return;
                }
                const auto v = embedder_.embed_one(inputs[i]);
                data.push_back({{"index", i},
                                {"object", "embedding"},
                                {"embedding", std::vector<double>(v.data(), v.data() + v.size())}});
            }
            res.set_content(json{{"object", "list"}, {"data", data}, {"model", body.value("model", "")}}.dump(),
                            "application/json");
        } catch (const std::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        }
    });

    server.Post("/v1/chat/completions", [this, injected_failure](const httplib::Request& req,
                                                                 httplib::Response& res) {
        if (injected_failure(res)) return;
        {
            std::lock_guard lock(impl_->mutex);
            impl_->last_chat_body = req.body;
        }
        std::vector<ChatMessage> messages;
        try {
            const json body = json::parse(req.body);
            for (const auto& m : body.at("messages")) messages.push_back(message_from_wire(m));
        } catch (const std::exception& e) {
            send_error(res, 400, "bad_request", e.what());
            return;
        }
        std::size_t text_chars = 0;
        for (const auto& m : messages) text_chars += m.joined_text().size();
        const std::size_t limit = max_context_chars_.load();
        if (limit > 0 && text_chars > limit) {
            send_error(res, 400, "context_length_exceeded",
                       "This model's maximum context length is exceeded");
            return;
        }
        try {
            const std::string content = chat_.complete(messages, {});
            res.set_content(
                json{{"object", "chat.completion"},
                     {"choices", json::array({{{"index", 0},
                                               {"message", {{"role", "assistant"}, {"content", content}}},
                                               {"finish_reason", "stop"}}})}}
                    .dump(),
                "application/json");
        } catch (const std::exception& e) {
            send_error(res, 400, "unknown_fingerprint", e.what());
        }
    });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(int port) {
    auto& server = impl_->server;
    port_ = port == 0 ? server.bind_to_any_port("127.0.0.1") : port;
    if (port != 0 && !server.bind_to_port("127.0.0.1", port)) {
        throw ConfigError("cannot bind mock server to port " + std::to_string(port));
    }
    if (port_ <= 0) throw ConfigError("cannot bind mock server");
    thread_ = std::thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();
    return port_;
}

void MockServer::listen_blocking(const std::string& host, int port) {
    port_ = port;
    if (!impl_->server.listen(host, port)) {
        throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
    }
}

void MockServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

std::string MockServer::last_chat_body() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->last_chat_body;
}

}  // namespace mldoc::testing

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "mldoc/gateway.hpp"

// Deterministic stand-ins for the embedding and chat endpoints. Used by the
// test suites in-process and served over HTTP by mldoc-mock-server.
namespace mldoc::testing {

inline constexpr int kMockDim = 32;

enum class EmbedMode {
    string_hash,  // whole input string hashed to a unit vector
    bag_of_words  // normalized sum of per-token hash vectors
};

EmbedMode parse_embed_mode(std::string_view s);

/// Seeded SHA-256 expansion of `text` into `dim` values in [-1, 1), then
/// l2-normalized.
Vector<double> hash_unit_vector(std::uint64_t seed, std::string_view text, int dim = kMockDim);

/// Image inputs are data URIs. A payload beginning with "MOCKLABEL:<label>"
/// embeds like the text "a photo of a <label>"; other images hash their URI.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::uint64_t seed = 0, EmbedMode mode = EmbedMode::string_hash,
                          int dim = kMockDim)
        : seed_(seed), mode_(mode), dim_(dim) {}

    std::vector<Vector<double>> embed_raw(std::span<const std::string> inputs) const override;
    Vector<double> embed_one(std::string_view input) const;

private:
    std::uint64_t seed_;
    EmbedMode mode_;
    int dim_;
};

/// Canned responses selected by the fingerprint of the system prompt
/// (SHA-256 of its first 64 bytes). Fact sentences of the form
/// "The value of <topic> is <token>." drive generation and answering.
/// Markers in the user text select fixtures: "[fixture:sample-pairs]",
/// "[fixture:garbage]", "[fixture:prose]", "[fixture:many]",
/// "[fixture:judge-garbage]".
class ScriptedChat : public ChatModel {
public:
    std::string complete(const std::vector<ChatMessage>& messages,
                         const DecodeParams& decode) const override;
};

std::string prompt_fingerprint(std::string_view system_prompt);

// Six query-answer pairs about app-store figures, used as a parsing fixture.
std::string sample_generation_fixture();

/// HTTP server speaking the OpenAI-compatible wire protocol on 127.0.0.1.
class MockServer {
public:
    MockServer(std::uint64_t seed, EmbedMode mode);
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    /// Binds (port 0 picks a free port) and serves on a background thread.
    int start(int port = 0);
    void stop();
    /// Blocks serving on the calling thread.
    void listen_blocking(const std::string& host, int port);

    std::string base_url() const;
    int port() const { return port_; }

    // Fault injection for retry tests.
    void fail_next(int count, int status = 503) {
        fail_status_ = status;
        fail_remaining_ = count;
    }
    // Chat requests whose total text exceeds this many bytes get a
    // context-length rejection. 0 disables the check.
    void set_max_context_chars(std::size_t n) { max_context_chars_ = n; }
    void set_reject_images(bool reject) { reject_images_ = reject; }

    std::size_t request_count() const { return requests_.load(); }
    std::string last_chat_body() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    HashEmbedder embedder_;
    ScriptedChat chat_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> fail_remaining_{0};
    std::atomic<int> fail_status_{503};
    std::atomic<std::size_t> max_context_chars_{0};
    std::atomic<bool> reject_images_{false};
    std::atomic<std::size_t> requests_{0};
};

}  // namespace mldoc::testing

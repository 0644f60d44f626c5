#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mldoc/answer.hpp"
#include "mldoc/chunking.hpp"
#include "mldoc/evaluation.hpp"
#include "mldoc/gateway.hpp"
#include "mldoc/graph.hpp"
#include "mldoc/mdoc2query.hpp"
#include "mldoc/retrieval.hpp"

// Pipeline stages over a store directory. The CLI and the HTTP service both
// call these, so a command and the equivalent request produce the same JSON.
namespace mldoc::app {

// Endpoint settings. Empty URLs fall back to MLDOC_EMBED_URL, MLDOC_LVLM_URL,
// MLDOC_JUDGE_URL; the API key to MLDOC_API_KEY.
struct EndpointSettings {
    std::string embed_url;
    std::string lvlm_url;
    std::string judge_url;
    std::string api_key;
    std::string embed_model = "bge-m3";
    std::string lvlm_model = "Qwen2.5-VL-32B-Instruct";
    std::string judge_model = "Qwen2.5-72B-Instruct";
    int max_retries = 2;
    int timeout_ms = 120'000;
    int concurrency = 4;

    void fill_from_env();
};

// Model handles, created on first use so commands that never touch an
// endpoint do not require it to be configured.
class Models {
public:
    explicit Models(EndpointSettings settings);
    Models(std::shared_ptr<const Embedder> embedder, std::shared_ptr<const ChatModel> lvlm,
           std::shared_ptr<const ChatModel> judge, int concurrency = 4);

    const Embedder& embedder() const;
    const ChatModel& lvlm() const;
    const ChatModel& judge() const;
    int concurrency() const { return concurrency_; }

private:
    EndpointSettings settings_;
    int concurrency_ = 4;
    mutable std::mutex mutex_;
    mutable std::shared_ptr<const Embedder> embedder_;
    mutable std::shared_ptr<const ChatModel> lvlm_;
    mutable std::shared_ptr<const ChatModel> judge_;
};

// Store directory layout.
struct StorePaths {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "store.json"; }
    std::filesystem::path bundles() const { return root / "bundles"; }
    std::filesystem::path generated_queries() const { return root / "generated_queries.jsonl"; }
    std::filesystem::path generation_report() const { return root / "generation.json"; }
    std::filesystem::path build_report() const { return root / "build.json"; }
    std::filesystem::path lock() const { return root / ".build.lock"; }
};

// Exclusive flock(2) on the store's lock file, held for the object's lifetime.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& lock_file);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    int fd_ = -1;
};

struct IngestOptions {
    ChunkingConfig chunking;
    // Relative image refs resolve against this directory.
    std::filesystem::path bundle_root;
};

nlohmann::json ingest(const StorePaths& store, const nlohmann::json& bundle,
                      const IngestOptions& options);

std::vector<DocumentBundle> load_bundles(const StorePaths& store);
ChunkingConfig load_chunking(const StorePaths& store);
// Chunks of every ingested document, documents in doc_id order.
std::vector<Chunk> corpus_chunks(const StorePaths& store);

nlohmann::json generate(const StorePaths& store, const GenerationConfig& cfg,
                        const Models& models);

struct BuildOptions {
    int k = 3;
    double epsilon = 1.0;
    bool filter = true;
    // Defaults to the representation recorded at generation time.
    std::optional<NodeRepr> repr;
};

nlohmann::json build(const StorePaths& store, const BuildOptions& options, const Models& models);

// Throws MissingArtifactError when the store has no built graph.
McqGraph load_store_graph(const StorePaths& store);

// Retrieval config whose repr is taken from the graph unless set explicitly.
RetrievalConfig retrieval_config_from_json(const nlohmann::json& j, const McqGraph& graph);

nlohmann::json query(const McqGraph& graph, const std::string& question,
                     const RetrievalConfig& cfg, const Models& models);

PageLookup page_lookup(const std::vector<DocumentBundle>& bundles);

nlohmann::json answer(const McqGraph& graph, const std::vector<DocumentBundle>& bundles,
                      const std::string& question, const RetrievalConfig& cfg, AnswerMode mode,
                      const Models& models);

enum class Method { mcqg, bm25, dense };
Method parse_method(std::string_view s);
std::string_view to_string(Method m);

struct EvalOptions {
    Method method = Method::mcqg;
    RetrievalConfig retrieval;
    AnswerMode mode = AnswerMode::plain;
};

nlohmann::json evaluate(const StorePaths& store, const std::vector<QaRecord>& dataset,
                        const EvalOptions& options, const Models& models);

struct SweepGrid {
    std::vector<int> h_values{2};
    std::vector<int> k_values{3};
    std::vector<int> n_values{10};
    std::vector<double> alpha_values{1.2};
    std::vector<int> K_values{5};
    std::vector<Aggregation> agg_values{Aggregation::max};
    std::vector<NodeRepr> repr_values{NodeRepr::query_plus_answer};

    std::size_t size() const;
    void validate(std::size_t max_points) const;
};

inline constexpr std::size_t kDefaultSweepCap = 4096;

SweepGrid sweep_grid_from_json(const nlohmann::json& j);

// One CSV row per grid point: parameters, overall accuracy, counts, then the
// per-source and per-scope accuracies.
std::string sweep(const StorePaths& store, const SweepGrid& grid,
                  const std::vector<QaRecord>& dataset, const Models& models,
                  std::size_t max_points = kDefaultSweepCap);

nlohmann::json stats(const StorePaths& store);

// {"error":{"code","message"}}
nlohmann::json error_body(const std::string& code, const std::string& message);

}  // namespace mldoc::app

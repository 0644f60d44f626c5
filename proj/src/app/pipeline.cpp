#include "mldoc/app.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "mldoc/errors.hpp"
#include "mldoc/http_gateway.hpp"
#include "mldoc/io.hpp"
#include "mldoc/json_io.hpp"
#include "mldoc/parallel.hpp"
#include "mldoc/store.hpp"
#include "mldoc/visual_filter.hpp"

namespace mldoc::app {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kStoreConfigVersion = 1;

std::string env_or(const char* name, const std::string& current) {
    if (!current.empty()) return current;
    const char* v = std::getenv(name);
    return v == nullptr ? std::string() : std::string(v);
}

EndpointConfig endpoint(const EndpointSettings& s, const std::string& url,
                        const std::string& model) {
    EndpointConfig cfg;
    cfg.base_url = url;
    cfg.model_name = model;
    if (!s.api_key.empty()) cfg.api_key = s.api_key;
    cfg.max_retries = s.max_retries;
    cfg.timeout = std::chrono::milliseconds(s.timeout_ms);
    cfg.max_concurrency = s.concurrency;
    cfg.validate();
    return cfg;
}

std::string dump_file(const json& j) { return j.dump(2) + "\n"; }

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void check_doc_id(const std::string& id) {
    const bool safe = !id.empty() && id.front() != '.' &&
                      std::all_of(id.begin(), id.end(), [](unsigned char c) {
                          return std::isalnum(c) || c == '-' || c == '_' || c == '.';
                      });
    if (!safe) throw InputError("doc_id '" + id + "' must match [A-Za-z0-9._-]+");
}

bool is_uri(const std::string& ref) {
    return ref.rfind("data:", 0) == 0 || ref.find("://") != std::string::npos;
}

void resolve_ref(std::optional<ImageRef>& ref, const fs::path& root,
                 std::vector<std::string>& warnings) {
    if (!ref || ref->empty() || is_uri(*ref)) return;
    fs::path p(*ref);
    if (p.is_relative()) p = root / p;
    p = fs::absolute(p).lexically_normal();
    if (!fs::exists(p)) warnings.push_back("image not found: " + p.string());
    *ref = p.string();
}

json chunking_json(const ChunkingConfig& c) {
    return {{"max_window", c.max_window}, {"overlap", c.overlap}, {"tokenizer_id", c.tokenizer_id}};
}

json params_json(const GraphParams& p) {
    return {{"k", p.k}, {"epsilon", p.epsilon}, {"dim", p.dim}, {"repr", to_string(p.repr)}};
}

json retrieval_json(const RetrievalConfig& c) {
    return {{"n", c.n},
            {"alpha", c.alpha},
            {"h", c.h},
            {"K", c.K},
            {"agg", to_string(c.agg)},
            {"repr", to_string(c.repr)},
            {"dense_fallback", c.dense_fallback}};
}

std::vector<QueryNode> load_generated(const StorePaths& store) {
    if (!fs::exists(store.generated_queries())) {
        throw MissingArtifactError("no generated queries in " + store.root.string() +
                                   " (run generate first)");
    }
    std::vector<QueryNode> nodes;
    for (const auto& row : parse_jsonl(read_file(store.generated_queries()),
                                       store.generated_queries().string())) {
        nodes.push_back(query_node_from_json(row));
    }
    return nodes;
}

std::vector<Chunk> context_chunks(const McqGraph& graph, const std::vector<std::string>& ids) {
    std::vector<Chunk> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(graph.chunk(id));
    return out;
}

// Memoizes probe embeddings, generated answers and verdicts across rows and
// sweep points. Cached values are pure functions of their keys.
class Harness {
public:
    Harness(const Models& models, AnswerMode mode, PageLookup pages)
        : models_(models), mode_(mode), pages_(std::move(pages)) {}

    Embedding probe(const std::string& question) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = probes_.find(question); it != probes_.end()) return it->second;
        }
        const std::vector<std::string> input{question};
        Embedding e = embed_texts(models_.embedder(), input).front();
        std::lock_guard lock(mutex_);
        return probes_.emplace(question, std::move(e)).first->second;
    }

    const std::map<std::string, Embedding>& chunk_embeddings(const std::vector<Chunk>& chunks) {
        std::lock_guard lock(mutex_);
        if (!chunk_vectors_) {
            std::vector<std::string> ids;
            std::vector<std::string> texts;
            for (const auto& c : chunks) {
                if (c.text_content.empty()) continue;
                ids.push_back(c.chunk_id);
                texts.push_back(c.text_content);
            }
            std::map<std::string, Embedding> by_id;
            if (!texts.empty()) {
                const auto vectors = embed_texts(models_.embedder(), texts);
                for (std::size_t i = 0; i < ids.size(); ++i) by_id.emplace(ids[i], vectors[i]);
            }
            chunk_vectors_ = std::move(by_id);
        }
        return *chunk_vectors_;
    }

    std::optional<JudgeVerdict> run(std::size_t row, const QaRecord& record,
                                    const std::vector<Chunk>& context) {
        std::string key = record.question;
        for (const auto& c : context) key += '\x1f' + c.chunk_id;
        std::optional<GeneratedAnswer> generated;
        {
            std::lock_guard lock(mutex_);
            if (auto it = answers_.find(key); it != answers_.end()) generated = it->second;
        }
        if (!generated) {
            generated = generate_answer(models_.lvlm(), record.question, context, mode_, pages_);
            std::lock_guard lock(mutex_);
            answers_.emplace(key, *generated);
        }
        const auto verdict_key = std::make_pair(row, generated->full_text);
        {
            std::lock_guard lock(mutex_);
            if (auto it = verdicts_.find(verdict_key); it != verdicts_.end()) return it->second;
        }
        std::optional<JudgeVerdict> verdict;
        try {
            verdict = judge(models_.judge(), record, generated->full_text);
        } catch (const JudgeParseError&) {
            verdict.reset();
        }
        std::lock_guard lock(mutex_);
        verdicts_.emplace(verdict_key, verdict);
        return verdict;
    }

private:
    const Models& models_;
    AnswerMode mode_;
    PageLookup pages_;
    std::mutex mutex_;
    std::map<std::string, Embedding> probes_;
    std::optional<std::map<std::string, Embedding>> chunk_vectors_;
    std::map<std::string, GeneratedAnswer> answers_;
    std::map<std::pair<std::size_t, std::string>, std::optional<JudgeVerdict>> verdicts_;
};

std::vector<std::string> ids_of(const std::vector<ChunkScore>& scores) {
    std::vector<std::string> ids;
    for (const auto& s : scores) ids.push_back(s.chunk_id);
    return ids;
}

std::vector<std::string> mcqg_context(Harness& harness, const McqGraph& graph,
                                      const std::vector<Chunk>& chunks,
                                      const std::string& question, const RetrievalConfig& cfg) {
    std::vector<std::string> ids;
    if (graph.queries().empty() && !cfg.dense_fallback) return ids;
    const Embedding user = harness.probe(question);
    if (!graph.queries().empty()) {
        for (const auto& r : retrieve_embedded(graph, user, cfg).ranked) ids.push_back(r.chunk_id);
    }
    if (ids.empty() && cfg.dense_fallback) {
        ids = ids_of(dense_chunk_retrieve(harness.chunk_embeddings(chunks), user, cfg.K));
    }
    return ids;
}

AccuracyReport run_dataset(Harness& harness, const std::vector<QaRecord>& dataset,
                           const McqGraph& graph, const std::vector<Chunk>& chunks,
                           Method method, const RetrievalConfig& cfg, int workers) {
    std::vector<std::optional<JudgeVerdict>> verdicts(dataset.size());
    std::map<std::string, const Chunk*> by_id;
    for (const auto& c : chunks) by_id.emplace(c.chunk_id, &c);
    parallel_for(dataset.size(), static_cast<std::size_t>(std::max(workers, 1)),
                 [&](std::size_t i) {
                     const QaRecord& record = dataset[i];
                     std::vector<std::string> ids;
                     switch (method) {
                         case Method::mcqg:
                             ids = mcqg_context(harness, graph, chunks, record.question, cfg);
                             break;
                         case Method::bm25:
                             ids = ids_of(bm25_retrieve(chunks, record.question, cfg.K));
                             break;
                         case Method::dense:
                             ids = ids_of(dense_chunk_retrieve(harness.chunk_embeddings(chunks),
                                                               harness.probe(record.question),
                                                               cfg.K));
                             break;
                     }
                     std::vector<Chunk> context;
                     for (const auto& id : ids) context.push_back(*by_id.at(id));
                     verdicts[i] = harness.run(i, record, context);
                 });
    return aggregate_accuracy(verdicts, dataset);
}

std::vector<Chunk> graph_chunk_list(const McqGraph& graph) {
    std::vector<Chunk> out;
    out.reserve(graph.chunks().size());
    for (const auto& [id, c] : graph.chunks()) out.push_back(c);
    return out;
}

template <class T, class F>
std::vector<T> axis(const json& j, const char* key, std::vector<T> fallback, F convert) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    std::vector<T> out;
    if (v.is_array()) {
        for (const auto& item : v) out.push_back(convert(item));
    } else {
        out.push_back(convert(v));
    }
    if (out.empty()) throw ConfigError(std::string("sweep axis '") + key + "' is empty");
    return out;
}

std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string csv_accuracy(const std::map<std::string, CategoryAccuracy>& table,
                         std::string_view name) {
    const auto it = table.find(std::string(name));
    if (it == table.end() || it->second.n == 0) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", it->second.accuracy());
    return buf;
}

}  // namespace

void EndpointSettings::fill_from_env() {
    embed_url = env_or("MLDOC_EMBED_URL", embed_url);
    lvlm_url = env_or("MLDOC_LVLM_URL", lvlm_url);
    judge_url = env_or("MLDOC_JUDGE_URL", judge_url);
    api_key = env_or("MLDOC_API_KEY", api_key);
}

Models::Models(EndpointSettings settings)
    : settings_(std::move(settings)), concurrency_(std::max(settings_.concurrency, 1)) {}

Models::Models(std::shared_ptr<const Embedder> embedder, std::shared_ptr<const ChatModel> lvlm,
               std::shared_ptr<const ChatModel> judge, int concurrency)
    : concurrency_(std::max(concurrency, 1)),
      embedder_(std::move(embedder)),
      lvlm_(std::move(lvlm)),
      judge_(std::move(judge)) {}

const Embedder& Models::embedder() const {
    std::lock_guard lock(mutex_);
    if (!embedder_) {
        if (settings_.embed_url.empty()) {
            throw ConfigError("no embedding endpoint configured (set MLDOC_EMBED_URL or --embed-url)");
        }
        embedder_ = std::make_shared<HttpEmbedder>(
            endpoint(settings_, settings_.embed_url, settings_.embed_model));
    }
    return *embedder_;
}

const ChatModel& Models::lvlm() const {
    std::lock_guard lock(mutex_);
    if (!lvlm_) {
        if (settings_.lvlm_url.empty()) {
            throw ConfigError("no LVLM endpoint configured (set MLDOC_LVLM_URL or --lvlm-url)");
        }
        lvlm_ = std::make_shared<HttpChatModel>(
            endpoint(settings_, settings_.lvlm_url, settings_.lvlm_model));
    }
    return *lvlm_;
}

const ChatModel& Models::judge() const {
    std::lock_guard lock(mutex_);
    if (!judge_) {
        if (settings_.judge_url.empty()) {
            throw ConfigError("no judge endpoint configured (set MLDOC_JUDGE_URL or --judge-url)");
        }
        judge_ = std::make_shared<HttpChatModel>(
            endpoint(settings_, settings_.judge_url, settings_.judge_model));
    }
    return *judge_;
}

DirectoryLock::DirectoryLock(const fs::path& lock_file) {
    fs::create_directories(lock_file.parent_path());
    fd_ = ::open(lock_file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw ConfigError("cannot open lock file " + lock_file.string());
    if (::flock(fd_, LOCK_EX) != 0) {
        ::close(fd_);
        throw ConfigError("cannot lock " + lock_file.string());
    }
}

DirectoryLock::~DirectoryLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

json ingest(const StorePaths& store, const json& bundle_json, const IngestOptions& options) {
    options.chunking.validate();
    DocumentBundle bundle = bundle_from_json(bundle_json);
    validate(bundle);
    check_doc_id(bundle.doc_id);

    std::vector<std::string> warnings;
    for (auto& page : bundle.pages) {
        resolve_ref(page.render_ref, options.bundle_root, warnings);
        for (auto& el : page.elements) resolve_ref(el.image_ref, options.bundle_root, warnings);
    }

    DirectoryLock lock(store.lock());
    write_file(store.config(), dump_file({{"format_version", kStoreConfigVersion},
                                          {"chunking", chunking_json(options.chunking)}}));
    write_file(store.bundles() / (bundle.doc_id + ".json"), dump_file(to_json(bundle)));

    const auto chunks = assemble_chunks(bundle, options.chunking);
    std::size_t elements = 0;
    for (const auto& p : bundle.pages) elements += p.elements.size();
    const auto text_chunks = static_cast<std::size_t>(std::count_if(
        chunks.begin(), chunks.end(), [](const Chunk& c) { return c.modality == Modality::text; }));
    return {{"doc_id", bundle.doc_id},
            {"pages", bundle.pages.size()},
            {"elements", elements},
            {"chunks", {{"text", text_chunks}, {"image", chunks.size() - text_chunks}}},
            {"warnings", warnings}};
}

std::vector<DocumentBundle> load_bundles(const StorePaths& store) {
    if (!fs::is_directory(store.bundles())) {
        throw MissingArtifactError("no ingested documents in " + store.root.string() +
                                   " (run ingest first)");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(store.bundles())) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<DocumentBundle> out;
    for (const auto& f : files) out.push_back(bundle_from_json(read_json_file(f)));
    return out;
}

ChunkingConfig load_chunking(const StorePaths& store) {
    if (!fs::exists(store.config())) {
        throw MissingArtifactError("no store config in " + store.root.string() +
                                   " (run ingest first)");
    }
    const json j = read_json_file(store.config());
    if (j.value("format_version", 0) != kStoreConfigVersion) {
        throw LoadError("unsupported store config version in " + store.config().string());
    }
    ChunkingConfig cfg;
    const json& c = j.at("chunking");
    cfg.max_window = c.at("max_window").get<std::size_t>();
    cfg.overlap = c.at("overlap").get<std::size_t>();
    cfg.tokenizer_id = c.at("tokenizer_id").get<std::string>();
    cfg.validate();
    return cfg;
}

std::vector<Chunk> corpus_chunks(const StorePaths& store) {
    const ChunkingConfig cfg = load_chunking(store);
    std::vector<Chunk> out;
    for (const auto& bundle : load_bundles(store)) {
        auto chunks = assemble_chunks(bundle, cfg);
        std::move(chunks.begin(), chunks.end(), std::back_inserter(out));
    }
    return out;
}

json generate(const StorePaths& store, const GenerationConfig& cfg, const Models& models) {
    cfg.validate();
    const auto bundles = load_bundles(store);
    const auto chunks = corpus_chunks(store);
    const PageLookup pages = page_lookup(bundles);

    struct Slot {
        std::vector<QueryNode> nodes;
        GenerationDiagnostics diagnostics;
    };
    std::vector<Slot> slots(chunks.size());
    if (!chunks.empty()) {
        const ChatModel& model = models.lvlm();
        parallel_for(chunks.size(), static_cast<std::size_t>(models.concurrency()),
                     [&](std::size_t i) {
                         const Chunk& c = chunks[i];
                         const Page* page = cfg.mode == GenerationMode::page_context
                                                ? pages(c.doc_id, c.page_indices.front())
                                                : nullptr;
                         slots[i].nodes = generate_queries_for_chunk(c, page, cfg, model,
                                                                     &slots[i].diagnostics);
                     });
    }

    std::vector<json> rows;
    json skipped = json::array();
    json diagnostics = json::array();
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        for (const auto& n : slots[i].nodes) rows.push_back(to_json(n));
        if (slots[i].diagnostics.skipped) skipped.push_back(chunks[i].chunk_id);
        if (!slots[i].diagnostics.messages.empty()) {
            diagnostics.push_back({{"chunk_id", chunks[i].chunk_id},
                                   {"attempts", slots[i].diagnostics.attempts},
                                   {"messages", slots[i].diagnostics.messages}});
        }
    }

    json report = {{"mode", cfg.mode == GenerationMode::page_context ? "page" : "chunk"},
                   {"max_pairs", cfg.max_pairs},
                   {"prompt_version", cfg.prompt_version},
                   {"repr", to_string(cfg.repr)},
                   {"chunks", chunks.size()},
                   {"queries", rows.size()},
                   {"skipped", skipped},
                   {"diagnostics", diagnostics}};

    DirectoryLock lock(store.lock());
    write_file(store.generated_queries(), to_jsonl(rows));
    write_file(store.generation_report(), dump_file(report));
    return report;
}

json build(const StorePaths& store, const BuildOptions& options, const Models& models) {
    const auto chunks = corpus_chunks(store);
    auto nodes = load_generated(store);
    NodeRepr repr = NodeRepr::query_plus_answer;
    if (options.repr) {
        repr = *options.repr;
    } else if (fs::exists(store.generation_report())) {
        repr = parse_node_repr(read_json_file(store.generation_report()).value("repr", "qa"));
    }

    GraphParams params;
    params.k = options.k;
    params.epsilon = options.epsilon;
    params.repr = repr;
    params.validate();

    const auto policy = VisualFilterPolicy::defaults();
    FilterOutcome filtered{chunks, {}, {}};
    const bool has_images = std::any_of(chunks.begin(), chunks.end(), [](const Chunk& c) {
        return c.modality == Modality::image;
    });
    if (options.filter && has_images) {
        EmbeddingVisualClassifier classifier(models.embedder());
        filtered = filter_visual_noise(chunks, classifier, policy, true,
                                       static_cast<std::size_t>(models.concurrency()));
    }

    const std::set<std::string> dropped(filtered.dropped.begin(), filtered.dropped.end());
    const auto before = nodes.size();
    std::erase_if(nodes, [&](const QueryNode& n) { return dropped.count(n.chunk_id) > 0; });
    const auto dropped_queries = before - nodes.size();

    if (!nodes.empty()) nodes = embed_query_nodes(std::move(nodes), repr, models.embedder());
    params.dim = nodes.empty() ? 0 : nodes.front().embedding->size();

    const McqGraph graph = build_graph(filtered.chunks, nodes, params);
    std::size_t edges = 0;
    for (const auto& [id, nbrs] : graph.qq_out()) edges += nbrs.size();

    json report = {{"chunks", graph.chunks().size()},
                   {"queries", graph.queries().size()},
                   {"qq_edges", edges},
                   {"filter_enabled", options.filter},
                   {"dropped_chunks", filtered.dropped},
                   {"dropped_queries", dropped_queries},
                   {"filter_warnings", filtered.warnings},
                   {"params", params_json(graph.params())}};

    DirectoryLock lock(store.lock());
    save_graph(graph, store.root);
    write_file(store.build_report(), dump_file(report));
    return report;
}

McqGraph load_store_graph(const StorePaths& store) {
    if (!has_graph(store.root)) {
        throw MissingArtifactError("no graph in " + store.root.string() + " (run build first)");
    }
    return load_graph(store.root);
}

RetrievalConfig retrieval_config_from_json(const json& j, const McqGraph& graph) {
    RetrievalConfig cfg;
    cfg.repr = graph.params().repr;
    if (j.is_null()) return cfg;
    if (!j.is_object()) throw InputError("retrieval config must be an object");
    static const std::set<std::string> known = {"n", "alpha", "h", "hops", "K", "topk",
                                                "agg", "repr", "dense_fallback"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown retrieval config key '" + key + "'");
    }
    try {
        cfg.n = j.value("n", cfg.n);
        cfg.alpha = j.value("alpha", cfg.alpha);
        cfg.h = j.value("h", j.value("hops", cfg.h));
        cfg.K = j.value("K", j.value("topk", cfg.K));
        if (j.contains("agg")) cfg.agg = parse_aggregation(j.at("agg").get<std::string>());
        if (j.contains("repr")) cfg.repr = parse_node_repr(j.at("repr").get<std::string>());
        cfg.dense_fallback = j.value("dense_fallback", cfg.dense_fallback);
    } catch (const json::exception& e) {
        throw InputError(std::string("retrieval config: ") + e.what());
    }
    cfg.validate(graph.params().epsilon);
    return cfg;
}

json query(const McqGraph& graph, const std::string& question, const RetrievalConfig& cfg,
           const Models& models) {
    if (question.empty()) throw InputError("query text is empty");
    if (graph.queries().empty() && !cfg.dense_fallback) {
        if (cfg.repr != graph.params().repr) {
            throw ConfigError("retrieval repr does not match graph repr");
        }
        cfg.validate(graph.params().epsilon);
        RetrievalResult empty;
        empty.query = question;
        return to_json(empty);
    }
    return to_json(retrieve(graph, question, cfg, models.embedder()));
}

PageLookup page_lookup(const std::vector<DocumentBundle>& bundles) {
    auto by_id = std::make_shared<std::map<std::string, DocumentBundle>>();
    for (const auto& b : bundles) by_id->emplace(b.doc_id, b);
    return [by_id](const std::string& doc_id, int page_index) -> const Page* {
        const auto it = by_id->find(doc_id);
        return it == by_id->end() ? nullptr : it->second.page(page_index);
    };
}

json answer(const McqGraph& graph, const std::vector<DocumentBundle>& bundles,
            const std::string& question, const RetrievalConfig& cfg, AnswerMode mode,
            const Models& models) {
    if (question.empty()) throw InputError("query text is empty");
    RetrievalResult result;
    result.query = question;
    if (!graph.queries().empty() || cfg.dense_fallback) {
        result = retrieve(graph, question, cfg, models.embedder());
    }
    std::vector<std::string> ids;
    for (const auto& r : result.ranked) ids.push_back(r.chunk_id);
    const auto context = context_chunks(graph, ids);
    const auto generated =
        generate_answer(models.lvlm(), question, context, mode, page_lookup(bundles));

    json ctx = json::array();
    for (std::size_t i = 0; i < result.ranked.size(); ++i) {
        const Chunk& c = context[i];
        ctx.push_back({{"chunk_id", c.chunk_id},
                       {"score", result.ranked[i].score},
                       {"content_type", to_string(c.content_type)},
                       {"page_indices", c.page_indices},
                       {"used", i < generated.context_used}});
    }
    return {{"query", question},
            {"answer", generated.full_text},
            {"final_answer", generated.final_answer},
            {"context", ctx}};
}

Method parse_method(std::string_view s) {
    if (s == "mcqg") return Method::mcqg;
    if (s == "bm25") return Method::bm25;
    if (s == "dense") return Method::dense;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected mcqg, bm25 or dense)");
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::mcqg: return "mcqg";
        case Method::bm25: return "bm25";
        case Method::dense: return "dense";
    }
    return "mcqg";
}

json evaluate(const StorePaths& store, const std::vector<QaRecord>& dataset,
              const EvalOptions& options, const Models& models) {
    const McqGraph graph = load_store_graph(store);
    if (options.method == Method::mcqg) options.retrieval.validate(graph.params().epsilon);
    if (options.method == Method::mcqg && options.retrieval.repr != graph.params().repr) {
        throw ConfigError("retrieval repr '" + std::string(to_string(options.retrieval.repr)) +
                          "' does not match graph repr '" +
                          std::string(to_string(graph.params().repr)) + "'");
    }
    if (options.retrieval.K < 1) throw ConfigError("K must be >= 1");
    const auto chunks = graph_chunk_list(graph);
    const auto bundles = options.mode == AnswerMode::page_context ? load_bundles(store)
                                                                  : std::vector<DocumentBundle>{};
    Harness harness(models, options.mode, page_lookup(bundles));
    const auto report = run_dataset(harness, dataset, graph, chunks, options.method,
                                    options.retrieval, models.concurrency());
    json out = to_json(report);
    out["method"] = to_string(options.method);
    out["mode"] = options.mode == AnswerMode::page_context ? "page_context" : "plain";
    if (options.method == Method::mcqg) {
        out["config"] = retrieval_json(options.retrieval);
    } else {
        out["config"] = {{"K", options.retrieval.K}};
    }
    return out;
}

std::size_t SweepGrid::size() const {
    return h_values.size() * k_values.size() * n_values.size() * alpha_values.size() *
           K_values.size() * agg_values.size() * repr_values.size();
}

void SweepGrid::validate(std::size_t max_points) const {
    if (h_values.empty() || k_values.empty() || n_values.empty() || alpha_values.empty() ||
        K_values.empty() || agg_values.empty() || repr_values.empty()) {
        throw ConfigError("every sweep axis needs at least one value");
    }
    if (size() > max_points) {
        throw ConfigError("sweep grid has " + std::to_string(size()) + " points, cap is " +
                          std::to_string(max_points));
    }
    for (int k : k_values) {
        if (k < 1) throw ConfigError("sweep k values must be >= 1");
    }
}

SweepGrid sweep_grid_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("sweep grid must be a JSON object");
    static const std::set<std::string> known = {"h", "k", "n", "alpha", "K", "agg", "repr"};
    for (const auto& [key, value] : j.items()) {
        if (known.count(key) == 0) throw ConfigError("unknown sweep axis '" + key + "'");
    }
    SweepGrid g;
    try {
        g.h_values = axis<int>(j, "h", g.h_values, [](const json& v) { return v.get<int>(); });
        g.k_values = axis<int>(j, "k", g.k_values, [](const json& v) { return v.get<int>(); });
        g.n_values = axis<int>(j, "n", g.n_values, [](const json& v) { return v.get<int>(); });
        g.alpha_values =
            axis<double>(j, "alpha", g.alpha_values, [](const json& v) { return v.get<double>(); });
        g.K_values = axis<int>(j, "K", g.K_values, [](const json& v) { return v.get<int>(); });
        g.agg_values = axis<Aggregation>(j, "agg", g.agg_values, [](const json& v) {
            return parse_aggregation(v.get<std::string>());
        });
        g.repr_values = axis<NodeRepr>(j, "repr", g.repr_values, [](const json& v) {
            return parse_node_repr(v.get<std::string>());
        });
    } catch (const json::exception& e) {
        throw ConfigError(std::string("sweep grid: ") + e.what());
    }
    return g;
}

std::string sweep(const StorePaths& store, const SweepGrid& grid,
                  const std::vector<QaRecord>& dataset, const Models& models,
                  std::size_t max_points) {
    grid.validate(max_points);
    const McqGraph base = load_store_graph(store);
    const auto chunks = graph_chunk_list(base);
    std::vector<QueryNode> nodes = load_generated(store);
    std::erase_if(nodes, [&](const QueryNode& n) { return base.chunks().count(n.chunk_id) == 0; });

    std::map<NodeRepr, std::vector<QueryNode>> embedded;
    std::map<std::pair<int, NodeRepr>, McqGraph> graphs;
    for (NodeRepr repr : grid.repr_values) {
        if (embedded.count(repr) == 0) {
            embedded[repr] = nodes.empty() ? nodes
                                           : embed_query_nodes(nodes, repr, models.embedder());
        }
        for (int k : grid.k_values) {
            GraphParams params = base.params();
            params.k = k;
            params.repr = repr;
            const auto& e = embedded[repr];
            params.dim = e.empty() ? 0 : e.front().embedding->size();
            graphs.emplace(std::make_pair(k, repr), build_graph(chunks, e, params));
        }
    }

    Harness harness(models, AnswerMode::plain, {});
    std::ostringstream csv;
    csv << "h,k,n,alpha,K,agg,repr,overall,rows,correct,excluded";
    static constexpr EvidenceSource sources[] = {EvidenceSource::TXT, EvidenceSource::LAY,
                                                 EvidenceSource::CHA, EvidenceSource::TAB,
                                                 EvidenceSource::FIG};
    static constexpr PageScope scopes[] = {PageScope::single, PageScope::multi,
                                           PageScope::unanswerable, PageScope::cross_element};
    for (auto s : sources) csv << ',' << to_string(s);
    for (auto s : scopes) csv << ',' << to_string(s);
    csv << '\n';

    for (int h : grid.h_values)
        for (int k : grid.k_values)
            for (int n : grid.n_values)
                for (double alpha : grid.alpha_values)
                    for (int K : grid.K_values)
                        for (Aggregation agg : grid.agg_values)
                            for (NodeRepr repr : grid.repr_values) {
                                const McqGraph& graph = graphs.at({k, repr});
                                RetrievalConfig cfg;
                                cfg.h = h;
                                cfg.n = n;
                                cfg.alpha = alpha;
                                cfg.K = K;
                                cfg.agg = agg;
                                cfg.repr = repr;
                                cfg.validate(graph.params().epsilon);
                                const auto report =
                                    run_dataset(harness, dataset, graph, chunks, Method::mcqg,
                                                cfg, models.concurrency());
                                csv << h << ',' << k << ',' << n << ',' << csv_number(alpha)
                                    << ',' << K << ',' << to_string(agg) << ','
                                    << to_string(repr) << ',' << csv_number(report.overall)
                                    << ',' << report.n << ',' << report.correct << ','
                                    << report.excluded;
                                for (auto s : sources) {
                                    csv << ',' << csv_accuracy(report.by_source, to_string(s));
                                }
                                for (auto s : scopes) {
                                    csv << ',' << csv_accuracy(report.by_scope, to_string(s));
                                }
                                csv << '\n';
                            }
    return csv.str();
}

json stats(const StorePaths& store) {
    if (!fs::is_directory(store.root)) {
        throw MissingArtifactError("store " + store.root.string() + " does not exist");
    }
    json out = json::object();
    const auto bundles = load_bundles(store);
    const auto chunking = load_chunking(store);
    std::size_t chunk_count = 0;
    for (const auto& b : bundles) chunk_count += assemble_chunks(b, chunking).size();
    out["documents"] = bundles.size();
    out["chunks"] = chunk_count;
    out["chunking"] = chunking_json(chunking);
    out["generation"] = fs::exists(store.generation_report())
                            ? read_json_file(store.generation_report())
                            : json(nullptr);
    if (out["generation"].is_object()) out["generation"].erase("diagnostics");
    if (has_graph(store.root)) {
        const McqGraph graph = load_graph(store.root);
        std::size_t edges = 0;
        for (const auto& [id, nbrs] : graph.qq_out()) edges += nbrs.size();
        out["graph"] = {{"chunks", graph.chunks().size()},
                        {"queries", graph.queries().size()},
                        {"qq_edges", edges},
                        {"params", params_json(graph.params())}};
    } else {
        out["graph"] = nullptr;
    }
    return out;
}

json error_body(const std::string& code, const std::string& message) {
    return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace mldoc::app

#include "mldoc/service.hpp"

#include <httplib.h>

#include <regex>

#include "mldoc/errors.hpp"
#include "mldoc/io.hpp"
#include "mldoc/store.hpp"

namespace mldoc::app {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Service::Http {
    httplib::Server server;
};

namespace {

bool safe_id(const std::string& id) {
    static const std::regex re("[A-Za-z0-9_][A-Za-z0-9._-]*");
    return std::regex_match(id, re);
}

ServiceResponse error_response(int status, const std::string& code, const std::string& message) {
    return {status, error_body(code, message)};
}

const json& require_object(const json& body) {
    if (!body.is_object()) throw InputError("request body must be a JSON object");
    return body;
}

std::string require_query(const json& body) {
    if (!body.contains("query") || !body.at("query").is_string()) {
        throw InputError("missing string field 'query'");
    }
    return body.at("query").get<std::string>();
}

AnswerMode parse_answer_mode(const json& body) {
    const std::string mode = body.value("mode", "plain");
    if (mode == "plain") return AnswerMode::plain;
    if (mode == "page_context" || mode == "page") return AnswerMode::page_context;
    throw InputError("unknown answer mode '" + mode + "'");
}

ChunkingConfig chunking_from_json(const json& j) {
    ChunkingConfig cfg;
    if (j.is_null()) return cfg;
    cfg.max_window = j.value("max_window", cfg.max_window);
    cfg.overlap = j.value("overlap", cfg.overlap);
    cfg.tokenizer_id = j.value("tokenizer_id", cfg.tokenizer_id);
    return cfg;
}

GenerationConfig generation_from_json(const json& j) {
    GenerationConfig cfg;
    if (j.is_null()) return cfg;
    const std::string mode = j.value("mode", "chunk");
    if (mode == "chunk" || mode == "chunk_only") {
        cfg.mode = GenerationMode::chunk_only;
    } else if (mode == "page" || mode == "page_context") {
        cfg.mode = GenerationMode::page_context;
    } else {
        throw InputError("unknown generation mode '" + mode + "'");
    }
    cfg.max_pairs = j.value("max_pairs", j.value("max_queries", cfg.max_pairs));
    if (j.contains("repr")) cfg.repr = parse_node_repr(j.at("repr").get<std::string>());
    return cfg;
}

BuildOptions build_from_json(const json& j) {
    BuildOptions opts;
    if (j.is_null()) return opts;
    opts.k = j.value("k", opts.k);
    opts.epsilon = j.value("epsilon", j.value("eps", opts.epsilon));
    opts.filter = j.value("filter", opts.filter);
    if (j.contains("repr")) opts.repr = parse_node_repr(j.at("repr").get<std::string>());
    return opts;
}

}  // namespace

int http_status_for(const std::string& code) {
    if (code == "input_error" || code == "config_error" || code == "invalid_json" ||
        code == "generation_parse_error" || code == "judge_parse_error") {
        return 400;
    }
    if (code == "missing_artifact" || code == "not_found") return 404;
    if (code == "conflict") return 409;
    if (code == "gateway_error" || code == "protocol_error" || code == "capability_error" ||
        code == "context_overflow") {
        return 502;
    }
    return 500;
}

Service::Service(fs::path root, std::shared_ptr<const Models> models)
    : root_(std::move(root)), models_(std::move(models)), http_(std::make_unique<Http>()) {
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        const ServiceResponse r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    http_->server.Post(R"(/v1/.*)", dispatch);
    http_->server.Get(R"(/v1/.*)", dispatch);
}

Service::~Service() { stop(); }

StorePaths Service::store_for(const std::string& corpus_id) const {
    return StorePaths{root_ / corpus_id};
}

std::mutex& Service::build_mutex(const std::string& corpus_id) {
    std::lock_guard lock(build_mutexes_guard_);
    auto& slot = build_mutexes_[corpus_id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

std::shared_ptr<const McqGraph> Service::graph(const std::string& corpus_id) {
    {
        std::shared_lock lock(cache_mutex_);
        if (auto it = cache_.find(corpus_id); it != cache_.end()) return it->second;
    }
    auto loaded = std::make_shared<const McqGraph>(load_store_graph(store_for(corpus_id)));
    std::unique_lock lock(cache_mutex_);
    return cache_.emplace(corpus_id, std::move(loaded)).first->second;
}

ServiceResponse Service::handle(const std::string& method, const std::string& path,
                                const std::string& body_text) {
    static const std::regex corpus_route(R"(^/v1/corpora/([^/]+)/(build|retrieve|answer|stats)$)");
    try {
        json body;
        if (!body_text.empty()) {
            try {
                body = json::parse(body_text);
            } catch (const json::parse_error& e) {
                return error_response(400, "invalid_json", e.what());
            }
        }
        if (path == "/v1/corpora") {
            if (method != "POST") return error_response(405, "method_not_allowed", method + " " + path);
            return create_corpus(require_object(body));
        }
        std::smatch m;
        if (!std::regex_match(path, m, corpus_route)) {
            return error_response(404, "not_found", "no route for " + path);
        }
        const std::string id = m[1].str();
        const std::string action = m[2].str();
        if (!safe_id(id)) return error_response(400, "input_error", "invalid corpus id '" + id + "'");
        if (!fs::is_directory(store_for(id).root)) {
            return error_response(404, "not_found", "unknown corpus '" + id + "'");
        }
        const std::string expected = action == "stats" ? "GET" : "POST";
        if (method != expected) return error_response(405, "method_not_allowed", method + " " + path);
        if (action == "stats") return {200, stats(store_for(id))};
        require_object(body);
        if (action == "build") return build_corpus(id, body);
        if (action == "retrieve") return retrieve_route(id, body);
        return answer_route(id, body);
    } catch (const Error& e) {
        return error_response(http_status_for(e.code()), e.code(), e.what());
    } catch (const json::exception& e) {
        return error_response(400, "input_error", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

ServiceResponse Service::create_corpus(const json& body) {
    std::vector<json> bundles;
    if (body.contains("pages")) {
        bundles.push_back(body);
    } else if (body.contains("bundles") && body.at("bundles").is_array()) {
        for (const auto& b : body.at("bundles")) bundles.push_back(b);
    } else if (body.contains("bundle")) {
        bundles.push_back(body.at("bundle"));
    }
    if (bundles.empty()) throw InputError("request carries no bundle");

    std::string id = body.value("corpus_id", "");
    if (id.empty()) id = bundles.front().value("doc_id", "");
    if (!safe_id(id)) throw InputError("invalid corpus id '" + id + "'");

    IngestOptions options;
    options.chunking = chunking_from_json(body.value("chunking", json()));
    options.bundle_root = body.contains("bundle_root")
                              ? fs::path(body.at("bundle_root").get<std::string>())
                              : fs::current_path();

    std::lock_guard lock(build_mutex(id));
    json documents = json::array();
    for (const auto& b : bundles) documents.push_back(ingest(store_for(id), b, options));
    {
        std::unique_lock cache_lock(cache_mutex_);
        cache_.erase(id);
    }
    return {201, {{"corpus_id", id}, {"documents", documents}}};
}

ServiceResponse Service::build_corpus(const std::string& id, const json& body) {
    const GenerationConfig gen =
        generation_from_json(body.value("generation", body.value("gen", json())));
    const BuildOptions opts = build_from_json(body.value("graph", json()));
    std::lock_guard lock(build_mutex(id));
    json generation = generate(store_for(id), gen, *models_);
    json built = build(store_for(id), opts, *models_);
    {
        std::unique_lock cache_lock(cache_mutex_);
        cache_.erase(id);
    }
    generation.erase("diagnostics");
    return {200, {{"generation", generation}, {"build", built}}};
}

ServiceResponse Service::retrieve_route(const std::string& id, const json& body) {
    const auto g = graph(id);
    const RetrievalConfig cfg = retrieval_config_from_json(body.value("config", json()), *g);
    return {200, query(*g, require_query(body), cfg, *models_)};
}

ServiceResponse Service::answer_route(const std::string& id, const json& body) {
    const auto g = graph(id);
    const RetrievalConfig cfg = retrieval_config_from_json(body.value("config", json()), *g);
    const AnswerMode mode = parse_answer_mode(body);
    const auto bundles = mode == AnswerMode::page_context ? load_bundles(store_for(id))
                                                          : std::vector<DocumentBundle>{};
    return {200, answer(*g, bundles, require_query(body), cfg, mode, *models_)};
}

int Service::start(const std::string& host, int port) {
    auto& server = http_->server;
    int bound = port;
    if (port == 0) {
        bound = server.bind_to_any_port(host);
    } else if (!server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();
    return bound;
}

void Service::stop() {
    if (http_) http_->server.stop();
    if (thread_.joinable()) thread_.join();
}

void Service::listen(const std::string& host, int port) {
    if (!http_->server.listen(host, port)) {
        throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
    }
}

}  // namespace mldoc::app

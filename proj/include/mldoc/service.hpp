#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <shared_mutex>
#include <string>
#include <thread>

#include "mldoc/app.hpp"

namespace mldoc::app {

struct ServiceResponse {
    int status = 200;
    nlohmann::json body;
};

// HTTP service over a directory of corpora; corpus <id> lives in root/<id>
// and is an ordinary CLI store.
//
//   POST /v1/corpora                 {bundle} | {corpus_id?, bundles, bundle_root?, chunking?}
//   POST /v1/corpora/{id}/build      {generation: {...}, graph: {...}}
//   POST /v1/corpora/{id}/retrieve   {query, config}
//   POST /v1/corpora/{id}/answer     {query, config, mode}
//   GET  /v1/corpora/{id}/stats
class Service {
public:
    Service(std::filesystem::path root, std::shared_ptr<const Models> models);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Routing without a socket.
    ServiceResponse handle(const std::string& method, const std::string& path,
                           const std::string& body);

    // Serves on a background thread; port 0 picks a free port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    // Blocks on the calling thread.
    void listen(const std::string& host, int port);

private:
    struct Http;

    StorePaths store_for(const std::string& corpus_id) const;
    std::shared_ptr<const McqGraph> graph(const std::string& corpus_id);
    std::mutex& build_mutex(const std::string& corpus_id);

    ServiceResponse create_corpus(const nlohmann::json& body);
    ServiceResponse build_corpus(const std::string& id, const nlohmann::json& body);
    ServiceResponse retrieve_route(const std::string& id, const nlohmann::json& body);
    ServiceResponse answer_route(const std::string& id, const nlohmann::json& body);

    std::filesystem::path root_;
    std::shared_ptr<const Models> models_;
    std::shared_mutex cache_mutex_;
    std::map<std::string, std::shared_ptr<const McqGraph>> cache_;
    std::mutex build_mutexes_guard_;
    std::map<std::string, std::unique_ptr<std::mutex>> build_mutexes_;
    std::unique_ptr<Http> http_;
    std::thread thread_;
};

// Maps an engine error code to an HTTP status.
int http_status_for(const std::string& code);

}  // namespace mldoc::app

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "mldoc/app.hpp"
#include "mldoc/errors.hpp"
#include "mldoc/io.hpp"
#include "mldoc/json_io.hpp"
#include "mldoc/service.hpp"
#include "mldoc/testing/mock_models.hpp"
#include "support/synthetic.hpp"

// After Eigen: <resolv.h> defines a macro that clashes with Eigen parameter names.
#include <httplib.h>

using namespace mldoc;
using json = nlohmann::json;
namespace fs = std::filesystem;
using mldoc::testing::EmbedMode;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("mldoc-app-" + std::to_string(::getpid())) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

test::SyntheticCorpus small_corpus() {
    test::SyntheticOptions opt;
    opt.documents = 2;
    opt.pages = 2;
    opt.paragraphs_per_page = 2;
    return test::make_synthetic_corpus(opt);
}

std::shared_ptr<const app::Models> mock_models(std::uint64_t seed = 3) {
    auto chat = std::make_shared<mldoc::testing::ScriptedChat>();
    return std::make_shared<app::Models>(
        std::make_shared<mldoc::testing::HashEmbedder>(seed, EmbedMode::bag_of_words), chat, chat, 2);
}

app::StorePaths built_store(const fs::path& dir, const test::SyntheticCorpus& corpus,
                            const app::Models& models) {
    const app::StorePaths store{dir};
    app::IngestOptions opts;
    opts.chunking = test::synthetic_chunking();
    for (const auto& b : corpus.bundles) app::ingest(store, to_json(b), opts);
    app::generate(store, {}, models);
    app::build(store, {}, models);
    return store;
}

std::string capture(const std::string& command, int* status) {
    std::string out;
    FILE* pipe = ::popen(command.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int rc = ::pclose(pipe);
    *status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    return out;
}

}  // namespace

TEST(AppIngest, ResolvesImagesAndReportsCounts) {
    const auto dir = fresh_dir("ingest");
    test::SyntheticOptions opt;
    opt.documents = 1;
    opt.pages = 2;
    opt.image_dir = dir / "src";
    const auto corpus = test::make_synthetic_corpus(opt);
    json bundle = to_json(corpus.bundles[0]);
    bundle["pages"][1]["elements"].push_back({{"kind", "figure"}, {"image_ref", "missing.png"}});
    app::IngestOptions io;
    io.bundle_root = opt.image_dir;
    const app::StorePaths store{dir / "store"};
    const json report = app::ingest(store, bundle, io);
    EXPECT_EQ(report.at("doc_id"), "doc0");
    EXPECT_EQ(report.at("pages"), 2);
    EXPECT_EQ(report.at("warnings").size(), 1u);
    const auto stored = app::load_bundles(store);
    ASSERT_EQ(stored.size(), 1u);
    const auto& render = *stored[0].pages[0].render_ref;
    EXPECT_TRUE(fs::path(render).is_absolute());
    EXPECT_EQ(read_file(render), "PAGE:doc0:0");
    EXPECT_EQ(report.at("chunks").at("text").get<int>() + report.at("chunks").at("image").get<int>(),
              static_cast<int>(app::corpus_chunks(store).size()));
}

TEST(AppIngest, RejectsBadInput) {
    const app::StorePaths store{fresh_dir("bad")};
    json bundle = to_json(small_corpus().bundles[0]);
    bundle["doc_id"] = "../escape";
    EXPECT_THROW(app::ingest(store, bundle, {}), InputError);
    EXPECT_THROW(app::ingest(store, json{{"doc_id", "x"}}, {}), InputError);
    EXPECT_THROW(app::load_bundles(store), MissingArtifactError);
    EXPECT_THROW(app::load_store_graph(store), MissingArtifactError);
}

TEST(AppPipeline, BuildQueryAnswerStats) {
    const auto corpus = small_corpus();
    const auto models = mock_models();
    const auto store = built_store(fresh_dir("pipeline"), corpus, *models);
    const json stats = app::stats(store);
    EXPECT_EQ(stats.at("documents"), 2);
    EXPECT_GT(stats.at("graph").at("queries").get<int>(), 0);
    EXPECT_FALSE(stats.at("generation").contains("diagnostics"));

    const auto graph = app::load_store_graph(store);
    const auto& fact = corpus.facts[3];
    const std::string question = "What is the value of " + fact.topic + "?";
    const auto cfg = app::retrieval_config_from_json(json{{"K", 2}, {"agg", "mean"}}, graph);
    EXPECT_EQ(cfg.K, 2);
    EXPECT_EQ(cfg.agg, Aggregation::mean);
    const json q = app::query(graph, question, cfg, *models);
    EXPECT_LE(q.at("ranked").size(), 2u);
    const json a = app::answer(graph, app::load_bundles(store), question, cfg, AnswerMode::page_context, *models);
    EXPECT_EQ(a.at("final_answer"), fact.value);
    EXPECT_FALSE(a.at("context").empty());
    EXPECT_THROW(app::retrieval_config_from_json(json{{"bogus", 1}}, graph), ConfigError);
}

TEST(AppPipeline, GenerationReportAndOrphanedQueries) {
    const auto corpus = small_corpus();
    const auto models = mock_models();
    const auto store = built_store(fresh_dir("orphans"), corpus, *models);
    const json gen = json::parse(read_file(store.generation_report()));
    EXPECT_EQ(gen.at("mode"), "chunk");
    EXPECT_EQ(gen.at("prompt_version"), "v1");
    const json built = json::parse(read_file(store.build_report()));
    EXPECT_EQ(built.at("dropped_chunks").size(), corpus.logo_refs.size());
    const auto graph = app::load_store_graph(store);
    for (const auto& [id, q] : graph.queries()) EXPECT_TRUE(graph.chunks().count(q.chunk_id)) << id;
}

TEST(AppPipeline, EmptyGraphAnswersWithEmptyContext) {
    const auto models = mock_models();
    const app::StorePaths store{fresh_dir("empty")};
    DocumentBundle b;
    b.doc_id = "blank";
    b.pages.push_back({0, {{ElementKind::paragraph, std::string("[fixture:garbage]"), {}, {}}}, {}});
    app::ingest(store, to_json(b), {});
    app::generate(store, {}, *models);
    app::build(store, {}, *models);
    const auto graph = app::load_store_graph(store);
    EXPECT_TRUE(graph.queries().empty());
    const auto cfg = app::retrieval_config_from_json(json(), graph);
    EXPECT_TRUE(app::query(graph, "What is the value of x?", cfg, *models).at("ranked").empty());
}

TEST(AppEval, AllMethodsProduceReports) {
    const auto corpus = small_corpus();
    const auto models = mock_models();
    const auto store = built_store(fresh_dir("eval"), corpus, *models);
    const auto dataset = test::synthetic_dataset(corpus, 4, 2, 1);
    for (const auto method : {app::Method::mcqg, app::Method::bm25, app::Method::dense}) {
        app::EvalOptions opts;
        opts.method = method;
        const json report = app::evaluate(store, dataset, opts, *models);
        EXPECT_EQ(report.at("method"), app::to_string(method));
        EXPECT_EQ(report.at("n").get<std::size_t>() + report.at("excluded").get<std::size_t>(), dataset.size());
        EXPECT_GT(report.at("overall").get<double>(), 0.5) << app::to_string(method);
    }
    EXPECT_THROW(app::parse_method("colbert"), ConfigError);
}

TEST(AppSweep, GridParsingAndCsv) {
    const auto grid = app::sweep_grid_from_json(json{{"h", {0, 2}}, {"k", 2}, {"agg", {"max", "mean"}}});
    EXPECT_EQ(grid.size(), 4u);
    EXPECT_THROW(app::sweep_grid_from_json(json{{"h", json::array()}}), ConfigError);
    EXPECT_THROW(app::sweep_grid_from_json(json{{"depth", {1}}}), ConfigError);
    EXPECT_THROW(grid.validate(3), ConfigError);

    const auto corpus = small_corpus();
    const auto models = mock_models();
    const auto store = built_store(fresh_dir("sweep"), corpus, *models);
    const auto dataset = test::synthetic_dataset(corpus, 5, 1, 1);
    const std::string csv = app::sweep(store, grid, dataset, *models);
    const auto header_end = csv.find('\n');
    EXPECT_EQ(csv.substr(0, header_end),
              "h,k,n,alpha,K,agg,repr,overall,rows,correct,excluded,TXT,LAY,CHA,TAB,FIG,"
              "single,multi,unanswerable,cross_element");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_NE(csv.find("\n0,2,10,1.2,5,max,qa,"), std::string::npos);
}

TEST(AppLock, SecondHolderWaits) {
    const auto dir = fresh_dir("lock");
    std::atomic<bool> acquired{false};
    std::thread other;
    {
        app::DirectoryLock first(dir / ".build.lock");
        other = std::thread([&] {
            app::DirectoryLock second(dir / ".build.lock");
            acquired = true;
        });
        std::this_thread::sleep_for(std::chrono::milliseconds(150));
        EXPECT_FALSE(acquired.load());
    }
    other.join();
    EXPECT_TRUE(acquired.load());
}

TEST(AppModels, MissingEndpointIsConfigError) {
    const app::Models models(app::EndpointSettings{});
    EXPECT_THROW(models.embedder(), ConfigError);
    EXPECT_THROW(models.judge(), ConfigError);
}

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        root = fresh_dir("service");
        service = std::make_unique<app::Service>(root, mock_models());
    }
    json create() {
        json body = {{"corpus_id", "demo"}, {"bundles", json::array()},
                     {"chunking", {{"max_window", 48}, {"overlap", 8}}}};
        for (const auto& b : corpus.bundles) body["bundles"].push_back(to_json(b));
        const auto r = service->handle("POST", "/v1/corpora", body.dump());
        EXPECT_EQ(r.status, 201) << r.body.dump();
        return r.body;
    }
    fs::path root;
    test::SyntheticCorpus corpus = small_corpus();
    std::unique_ptr<app::Service> service;
};

TEST_F(ServiceTest, LifecycleMatchesLibraryCalls) {
    create();
    auto r = service->handle("POST", "/v1/corpora/demo/retrieve", json{{"query", "x"}}.dump());
    EXPECT_EQ(r.status, 404);
    EXPECT_EQ(r.body.at("error").at("code"), "missing_artifact");

    r = service->handle("POST", "/v1/corpora/demo/build", json{{"graph", {{"k", 2}}}}.dump());
    ASSERT_EQ(r.status, 200) << r.body.dump();
    EXPECT_EQ(r.body.at("build").at("params").at("k"), 2);

    const std::string question = "What is the value of " + corpus.facts[0].topic + "?";
    const json config = {{"n", 5}, {"h", 1}};
    r = service->handle("POST", "/v1/corpora/demo/retrieve", json{{"query", question}, {"config", config}}.dump());
    ASSERT_EQ(r.status, 200);
    const app::StorePaths store{root / "demo"};
    const auto graph = app::load_store_graph(store);
    const auto models = mock_models();
    EXPECT_EQ(r.body, app::query(graph, question, app::retrieval_config_from_json(config, graph), *models));

    r = service->handle("POST", "/v1/corpora/demo/answer", json{{"query", question}}.dump());
    EXPECT_EQ(r.body.at("final_answer"), corpus.facts[0].value);
    r = service->handle("GET", "/v1/corpora/demo/stats", "");
    EXPECT_EQ(r.body, app::stats(store));
}

TEST_F(ServiceTest, ErrorStatuses) {
    EXPECT_EQ(service->handle("POST", "/v1/corpora", "{oops").status, 400);
    EXPECT_EQ(service->handle("GET", "/v1/corpora", "").status, 405);
    EXPECT_EQ(service->handle("GET", "/v1/corpora/none/stats", "").status, 404);
    EXPECT_EQ(service->handle("GET", "/v2/elsewhere", "").status, 404);
    create();
    EXPECT_EQ(service->handle("GET", "/v1/corpora/demo/build", "").status, 405);
    const auto unbuilt = service->handle("POST", "/v1/corpora/demo/retrieve", "{}");
    EXPECT_EQ(unbuilt.status, 404);
    EXPECT_EQ(unbuilt.body.at("error").at("code"), "missing_artifact");
    const auto bad = service->handle("POST", "/v1/corpora/demo/build",
                                     json{{"generation", {{"mode", "sideways"}}}}.dump());
    EXPECT_EQ(bad.status, 400);
    EXPECT_EQ(app::http_status_for("gateway_error"), 502);
    EXPECT_EQ(app::http_status_for("context_overflow"), 502);
    EXPECT_EQ(app::http_status_for("load_error"), 500);
}

TEST_F(ServiceTest, ServesOverHttp) {
    create();
    const int port = service->start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    auto res = client.Get("/v1/corpora/demo/stats");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body).at("documents"), 2);
    res = client.Post("/v1/corpora/missing/retrieve", "{}", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 404);
    service->stop();
}

TEST(Cli, OutputMatchesServiceAndExitCodes) {
    const auto dir = fresh_dir("cli");
    mldoc::testing::MockServer server(3, EmbedMode::bag_of_words);
    server.start();
    const std::string urls = " --embed-url " + server.base_url() + " --lvlm-url " + server.base_url() +
                             " --judge-url " + server.base_url();
    const std::string cli = std::string("'") + MLDOC_CLI + "'" + urls + " ";
    const auto corpus = small_corpus();
    const fs::path bundle = dir / "doc0.json";
    write_file(bundle, to_json(corpus.bundles[0]).dump());
    const fs::path store = dir / "store";
    int status = 0;
    const json ingested = json::parse(capture(cli + "ingest --input " + bundle.string() + " --store " +
                                                  store.string() + " --max-window 48 --overlap 8",
                                              &status));
    EXPECT_EQ(status, 0);
    EXPECT_EQ(ingested.at("doc_id"), "doc0");
    capture(cli + "generate --store " + store.string(), &status);
    EXPECT_EQ(status, 0);
    capture(cli + "build --store " + store.string() + " --k 2", &status);
    EXPECT_EQ(status, 0);

    const std::string question = "What is the value of " + corpus.facts[1].topic + "?";
    const json from_cli = json::parse(capture(
        cli + "query --store " + store.string() + " --q '" + question + "' --hops 1 --topk 3", &status));
    EXPECT_EQ(status, 0);
    const app::StorePaths paths{store};
    const auto graph = app::load_store_graph(paths);
    EXPECT_EQ(from_cli, app::query(graph, question,
                                   app::retrieval_config_from_json(json{{"h", 1}, {"K", 3}}, graph),
                                   *mock_models()));

    const std::string err = capture(cli + "query --store " + (dir / "nothing").string() + " --q x 2>&1", &status);
    EXPECT_EQ(status, 3);
    EXPECT_EQ(json::parse(err).at("error").at("code"), "missing_artifact");
    capture(cli + "query --store " + store.string() + " 2>/dev/null", &status);
    EXPECT_EQ(status, 2);
    write_file(dir / "bad.jsonl", "{\"question\": \"Q\"}\n");
    capture(cli + "eval --store " + store.string() + " --dataset " + (dir / "bad.jsonl").string() +
                " --out " + (dir / "r.json").string() + " 2>/dev/null", &status);
    EXPECT_EQ(status, 1);
    server.stop();
}

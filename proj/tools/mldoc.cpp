// mldoc: command-line front end for the MCQG pipeline.
//
//   mldoc ingest   --input bundle.json --store DIR
//   mldoc generate --store DIR [--mode chunk|page] [--max-queries 20] [--repr qa|q|a]
//   mldoc build    --store DIR [--k 3] [--eps 1.0] [--no-filter]
//   mldoc query    --store DIR --q TEXT [--n 10 --alpha 1.2 --hops 2 --topk 5 --agg max]
//   mldoc answer   --store DIR --q TEXT [--page-context]
//   mldoc eval     --store DIR --dataset qa.jsonl --method mcqg|bm25|dense --out report.json
//   mldoc sweep    --store DIR --grid grid.json --dataset qa.jsonl --out sweep.csv
//   mldoc serve    --store ROOT --port P
//   mldoc stats    --store DIR
//
// Results go to stdout as one JSON line. Failures print {"error":{...}} on
// stderr and exit 2 (usage), 3 (missing store artifacts) or 1.
#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <optional>

#include "mldoc/app.hpp"
#include "mldoc/errors.hpp"
#include "mldoc/io.hpp"
#include "mldoc/service.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mldoc;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMissing = 3;

int fail(const std::string& code, const std::string& message, int exit_code) {
    std::cerr << app::error_body(code, message).dump() << std::endl;
    return exit_code;
}

struct RetrievalFlags {
    int n = 10;
    double alpha = 1.2;
    int hops = 2;
    int topk = 5;
    std::string agg = "max";
    std::optional<std::string> repr;
    bool dense_fallback = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--n", n, "Max entry nodes")->capture_default_str();
        cmd->add_option("--alpha", alpha, "Entry similarity threshold")->capture_default_str();
        cmd->add_option("--hops", hops, "Q-Q expansion hops")->capture_default_str();
        cmd->add_option("--topk", topk, "Context chunks K")->capture_default_str();
        cmd->add_option("--agg", agg, "Chunk score aggregation")
            ->check(CLI::IsMember({"max", "mean"}))
            ->capture_default_str();
        cmd->add_option("--repr", repr, "Node representation (defaults to the graph's)")
            ->check(CLI::IsMember({"qa", "q", "a"}));
        cmd->add_flag("--dense-fallback", dense_fallback,
                      "Dense chunk retrieval when no query node clears alpha");
    }

    RetrievalConfig config(NodeRepr graph_repr) const {
        RetrievalConfig cfg;
        cfg.n = n;
        cfg.alpha = alpha;
        cfg.h = hops;
        cfg.K = topk;
        cfg.agg = parse_aggregation(agg);
        cfg.repr = repr ? parse_node_repr(*repr) : graph_repr;
        cfg.dense_fallback = dense_fallback;
        return cfg;
    }
};

void print(const json& j) { std::cout << j.dump() << std::endl; }

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::vector<QaRecord> read_dataset(const fs::path& path) {
    return parse_dataset(read_file(path), path.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Multimodal chunk-query graph retrieval and evaluation"};
    cli.require_subcommand(1);
    cli.fallthrough();

    app::EndpointSettings endpoints;
    cli.add_option("--embed-url", endpoints.embed_url, "Embedding endpoint (MLDOC_EMBED_URL)");
    cli.add_option("--lvlm-url", endpoints.lvlm_url, "Vision-language endpoint (MLDOC_LVLM_URL)");
    cli.add_option("--judge-url", endpoints.judge_url, "Judge endpoint (MLDOC_JUDGE_URL)");
    cli.add_option("--api-key", endpoints.api_key, "Bearer token (MLDOC_API_KEY)");
    cli.add_option("--embed-model", endpoints.embed_model)->capture_default_str();
    cli.add_option("--lvlm-model", endpoints.lvlm_model)->capture_default_str();
    cli.add_option("--judge-model", endpoints.judge_model)->capture_default_str();
    cli.add_option("--retries", endpoints.max_retries, "Retries per request")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cli.add_option("--timeout-ms", endpoints.timeout_ms)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cli.add_option("--concurrency", endpoints.concurrency, "In-flight requests per endpoint")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    fs::path store;
    auto add_store = [&store](CLI::App* cmd) {
        cmd->add_option("--store", store, "Store directory")->required();
    };

    auto* ingest_cmd = cli.add_subcommand("ingest", "Validate a bundle and add it to the store");
    fs::path input;
    std::optional<fs::path> bundle_root;
    app::IngestOptions ingest_opts;
    ingest_cmd->add_option("--input", input, "Bundle JSON")->required()->check(CLI::ExistingFile);
    add_store(ingest_cmd);
    ingest_cmd->add_option("--bundle-root", bundle_root,
                           "Base for relative image refs (default: the bundle's directory)");
    ingest_cmd->add_option("--max-window", ingest_opts.chunking.max_window)->capture_default_str();
    ingest_cmd->add_option("--overlap", ingest_opts.chunking.overlap)->capture_default_str();
    ingest_cmd->add_option("--tokenizer", ingest_opts.chunking.tokenizer_id)->capture_default_str();

    auto* generate_cmd = cli.add_subcommand("generate", "Run MDoc2Query over every chunk");
    std::string gen_mode = "chunk";
    std::string gen_repr = "qa";
    GenerationConfig gen_cfg;
    add_store(generate_cmd);
    generate_cmd->add_option("--mode", gen_mode)
        ->check(CLI::IsMember({"chunk", "page"}))
        ->capture_default_str();
    generate_cmd->add_option("--max-queries", gen_cfg.max_pairs)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    generate_cmd->add_option("--repr", gen_repr, "Node representation recorded for build")
        ->check(CLI::IsMember({"qa", "q", "a"}))
        ->capture_default_str();

    auto* build_cmd = cli.add_subcommand("build", "Filter visuals, embed nodes, build the graph");
    app::BuildOptions build_opts;
    bool no_filter = false;
    std::optional<std::string> build_repr;
    add_store(build_cmd);
    build_cmd->add_option("--k", build_opts.k, "Q-Q neighbors")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    build_cmd->add_option("--eps", build_opts.epsilon, "Similarity offset")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    build_cmd->add_flag("--no-filter", no_filter, "Keep every image chunk");
    build_cmd->add_option("--repr", build_repr)->check(CLI::IsMember({"qa", "q", "a"}));

    auto* query_cmd = cli.add_subcommand("query", "Retrieve and print provenance JSON");
    std::string question;
    RetrievalFlags query_flags;
    add_store(query_cmd);
    query_cmd->add_option("--q", question, "User query")->required();
    query_flags.attach(query_cmd);

    auto* answer_cmd = cli.add_subcommand("answer", "Retrieve, then generate an answer");
    RetrievalFlags answer_flags;
    bool page_context = false;
    add_store(answer_cmd);
    answer_cmd->add_option("--q", question, "User query")->required();
    answer_cmd->add_flag("--page-context", page_context, "Attach page renders to the context");
    answer_flags.attach(answer_cmd);

    auto* eval_cmd = cli.add_subcommand("eval", "Answer and judge a QA dataset");
    fs::path dataset_path;
    fs::path out_path;
    std::string method = "mcqg";
    RetrievalFlags eval_flags;
    add_store(eval_cmd);
    eval_cmd->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--method", method)
        ->check(CLI::IsMember({"mcqg", "bm25", "dense"}))
        ->capture_default_str();
    eval_cmd->add_option("--out", out_path, "Report JSON")->required();
    eval_cmd->add_flag("--page-context", page_context);
    eval_flags.attach(eval_cmd);

    auto* sweep_cmd = cli.add_subcommand("sweep", "Evaluate every point of a parameter grid");
    fs::path grid_path;
    std::size_t max_points = app::kDefaultSweepCap;
    add_store(sweep_cmd);
    sweep_cmd->add_option("--grid", grid_path)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--dataset", dataset_path)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--out", out_path, "CSV output")->required();
    sweep_cmd->add_option("--max-points", max_points)->capture_default_str();

    auto* serve_cmd = cli.add_subcommand("serve", "HTTP API over a directory of corpora");
    int port = 8080;
    std::string host = "127.0.0.1";
    add_store(serve_cmd);
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--host", host)->capture_default_str();

    auto* stats_cmd = cli.add_subcommand("stats", "Counts and parameters of a store");
    add_store(stats_cmd);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage_error", e.what(), kExitUsage);
    }

    endpoints.fill_from_env();
    const app::Models models(endpoints);
    const app::StorePaths paths{store};

    try {
        if (*ingest_cmd) {
            ingest_opts.bundle_root = bundle_root ? *bundle_root : fs::absolute(input).parent_path();
            print(app::ingest(paths, read_json(input), ingest_opts));
        } else if (*generate_cmd) {
            gen_cfg.mode = gen_mode == "page" ? GenerationMode::page_context
                                              : GenerationMode::chunk_only;
            gen_cfg.repr = parse_node_repr(gen_repr);
            print(app::generate(paths, gen_cfg, models));
        } else if (*build_cmd) {
            build_opts.filter = !no_filter;
            if (build_repr) build_opts.repr = parse_node_repr(*build_repr);
            print(app::build(paths, build_opts, models));
        } else if (*query_cmd) {
            const McqGraph graph = app::load_store_graph(paths);
            print(app::query(graph, question, query_flags.config(graph.params().repr), models));
        } else if (*answer_cmd) {
            const McqGraph graph = app::load_store_graph(paths);
            const AnswerMode mode = page_context ? AnswerMode::page_context : AnswerMode::plain;
            const auto bundles = page_context ? app::load_bundles(paths)
                                              : std::vector<DocumentBundle>{};
            print(app::answer(graph, bundles, question,
                              answer_flags.config(graph.params().repr), mode, models));
        } else if (*eval_cmd) {
            const auto dataset = read_dataset(dataset_path);
            const McqGraph graph = app::load_store_graph(paths);
            app::EvalOptions opts;
            opts.method = app::parse_method(method);
            opts.retrieval = eval_flags.config(graph.params().repr);
            opts.mode = page_context ? AnswerMode::page_context : AnswerMode::plain;
            const json report = app::evaluate(paths, dataset, opts, models);
            write_file(out_path, report.dump(2) + "\n");
            print(report);
        } else if (*sweep_cmd) {
            const auto grid = app::sweep_grid_from_json(read_json(grid_path));
            const auto dataset = read_dataset(dataset_path);
            const std::string csv = app::sweep(paths, grid, dataset, models, max_points);
            write_file(out_path, csv);
            print({{"out", out_path.string()}, {"rows", grid.size()}});
        } else if (*serve_cmd) {
            auto shared = std::make_shared<const app::Models>(endpoints);
            app::Service service(store, shared);
            std::cerr << "listening on http://" << host << ":" << port << std::endl;
            service.listen(host, port);
        } else if (*stats_cmd) {
            print(app::stats(paths));
        }
    } catch (const MissingArtifactError& e) {
        return fail(e.code(), e.what(), kExitMissing);
    } catch (const Error& e) {
        return fail(e.code(), e.what(), kExitFailure);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), kExitFailure);
    }
    return 0;
}

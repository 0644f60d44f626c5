// mldoc-mock-server: deterministic embedding and chat endpoints for offline runs.
#include <CLI11.hpp>

#include <future>
#include <iostream>
#include <nlohmann/json.hpp>

#include "mldoc/errors.hpp"
#include "mldoc/testing/mock_models.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Deterministic mock of the embedding and chat wire protocol"};
    int port = 0;
    std::uint64_t seed = 0;
    std::string mode = "string_hash";
    cli.add_option("--port", port, "Port on 127.0.0.1 (0 picks a free one)")->capture_default_str();
    cli.add_option("--seed", seed, "Embedding hash seed")->capture_default_str();
    cli.add_option("--embed-mode", mode, "string_hash or bag_of_words")
        ->check(CLI::IsMember({"string_hash", "string", "bag_of_words", "bow"}))
        ->capture_default_str();
    CLI11_PARSE(cli, argc, argv);

    try {
        mldoc::testing::MockServer server(seed, mldoc::testing::parse_embed_mode(mode));
        if (port != 0) {
            std::cout << "{\"port\":" << port << "}" << std::endl;
            server.listen_blocking("127.0.0.1", port);
        } else {
            const int bound = server.start(0);
            std::cout << "{\"port\":" << bound << "}" << std::endl;
            std::promise<void>().get_future().wait();
        }
    } catch (const mldoc::Error& e) {
        const nlohmann::json body = {{"error", {{"code", e.code()}, {"message", e.what()}}}};
        std::cerr << body.dump() << std::endl;
        return 1;
    }
    return 0;
}

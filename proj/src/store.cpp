#include "mldoc/store.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "mldoc/io.hpp"
#include "mldoc/json_io.hpp"

namespace mldoc {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kChunks = "chunks.jsonl";
constexpr const char* kQueries = "queries.jsonl";
constexpr const char* kVectors = "vectors.bin";
constexpr const char* kEdges = "qq_edges.jsonl";

std::string encode_vectors(const RowMatrix<float>& m) {
    std::string out;
    out.resize(static_cast<std::size_t>(m.size()) * 4);
    std::size_t pos = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const auto bits = std::bit_cast<std::uint32_t>(m(r, c));
            for (int b = 0; b < 4; ++b) out[pos++] = static_cast<char>((bits >> (8 * b)) & 0xFF);
        }
    }
    return out;
}

float decode_float(const std::string& bytes, std::size_t pos) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
    }
    return std::bit_cast<float>(bits);
}

std::string read_store_file(const fs::path& dir, const char* name) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) throw LoadError("store file missing: " + p.string());
    return read_file(p);
}

}  // namespace

bool has_graph(const fs::path& dir) { return fs::exists(dir / kManifest); }

void save_graph(const McqGraph& graph, const fs::path& dir) {
    fs::create_directories(dir);

    std::vector<json> chunk_rows;
    for (const auto& [id, c] : graph.chunks()) chunk_rows.push_back(to_json(c));
    std::vector<json> query_rows;
    std::vector<json> edge_rows;
    for (const auto& id : graph.query_order()) {
        query_rows.push_back(to_json(graph.query(id)));
        json nbrs = json::array();
        for (const auto& n : graph.qq_out().at(id)) nbrs.push_back(json::array({n.query_id, n.sim}));
        edge_rows.push_back({{"q_id", id}, {"nbrs", std::move(nbrs)}});
    }

    const std::string chunks = to_jsonl(chunk_rows);
    const std::string queries = to_jsonl(query_rows);
    const std::string vectors = encode_vectors(graph.vectors());
    const std::string edges = to_jsonl(edge_rows);

    const auto& p = graph.params();
    json manifest = {
        {"format_version", kStoreFormatVersion},
        {"dim", p.dim},
        {"k", p.k},
        {"epsilon", p.epsilon},
        {"repr", to_string(p.repr)},
        {"counts", {{"chunks", graph.chunks().size()}, {"queries", graph.queries().size()}}},
        {"checksums",
         {{kChunks, sha256_hex(chunks)},
          {kQueries, sha256_hex(queries)},
          {kVectors, sha256_hex(vectors)},
          {kEdges, sha256_hex(edges)}}},
    };

    write_file(dir / kChunks, chunks);
    write_file(dir / kQueries, queries);
    write_file(dir / kVectors, vectors);
    write_file(dir / kEdges, edges);
    // Manifest last: its presence marks a complete store.
    write_file(dir / kManifest, manifest.dump(2) + "\n");
}

McqGraph load_graph(const fs::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_store_file(dir, kManifest));
    } catch (const json::exception& e) {
        throw LoadError(std::string("manifest is not valid JSON: ") + e.what());
    }

    try {
        const int version = manifest.at("format_version").get<int>();
        if (version != kStoreFormatVersion) {
            throw LoadError("unsupported store format_version " + std::to_string(version) +
                            " (expected " + std::to_string(kStoreFormatVersion) + ")");
        }

        std::map<std::string, std::string> contents;
        for (const char* name : {kChunks, kQueries, kVectors, kEdges}) {
            std::string bytes = read_store_file(dir, name);
            const std::string expected = manifest.at("checksums").at(name).get<std::string>();
            if (sha256_hex(bytes) != expected) throw LoadError(std::string("checksum mismatch for ") + name);
            contents.emplace(name, std::move(bytes));
        }

        GraphParams params;
        params.dim = manifest.at("dim").get<Eigen::Index>();
        params.k = manifest.at("k").get<int>();
        params.epsilon = manifest.at("epsilon").get<double>();
        params.repr = parse_node_repr(manifest.at("repr").get<std::string>());

        std::map<std::string, Chunk> chunks;
        for (const auto& row : parse_jsonl(contents.at(kChunks), kChunks)) {
            Chunk c = chunk_from_json(row);
            const std::string id = c.chunk_id;
            chunks.emplace(id, std::move(c));
        }

        const auto query_rows = parse_jsonl(contents.at(kQueries), kQueries);
        const std::string& vectors = contents.at(kVectors);
        const std::size_t row_bytes = static_cast<std::size_t>(params.dim) * 4;
        if (vectors.size() != query_rows.size() * row_bytes) {
            throw LoadError("vectors.bin has " + std::to_string(vectors.size()) +
                            " bytes, expected " + std::to_string(query_rows.size() * row_bytes));
        }
        std::map<std::string, QueryNode> queries;
        for (std::size_t i = 0; i < query_rows.size(); ++i) {
            QueryNode n = query_node_from_json(query_rows[i]);
            Embedding v(params.dim);
            for (Eigen::Index c = 0; c < params.dim; ++c) {
                v(c) = decode_float(vectors, i * row_bytes + static_cast<std::size_t>(c) * 4);
            }
            n.embedding = std::move(v);
            const std::string id = n.query_id;
            queries.emplace(id, std::move(n));
        }

        std::map<std::string, std::vector<ScoredQuery>> qq_out;
        for (const auto& row : parse_jsonl(contents.at(kEdges), kEdges)) {
            std::vector<ScoredQuery> nbrs;
            for (const auto& pair : row.at("nbrs")) {
                nbrs.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
            }
            qq_out.emplace(row.at("q_id").get<std::string>(), std::move(nbrs));
        }

        const auto& counts = manifest.at("counts");
        if (counts.at("chunks").get<std::size_t>() != chunks.size() ||
            counts.at("queries").get<std::size_t>() != queries.size()) {
            throw LoadError("manifest counts do not match store contents");
        }
        return McqGraph::from_parts(params, std::move(chunks), std::move(queries),
                                    std::move(qq_out));
    } catch (const json::exception& e) {
        throw LoadError(std::string("malformed store: ") + e.what());
    } catch (const InputError& e) {
        throw LoadError(std::string("malformed store: ") + e.what());
    } catch (const BuildError& e) {
        throw LoadError(std::string("inconsistent store: ") + e.what());
    }
}

}  // namespace mldoc

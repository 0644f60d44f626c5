#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mldoc/corpus.hpp"
#include "mldoc/evaluation.hpp"
#include "mldoc/gateway.hpp"
#include "mldoc/graph.hpp"
#include "mldoc/mdoc2query.hpp"

namespace mldoc::test {

// Fact sentences "The value of <topic> is <value>." spread over paragraphs and
// figure captions. Topics are unique pseudo-word pairs.
struct SyntheticFact {
    std::string doc_id;
    std::string topic;
    std::string value;
    int page = 0;
    bool in_figure = false;
};

struct SyntheticOptions {
    int documents = 3;
    int pages = 14;
    int paragraphs_per_page = 6;
    int facts_per_paragraph = 3;
    int figures_per_page = 1;
    int facts_per_figure = 2;
    int logos_per_document = 1;
    std::uint64_t seed = 1;
    // When set, image bytes are written under image_dir/<doc>/ and referenced
    // by paths relative to image_dir. Otherwise images are inline data URIs.
    std::filesystem::path image_dir;
};

struct SyntheticCorpus {
    std::vector<DocumentBundle> bundles;
    std::vector<SyntheticFact> facts;
    std::vector<std::string> logo_refs;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options);

// Chunking used for the synthetic corpus so that it yields a few hundred chunks.
ChunkingConfig synthetic_chunking();

// Every `stride`-th fact as an answerable row, plus `unanswerable` rows about
// topics that do not occur.
std::vector<QaRecord> synthetic_dataset(const SyntheticCorpus& corpus, int stride,
                                        int unanswerable, std::uint64_t seed);

std::string fact_sentence(const std::string& topic, const std::string& value);

// Pseudo-random unit vector (double) from a 64-bit engine; used for probes.
Vector<double> random_unit(std::uint64_t& state, int dim);

struct BuiltCorpus {
    std::vector<Chunk> chunks;
    std::vector<QueryNode> nodes;  // embedded
    McqGraph graph;
};

// In-process chunking, generation and embedding of a synthetic corpus.
BuiltCorpus build_in_process(const SyntheticCorpus& corpus, const ChunkingConfig& chunking,
                             const GraphParams& params, const Embedder& embedder,
                             const ChatModel& chat);

}  // namespace mldoc::test

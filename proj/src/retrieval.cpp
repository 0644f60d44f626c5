#include "mldoc/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "mldoc/tokenizer.hpp"

namespace mldoc {

using json = nlohmann::json;

std::string_view to_string(Aggregation agg) { return agg == Aggregation::max ? "max" : "mean"; }

Aggregation parse_aggregation(std::string_view s) {
    if (s == "max") return Aggregation::max;
    if (s == "mean") return Aggregation::mean;
    throw ConfigError("unknown aggregation '" + std::string(s) + "'");
}

void RetrievalConfig::validate(double epsilon) const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (h < 0) throw ConfigError("h must be >= 0");
    if (!(alpha >= 0.0) || alpha > epsilon + 1.0) {
        throw ConfigError("alpha must lie in [0, epsilon + 1]");
    }
}

namespace {

bool supporter_before(const Supporter& a, const Supporter& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.query_id < b.query_id;
}

bool ranked_before(const RankedChunk& a, const RankedChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
}

bool chunk_score_before(const ChunkScore& a, const ChunkScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
}

std::vector<std::string> bm25_terms(std::string_view text, const std::string& tokenizer_id) {
    std::vector<std::string> terms;
    for (const Token& t : tokenize_spans(text, tokenizer_id)) {
        std::string term(t.view(text));
        const bool has_word = std::any_of(term.begin(), term.end(), [](unsigned char c) {
            return std::isalnum(c) || c >= 0x80;
        });
        if (!has_word) continue;
        std::transform(term.begin(), term.end(), term.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        terms.push_back(std::move(term));
    }
    return terms;
}

}  // namespace

std::vector<ScoredQuery> retrieve_entry_nodes(const McqGraph& graph, const Embedding& user, int n,
                                              double alpha) {
    const auto sims = probe_sims(graph, user);
    std::vector<ScoredQuery> passing;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (sims[i] >= alpha) passing.push_back({graph.query_order()[i], sims[i]});
    }
    std::sort(passing.begin(), passing.end(), ranks_before);
    if (n >= 0 && passing.size() > static_cast<std::size_t>(n)) {
        passing.resize(static_cast<std::size_t>(n));
    }
    return passing;
}

std::vector<ExpandedQuery> expand_queries(const McqGraph& graph, const Embedding& user,
                                          const std::vector<ScoredQuery>& entries, int h) {
    std::set<std::string> seeds;
    for (const auto& e : entries) seeds.insert(e.query_id);
    const auto dist = hop_distances(graph, seeds, h);

    std::vector<ExpandedQuery> out;
    out.reserve(dist.size());
    for (const auto& [id, hops] : dist) {
        out.push_back({id, sim(user, *graph.query(id).embedding, graph.params().epsilon), hops});
    }
    std::sort(out.begin(), out.end(), [](const ExpandedQuery& a, const ExpandedQuery& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.query_id < b.query_id;
    });
    return out;
}

std::vector<ChunkCandidate> collect_candidates(const McqGraph& graph,
                                               const std::vector<ExpandedQuery>& expanded) {
    std::map<std::string, std::vector<Supporter>> by_chunk;
    for (const auto& q : expanded) {
        by_chunk[graph.cq_edges().at(q.query_id)].push_back({q.query_id, q.sim, q.hops});
    }
    std::vector<ChunkCandidate> out;
    out.reserve(by_chunk.size());
    for (auto& [chunk_id, supporters] : by_chunk) {
        std::sort(supporters.begin(), supporters.end(), supporter_before);
        out.push_back({chunk_id, std::move(supporters)});
    }
    return out;
}

std::vector<RankedChunk> rank_chunks(const std::vector<ChunkCandidate>& candidates,
                                     Aggregation agg) {
    std::vector<RankedChunk> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.supporters.empty()) {
            throw InputError("candidate chunk '" + c.chunk_id + "' has no supporting query");
        }
        double score = 0.0;
        if (agg == Aggregation::max) {
            score = c.supporters.front().sim;
            for (const auto& s : c.supporters) score = std::max(score, s.sim);
        } else {
            for (const auto& s : c.supporters) score += s.sim;
            score /= static_cast<double>(c.supporters.size());
        }
        out.push_back({c.chunk_id, score, c.supporters});
    }
    std::sort(out.begin(), out.end(), ranked_before);
    return out;
}

std::vector<RankedChunk> select_context(const std::vector<RankedChunk>& ranked, int K) {
    if (K < 1) throw ConfigError("K must be >= 1");
    const auto n = std::min(ranked.size(), static_cast<std::size_t>(K));
    return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n)};
}

RetrievalResult retrieve_embedded(const McqGraph& graph, const Embedding& user,
                                  const RetrievalConfig& cfg) {
    cfg.validate(graph.params().epsilon);
    RetrievalResult result;
    result.entry_nodes = retrieve_entry_nodes(graph, user, cfg.n, cfg.alpha);
    const auto expanded = expand_queries(graph, user, result.entry_nodes, cfg.h);
    result.expanded_count = expanded.size();
    result.ranked = select_context(rank_chunks(collect_candidates(graph, expanded), cfg.agg), cfg.K);
    return result;
}

RetrievalResult retrieve(const McqGraph& graph, const std::string& user_query,
                         const RetrievalConfig& cfg, const Embedder& embedder) {
    if (cfg.repr != graph.params().repr) {
        throw ConfigError("retrieval repr '" + std::string(to_string(cfg.repr)) +
                          "' does not match graph repr '" +
                          std::string(to_string(graph.params().repr)) + "'");
    }
    cfg.validate(graph.params().epsilon);
    RetrievalResult result;
    result.query = user_query;
    if (graph.queries().empty() && !cfg.dense_fallback) return result;

    const std::vector<std::string> input{user_query};
    const Embedding user = embed_texts(embedder, input).front();
    if (!graph.queries().empty()) {
        result = retrieve_embedded(graph, user, cfg);
        result.query = user_query;
    }
    if (result.entry_nodes.empty() && cfg.dense_fallback) {
        std::vector<std::string> ids;
        std::vector<std::string> texts;
        for (const auto& [id, c] : graph.chunks()) {
            if (c.text_content.empty()) continue;
            ids.push_back(id);
            texts.push_back(c.text_content);
        }
        if (!texts.empty()) {
            const auto vectors = embed_texts(embedder, texts);
            std::map<std::string, Embedding> by_id;
            for (std::size_t i = 0; i < ids.size(); ++i) by_id.emplace(ids[i], vectors[i]);
            for (const auto& hit : dense_chunk_retrieve(by_id, user, cfg.K)) {
                result.ranked.push_back({hit.chunk_id, hit.score + graph.params().epsilon, {}});
            }
            result.used_fallback = true;
        }
    }
    return result;
}

json to_json(const RetrievalResult& r) {
    json entries = json::array();
    for (const auto& e : r.entry_nodes) entries.push_back({{"q_id", e.query_id}, {"sim", e.sim}});
    json ranked = json::array();
    for (const auto& c : r.ranked) {
        json supporters = json::array();
        for (const auto& s : c.supporters) {
            supporters.push_back({{"q_id", s.query_id}, {"sim", s.sim}, {"hops", s.hops}});
        }
        ranked.push_back(
            {{"chunk_id", c.chunk_id}, {"score", c.score}, {"supporters", std::move(supporters)}});
    }
    json out = {{"query", r.query},
                {"entry_nodes", std::move(entries)},
                {"expanded", r.expanded_count},
                {"ranked", std::move(ranked)}};
    if (r.used_fallback) out["fallback"] = "dense";
    return out;
}

std::vector<ChunkScore> bm25_retrieve(const std::vector<Chunk>& chunks,
                                      const std::string& user_query, int K,
                                      const std::string& tokenizer_id, const Bm25Params& params) {
    if (K < 1) throw ConfigError("K must be >= 1");
    const std::size_t N = chunks.size();
    std::vector<std::map<std::string, int>> tf(N);
    std::vector<double> length(N, 0.0);
    std::map<std::string, int> df;
    double total_length = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (auto& term : bm25_terms(chunks[i].text_content, tokenizer_id)) {
            if (tf[i][term]++ == 0) ++df[term];
            length[i] += 1.0;
        }
        total_length += length[i];
    }
    const double avgdl = N == 0 ? 0.0 : total_length / static_cast<double>(N);

    const auto query_terms_vec = bm25_terms(user_query, tokenizer_id);
    const std::set<std::string> query_terms(query_terms_vec.begin(), query_terms_vec.end());

    std::vector<ChunkScore> scores;
    scores.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
        double score = 0.0;
        for (const auto& term : query_terms) {
            const auto it = tf[i].find(term);
            if (it == tf[i].end()) continue;
            const double n_t = df.at(term);
            const double idf = std::log(1.0 + (static_cast<double>(N) - n_t + 0.5) / (n_t + 0.5));
            const double f = it->second;
            const double norm = avgdl > 0.0 ? length[i] / avgdl : 0.0;
            score += idf * f * (params.k1 + 1.0) / (f + params.k1 * (1.0 - params.b + params.b * norm));
        }
        scores.push_back({chunks[i].chunk_id, score});
    }
    std::sort(scores.begin(), scores.end(), chunk_score_before);
    if (scores.size() > static_cast<std::size_t>(K)) scores.resize(static_cast<std::size_t>(K));
    return scores;
}

std::vector<ChunkScore> dense_chunk_retrieve(const std::map<std::string, Embedding>& chunk_embeddings,
                                             const Embedding& user, int K) {
    if (K < 1) throw ConfigError("K must be >= 1");
    std::vector<ChunkScore> scores;
    scores.reserve(chunk_embeddings.size());
    for (const auto& [id, v] : chunk_embeddings) scores.push_back({id, inner(user, v)});
    std::sort(scores.begin(), scores.end(), chunk_score_before);
    if (scores.size() > static_cast<std::size_t>(K)) scores.resize(static_cast<std::size_t>(K));
    return scores;
}

}  // namespace mldoc

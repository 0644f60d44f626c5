#include "mldoc/graph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

namespace mldoc {

namespace {

// Stored sims come from binary32 unit vectors, whose norms carry float
// rounding; allow that much slack around [eps-1, eps+1].
constexpr double kSimRangeSlack = 1e-6;

struct Candidate {
    double sim;
    std::size_t row;
};

bool candidate_before(const Candidate& a, const Candidate& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.row < b.row;
}

}  // namespace

void GraphParams::validate() const {
    if (k < 1) throw ConfigError("graph k must be >= 1");
    if (!(epsilon >= 0.0)) throw ConfigError("graph epsilon must be >= 0");
}

const QueryNode& McqGraph::query(const std::string& id) const {
    const auto it = queries_.find(id);
    if (it == queries_.end()) throw InputError("unknown query id '" + id + "'");
    return it->second;
}

const Chunk& McqGraph::chunk(const std::string& id) const {
    const auto it = chunks_.find(id);
    if (it == chunks_.end()) throw InputError("unknown chunk id '" + id + "'");
    return it->second;
}

bool McqGraph::operator==(const McqGraph& other) const {
    return params_ == other.params_ && chunks_ == other.chunks_ && queries_ == other.queries_ &&
           cq_edges_ == other.cq_edges_ && qq_out_ == other.qq_out_;
}

void McqGraph::index() {
    order_.clear();
    cq_edges_.clear();
    adjacency_.clear();
    vectors_.resize(static_cast<Eigen::Index>(queries_.size()), params_.dim);
    Eigen::Index row = 0;
    for (const auto& [id, node] : queries_) {
        order_.push_back(id);
        cq_edges_[id] = node.chunk_id;
        vectors_.row(row++) = node.embedding->transpose();
        adjacency_[id];
    }
    for (const auto& [id, nbrs] : qq_out_) {
        for (const auto& n : nbrs) {
            adjacency_[id].insert(n.query_id);
            adjacency_[n.query_id].insert(id);
        }
    }
}

McqGraph McqGraph::from_parts(GraphParams params, std::map<std::string, Chunk> chunks,
                              std::map<std::string, QueryNode> queries,
                              std::map<std::string, std::vector<ScoredQuery>> qq_out) {
    params.validate();
    std::vector<std::string> problems;
    for (const auto& [id, node] : queries) {
        if (id != node.query_id) problems.push_back(id + ": key does not match query_id");
        if (!node.embedding) {
            problems.push_back(id + ": missing embedding");
        } else if (node.embedding->size() != params.dim) {
            problems.push_back(id + ": embedding dim " + std::to_string(node.embedding->size()) +
                               " != " + std::to_string(params.dim));
        }
        if (!chunks.count(node.chunk_id)) {
            problems.push_back(id + ": anchor chunk '" + node.chunk_id + "' not in graph");
        }
    }
    const std::size_t expected_degree =
        queries.empty() ? 0 : std::min<std::size_t>(static_cast<std::size_t>(params.k),
                                                     queries.size() - 1);
    for (const auto& [id, nbrs] : qq_out) {
        if (!queries.count(id)) problems.push_back(id + ": qq_out for unknown query");
        if (nbrs.size() != expected_degree) {
            problems.push_back(id + ": " + std::to_string(nbrs.size()) + " neighbors, expected " +
                               std::to_string(expected_degree));
        }
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
            const auto& n = nbrs[i];
            if (n.query_id == id) problems.push_back(id + ": self edge");
            if (!queries.count(n.query_id)) {
                problems.push_back(id + ": neighbor '" + n.query_id + "' unknown");
            }
            if (n.sim < params.epsilon - 1.0 - kSimRangeSlack ||
                n.sim > params.epsilon + 1.0 + kSimRangeSlack) {
                problems.push_back(id + ": neighbor sim out of range");
            }
            if (i > 0 && !ranks_before(nbrs[i - 1], n)) {
                problems.push_back(id + ": neighbor list not sorted");
            }
        }
    }
    if (qq_out.size() != queries.size()) {
        problems.push_back("qq_out has " + std::to_string(qq_out.size()) + " entries for " +
                           std::to_string(queries.size()) + " queries");
    }
    if (!problems.empty()) {
        std::string msg = "invalid graph (" + std::to_string(problems.size()) + " problems): ";
        for (std::size_t i = 0; i < problems.size() && i < 10; ++i) {
            msg += (i ? "; " : "") + problems[i];
        }
        throw BuildError(msg);
    }

    McqGraph g;
    g.params_ = std::move(params);
    g.chunks_ = std::move(chunks);
    g.queries_ = std::move(queries);
    g.qq_out_ = std::move(qq_out);
    g.index();
    return g;
}

McqGraph build_graph(const std::vector<Chunk>& chunks, const std::vector<QueryNode>& nodes,
                     const GraphParams& params) {
    params.validate();
    std::map<std::string, Chunk> chunk_map;
    for (const auto& c : chunks) {
        if (!chunk_map.emplace(c.chunk_id, c).second) {
            throw BuildError("duplicate chunk id '" + c.chunk_id + "'");
        }
    }

    std::vector<std::string> offenders;
    std::map<std::string, QueryNode> query_map;
    GraphParams p = params;
    for (const auto& n : nodes) {
        if (!n.embedding) {
            offenders.push_back(n.query_id + " (no embedding)");
            continue;
        }
        if (p.dim == 0) p.dim = n.embedding->size();
        if (n.embedding->size() != p.dim) {
            offenders.push_back(n.query_id + " (dim " + std::to_string(n.embedding->size()) + ")");
        }
        if (!chunk_map.count(n.chunk_id)) offenders.push_back(n.query_id + " (dangling anchor)");
        if (!query_map.emplace(n.query_id, n).second) {
            offenders.push_back(n.query_id + " (duplicate id)");
        }
    }
    if (!offenders.empty()) {
        std::string msg = "cannot build graph, offending query nodes:";
        for (const auto& o : offenders) msg += " " + o;
        throw BuildError(msg);
    }

    // Rows follow ascending query id, so row order doubles as the id tie-break.
    std::vector<const QueryNode*> rows;
    rows.reserve(query_map.size());
    for (const auto& [id, node] : query_map) rows.push_back(&node);

    const std::size_t n = rows.size();
    const std::size_t degree = n == 0 ? 0 : std::min<std::size_t>(static_cast<std::size_t>(p.k), n - 1);
    std::map<std::string, std::vector<ScoredQuery>> qq_out;
    std::vector<Candidate> candidates;
    candidates.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            candidates.push_back({sim(*rows[i]->embedding, *rows[j]->embedding, p.epsilon), j});
        }
        std::partial_sort(candidates.begin(),
                          candidates.begin() + static_cast<std::ptrdiff_t>(degree),
                          candidates.end(), candidate_before);
        auto& out = qq_out[rows[i]->query_id];
        out.reserve(degree);
        for (std::size_t c = 0; c < degree; ++c) {
            out.push_back({rows[candidates[c].row]->query_id, candidates[c].sim});
        }
    }
    return McqGraph::from_parts(p, std::move(chunk_map), std::move(query_map), std::move(qq_out));
}

std::vector<double> probe_sims(const McqGraph& graph, const Embedding& probe) {
    const auto& vectors = graph.vectors();
    std::vector<double> sims(static_cast<std::size_t>(vectors.rows()));
    if (vectors.rows() == 0) return sims;
    if (probe.size() != vectors.cols()) {
        throw InputError("probe dim " + std::to_string(probe.size()) + " != graph dim " +
                         std::to_string(vectors.cols()));
    }
    const double eps = graph.params().epsilon;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
        const Embedding row = vectors.row(r).transpose();
        sims[static_cast<std::size_t>(r)] = sim(probe, row, eps);
    }
    return sims;
}

std::vector<ScoredQuery> knn_queries(const McqGraph& graph, const Embedding& probe,
                                     std::size_t limit) {
    const auto sims = probe_sims(graph, probe);
    std::vector<Candidate> candidates(sims.size());
    for (std::size_t i = 0; i < sims.size(); ++i) candidates[i] = {sims[i], i};
    limit = std::min(limit, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(limit),
                      candidates.end(), candidate_before);
    std::vector<ScoredQuery> out;
    out.reserve(limit);
    for (std::size_t i = 0; i < limit; ++i) {
        out.push_back({graph.query_order()[candidates[i].row], candidates[i].sim});
    }
    return out;
}

std::map<std::string, int> hop_distances(const McqGraph& graph,
                                         const std::set<std::string>& seeds, int h) {
    if (h < 0) throw InputError("hop count must be >= 0");
    const auto& adjacency = graph.adjacency();
    std::map<std::string, int> dist;
    std::deque<std::string> frontier;
    for (const auto& s : seeds) {
        if (!adjacency.count(s)) throw InputError("unknown seed query id '" + s + "'");
        dist.emplace(s, 0);
        frontier.push_back(s);
    }
    while (!frontier.empty()) {
        const std::string cur = std::move(frontier.front());
        frontier.pop_front();
        const int d = dist.at(cur);
        if (d == h) continue;
        for (const auto& next : adjacency.at(cur)) {
            if (dist.emplace(next, d + 1).second) frontier.push_back(next);
        }
    }
    return dist;
}

std::set<std::string> neighbors_within(const McqGraph& graph, const std::set<std::string>& seeds,
                                       int h) {
    std::set<std::string> out;
    for (const auto& [id, d] : hop_distances(graph, seeds, h)) out.insert(id);
    return out;
}

}  // namespace mldoc

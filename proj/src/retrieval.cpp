#include "toporag/retrieval.hpp"
#include "toporag/parallel.hpp"
#include "toporag/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <queue>

namespace toporag {

using json = nlohmann::json;

ScoreFn similarity_source(const EmbeddingMatrix& emb, double role_epsilon) {
    auto rows = std::make_shared<const Matrix>(emb.rows);
    if (emb.kind == EmbeddingKind::role) {
        return [rows, role_epsilon](NodeId i, NodeId j) {
            return 1.0 / (role_epsilon + (rows->row(static_cast<Eigen::Index>(i)) -
                                          rows->row(static_cast<Eigen::Index>(j))).norm());
        };
    }
    auto norms = std::make_shared<Vector>(rows->rows());
    for (Eigen::Index i = 0; i < rows->rows(); ++i) (*norms)(i) = rows->row(i).norm();
    return [rows, norms](NodeId i, NodeId j) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        const double den = (*norms)(a) * (*norms)(b);
        return den == 0.0 ? 0.0 : rows->row(a).dot(rows->row(b)) / den;
    };
}

TopKIndex build_index(const ScoreFn& score, std::size_t node_count, std::span<const NodeId> pool,
                      std::size_t k, EmbeddingKind kind, std::string fingerprint, std::size_t threads) {
    if (k < 1) throw ValidationError("index K must be at least 1");
    if (pool.empty()) throw ValidationError("candidate pool is empty");
    for (NodeId p : pool) {
        if (p >= node_count) throw ValidationError("pool member " + std::to_string(p) + " out of range");
    }
    TopKIndex index;
    index.k = k;
    index.kind = kind;
    index.fingerprint = std::move(fingerprint);
    index.entries.resize(node_count);

    parallel_for(node_count, [&](std::size_t target) {
        // Max-heap on "worse", so top() is the weakest kept candidate.
        auto worse = [](const Neighbor& a, const Neighbor& b) { return ranks_before(a, b); };
        std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(worse)> heap(worse);
        for (NodeId cand : pool) {
            if (cand == target) continue;
            const Neighbor nb{cand, score(target, cand)};
            if (heap.size() < k) {
                heap.push(nb);
            } else if (ranks_before(nb, heap.top())) {
                heap.pop();
                heap.push(nb);
            }
        }
        auto& out = index.entries[target];
        out.reserve(heap.size());
        while (!heap.empty()) {
            out.push_back(heap.top());
            heap.pop();
        }
        std::reverse(out.begin(), out.end());
    }, threads);
    return index;
}

TopKIndex build_index(const EmbeddingMatrix& emb, std::span<const NodeId> pool, std::size_t k,
                      std::size_t threads) {
    return build_index(similarity_source(emb), emb.size(), pool, k, emb.kind, emb.fingerprint, threads);
}

std::span<const Neighbor> query(const TopKIndex& index, NodeId node) {
    if (node >= index.entries.size()) {
        throw ValidationError("node " + std::to_string(node) + " is not in the index");
    }
    return index.entries[node];
}

void write_index(const TopKIndex& index, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << json{{"k", index.k}, {"kind", to_string(index.kind)}, {"fingerprint", index.fingerprint}}.dump()
        << '\n';
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
        json nn = json::array();
        for (const auto& e : index.entries[i]) nn.push_back(json::array({e.id, e.score}));
        out << json{{"id", i}, {"nn", std::move(nn)}}.dump() << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

TopKIndex read_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    TopKIndex index;
    std::string line;
    std::size_t line_no = 0;
    const std::string file = path.string();
    try {
        if (!std::getline(in, line)) throw FormatError(file, 1, "missing header line");
        ++line_no;
        const json header = json::parse(line);
        index.k = header.at("k").get<std::size_t>();
        index.kind = parse_embedding_kind(header.at("kind").get<std::string>());
        index.fingerprint = header.at("fingerprint").get<std::string>();
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const json row = json::parse(line);
            const auto id = row.at("id").get<std::size_t>();
            if (id != index.entries.size()) throw FormatError(file, line_no, "index rows must be in id order");
            std::vector<Neighbor> nn;
            for (const auto& pair : row.at("nn")) nn.push_back({pair.at(0).get<NodeId>(), pair.at(1).get<double>()});
            index.entries.push_back(std::move(nn));
        }
    } catch (const json::exception& e) {
        throw FormatError(file, line_no, e.what());
    }
    return index;
}

std::string_view to_string(RetrievalStrategy s) {
    switch (s) {
        case RetrievalStrategy::none: return "none";
        case RetrievalStrategy::random: return "random";
        case RetrievalStrategy::text: return "text";
        case RetrievalStrategy::topo: return "topo";
    }
    return "unknown";
}

RetrievalStrategy parse_strategy(std::string_view name) {
    if (name == "none") return RetrievalStrategy::none;
    if (name == "random" || name == "rd") return RetrievalStrategy::random;
    if (name == "text") return RetrievalStrategy::text;
    if (name == "topo") return RetrievalStrategy::topo;
    throw ValidationError("unknown retrieval strategy \"" + std::string(name) + "\"");
}

void RetrievalPlan::validate() const {
    if (candidate_pool && candidate_pool->empty() && strategy != RetrievalStrategy::none) {
        throw ValidationError("retrieval plan has an empty candidate pool");
    }
}

std::string RetrievalPlan::key() const {
    std::string key(to_string(strategy));
    if (strategy == RetrievalStrategy::none) return key;
    key += ":k=" + std::to_string(k);
    if (strategy == RetrievalStrategy::topo) key += ":offset=" + std::to_string(rank_offset);
    if (strategy == RetrievalStrategy::random) key += ":seed=" + std::to_string(seed);
    if (candidate_pool) {
        std::uint64_t h = fnv1a64("pool");
        for (NodeId p : *candidate_pool) h = fnv1a64(std::to_string(p) + ",", h);
        key += ":pool=" + hex64(h);
    }
    return key;
}

namespace {

std::vector<RetrievedText> top_by_text(const Vector& query_vec, const Matrix& candidates,
                                       std::span<const NodeId> ids, std::size_t k,
                                       const std::function<std::string(std::size_t)>& text_of) {
    std::vector<Neighbor> scored;
    scored.reserve(ids.size());
    for (std::size_t c = 0; c < ids.size(); ++c) {
        scored.push_back({c, cosine_rows(query_vec.transpose(), candidates.row(static_cast<Eigen::Index>(c)))});
    }
    // Ties fall back to candidate position, which callers order by node id.
    const auto take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      ranks_before);
    std::vector<RetrievedText> out;
    for (std::size_t r = 0; r < take; ++r) {
        out.push_back({ids[scored[r].id], text_of(scored[r].id), scored[r].score});
    }
    return out;
}

}  // namespace

std::vector<RetrievedText> retrieve(const RetrievalPlan& plan, NodeId target, const RetrievalContext& ctx,
                                    std::string_view partial_text) {
    plan.validate();
    if (!ctx.graph) throw ValidationError("retrieval context has no graph");
    const auto& graph = *ctx.graph;
    std::vector<NodeId> pool = plan.candidate_pool ? *plan.candidate_pool : ctx.pool;
    std::sort(pool.begin(), pool.end());
    std::erase(pool, target);

    switch (plan.strategy) {
        case RetrievalStrategy::none:
            return {};
        case RetrievalStrategy::random: {
            if (pool.size() < plan.k) {
                throw ValidationError("random retrieval needs " + std::to_string(plan.k) +
                                      " candidates but the pool has " + std::to_string(pool.size()));
            }
            Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(target)));
            std::vector<RetrievedText> out;
            for (std::size_t pick : rng.sample_indices(pool.size(), plan.k)) {
                out.push_back({pool[pick], graph.text(pool[pick]), 0.0});
            }
            return out;
        }
        case RetrievalStrategy::text: {
            if (partial_text.empty()) throw ValidationError("text retrieval needs a non-empty observed prefix");
            if (!ctx.text_embeddings || !ctx.provider) {
                throw ValidationError("text retrieval needs node text embeddings and a provider");
            }
            const auto q = embed_texts(*ctx.provider, {std::string(partial_text)}).rows;
            Matrix cand(static_cast<Eigen::Index>(pool.size()), ctx.text_embeddings->rows.cols());
            for (std::size_t c = 0; c < pool.size(); ++c) {
                cand.row(static_cast<Eigen::Index>(c)) = ctx.text_embeddings->rows.row(static_cast<Eigen::Index>(pool[c]));
            }
            return top_by_text(q.row(0).transpose(), cand, pool, plan.k,
                               [&](std::size_t c) { return graph.text(pool[c]); });
        }
        case RetrievalStrategy::topo: {
            if (!ctx.index) throw ValidationError("topological retrieval needs an index");
            const auto list = query(*ctx.index, target);
            if (plan.rank_offset + plan.k > list.size()) {
                throw ValidationError("rank window [" + std::to_string(plan.rank_offset) + ", " +
                                      std::to_string(plan.rank_offset + plan.k) + ") exceeds the " +
                                      std::to_string(list.size()) + " indexed neighbors of node " +
                                      std::to_string(target));
            }
            std::vector<RetrievedText> out;
            for (std::size_t r = plan.rank_offset; r < plan.rank_offset + plan.k; ++r) {
                out.push_back({list[r].id, graph.text(list[r].id), list[r].score});
            }
            return out;
        }
    }
    return {};
}

TwoStageResult two_stage_retrieve(const TextAttributedGraph& graph, NodeId sender, NodeId receiver,
                                  std::string_view partial_text, const TopKIndex& index, std::size_t k,
                                  const EmbeddingProviderSpec& provider) {
    TwoStageResult result;
    for (NodeId endpoint : {sender, receiver}) {
        const auto list = query(index, endpoint);
        if (!list.empty()) result.employees.push_back(list.front().id);
    }
    std::sort(result.employees.begin(), result.employees.end());
    result.employees.erase(std::unique(result.employees.begin(), result.employees.end()), result.employees.end());

    std::vector<NodeId> owners;
    std::vector<std::string> emails;
    for (NodeId e : result.employees) {
        for (const auto& t : graph.node(e).texts) {
            owners.push_back(e);
            emails.push_back(t.text);
        }
    }
    if (emails.empty()) {
        result.empty_pool = true;
        return result;
    }
    if (partial_text.empty()) throw ValidationError("two-stage retrieval needs a non-empty observed prefix");
    const auto q = embed_texts(provider, {std::string(partial_text)}).rows;
    const auto cand = embed_texts(provider, emails).rows;
    auto ranked = top_by_text(q.row(0).transpose(), cand, owners, k, [&](std::size_t c) { return emails[c]; });
    result.texts = std::move(ranked);
    return result;
}

}  // namespace toporag

#pragma once

#include "toporag/embedding.hpp"
#include "toporag/graph.hpp"
#include "toporag/text_embed.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace toporag {

struct Neighbor {
    NodeId id = 0;
    double score = 0.0;

    bool operator==(const Neighbor&) const = default;
};

/// Ranking order: higher score first, ties by ascending id.
constexpr bool ranks_before(const Neighbor& a, const Neighbor& b) noexcept {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
}

/// Offline top-K lookup table. entries[i] holds the K best pool members for
/// node i (never i itself), sorted by ranks_before.
struct TopKIndex {
    std::size_t k = 0;
    EmbeddingKind kind = EmbeddingKind::proximity;
    std::string fingerprint;
    std::vector<std::vector<Neighbor>> entries;

    std::size_t size() const noexcept { return entries.size(); }
};

using ScoreFn = std::function<double(NodeId, NodeId)>;

/// Pairwise similarity over an embedding: cosine for proximity and text,
/// 1/(epsilon + L2 distance) for role.
ScoreFn similarity_source(const EmbeddingMatrix& emb, double role_epsilon = 1e-6);

/// Exact top-K per node by bounded selection over the pool; O(N K) memory.
TopKIndex build_index(const ScoreFn& score, std::size_t node_count, std::span<const NodeId> pool,
                      std::size_t k, EmbeddingKind kind, std::string fingerprint, std::size_t threads = 0);

TopKIndex build_index(const EmbeddingMatrix& emb, std::span<const NodeId> pool, std::size_t k,
                      std::size_t threads = 0);

/// Precomputed neighbors of `node`. Throws ValidationError for unknown nodes.
std::span<const Neighbor> query(const TopKIndex& index, NodeId node);

void write_index(const TopKIndex& index, const std::filesystem::path& path);
TopKIndex read_index(const std::filesystem::path& path);

enum class RetrievalStrategy { none, random, text, topo };

std::string_view to_string(RetrievalStrategy s);
RetrievalStrategy parse_strategy(std::string_view name);

struct RetrievalPlan {
    RetrievalStrategy strategy = RetrievalStrategy::topo;
    std::size_t k = 3;
    std::size_t rank_offset = 0;  // topo only: start of the rank window
    std::uint64_t seed = 0;       // random only
    std::optional<std::vector<NodeId>> candidate_pool;  // defaults to the fully observed ids

    void validate() const;
    /// Stable identifier used to key generation records.
    std::string key() const;
};

/// Everything retrieval may consult. `pool` is the default candidate pool
/// (the fully observed ids).
struct RetrievalContext {
    const TextAttributedGraph* graph = nullptr;
    const TopKIndex* index = nullptr;
    const EmbeddingMatrix* text_embeddings = nullptr;
    const EmbeddingProviderSpec* provider = nullptr;
    std::vector<NodeId> pool;
};

struct RetrievedText {
    NodeId node = 0;
    std::string text;
    double score = 0.0;
};

/// Texts for `target` in rank order:
///  none   -> nothing
///  random -> k pool texts drawn without replacement (seeded per target)
///  text   -> top-k pool nodes by cosine to the embedded `partial_text`
///  topo   -> index entries at ranks [rank_offset, rank_offset + k)
std::vector<RetrievedText> retrieve(const RetrievalPlan& plan, NodeId target, const RetrievalContext& ctx,
                                    std::string_view partial_text);

struct TwoStageResult {
    std::vector<NodeId> employees;      // stage-1 picks (deduplicated)
    std::vector<RetrievedText> texts;   // stage-2 top-k emails
    bool empty_pool = false;
};

/// Multi-text retrieval: take the most similar node to the sender and to the
/// receiver from `index`, pool their texts, return the top-k by cosine to
/// `partial_text`.
TwoStageResult two_stage_retrieve(const TextAttributedGraph& graph, NodeId sender, NodeId receiver,
                                  std::string_view partial_text, const TopKIndex& index, std::size_t k,
                                  const EmbeddingProviderSpec& provider);

}  // namespace toporag

#pragma once

#include "toporag/embedding.hpp"
#include "toporag/graph.hpp"
#include "toporag/http.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace toporag {

/// Where text embeddings come from: a remote service speaking the
/// POST {endpoint}/embed contract, or the offline hashed 3-gram fallback.
struct EmbeddingProviderSpec {
    std::string endpoint = "fallback";
    std::string model = "fallback-char3";
    std::size_t dimension = 256;
    std::size_t batch_size = 32;
    std::chrono::milliseconds timeout{30000};
    std::string auth_env = "EMBED_API_KEY";
    std::size_t max_in_flight = 4;
    std::optional<std::string> cache_dir;
    std::uint64_t fallback_seed = 0;
    RetryPolicy retry;

    bool is_fallback() const noexcept { return endpoint == "fallback"; }
    void validate() const;
};

struct TextEmbeddings {
    Matrix rows;                            // one L2-normalized (or zero) row per input
    std::vector<std::size_t> empty_inputs;  // indices embedded as zero because the text was empty
    std::size_t requests = 0;               // remote batches actually sent
};

/// Embed `texts` in order. Remote batches hold at most batch_size texts and
/// are retried per RetryPolicy; empty strings are never sent.
TextEmbeddings embed_texts(const EmbeddingProviderSpec& provider, const std::vector<std::string>& texts);

/// Token-granularity variant used by embedding F1: one row per token.
Matrix embed_tokens(const EmbeddingProviderSpec& provider, const std::vector<std::string>& tokens);

/// Signed hashed character-3-gram counts in `dim` buckets, L2-normalized.
/// Each text is padded with one boundary marker per side so short tokens
/// still produce grams. Empty text -> zero row.
Matrix fallback_embed(const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed);

/// Cosine of two text embeddings; 0 if either is zero.
double text_similarity(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

enum class TextSelection { primary, all, sent, received };

/// Per-node text embeddings. Multi-text nodes get the re-normalized mean of
/// the selected texts; text-missing nodes get a zero row.
EmbeddingMatrix node_text_embeddings(const TextAttributedGraph& graph, const EmbeddingProviderSpec& provider,
                                     TextSelection selection = TextSelection::primary);

std::string text_fingerprint(const TextAttributedGraph& graph, const EmbeddingProviderSpec& provider,
                             TextSelection selection = TextSelection::primary);

std::string describe(const EmbeddingProviderSpec& provider);

}  // namespace toporag

#pragma once

#include "toporag/embedding.hpp"
#include "toporag/graph.hpp"

#include <cstdint>
#include <vector>

namespace toporag {

/// Diffusion depth K, per-layer weights and the projection used to compress
/// the node-identity basis.
struct DiffusionConfig {
    std::size_t depth = 3;
    std::vector<double> alphas;  // empty means uniform 1/K
    std::size_t projection_dim = 128;
    std::uint64_t seed = 0;

    /// Uniform weights when `alphas` is empty. Throws on an invalid config.
    std::vector<double> resolved_alphas() const;
    void validate() const;
    std::string describe() const;
};

/// n x d matrix of i.i.d. standard normals, row-major fill order from one
/// seeded stream.
Matrix gaussian_projection(std::size_t n, std::size_t d, std::uint64_t seed);

/// P = sum_{k=1..K} alpha_k * A^k * B, computed as B <- A B per layer.
/// O(K nnz(A) d) time and O(N d) extra memory.
Matrix diffuse(const SparseMatrix& norm_adj, const Matrix& basis,
               std::span<const double> alphas);

/// Same, tagged as a proximity embedding. Only the config's alphas are used.
EmbeddingMatrix diffuse(const SparseMatrix& norm_adj, const Matrix& basis,
                        const DiffusionConfig& config);

/// Diffuse a random Gaussian basis (projection_dim columns) over the graph.
/// Passing projection_dim == 0 uses the exact identity basis instead.
EmbeddingMatrix proximity_embedding(const TextAttributedGraph& graph,
                                    const DiffusionConfig& config);

/// Fingerprint proximity_embedding stamps on its output.
std::string proximity_fingerprint(const TextAttributedGraph& graph, const DiffusionConfig& config);

/// Cosine between two rows of a proximity embedding; 0 for zero rows.
double proximity_similarity(const EmbeddingMatrix& emb, NodeId i, NodeId j);

}  // namespace toporag

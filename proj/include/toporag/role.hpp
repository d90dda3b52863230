#pragma once

#include "toporag/embedding.hpp"
#include "toporag/graph.hpp"

#include <vector>

namespace toporag {

/// Heat-kernel scale and the sample points of the characteristic function.
struct WaveConfig {
    double scale = 1.0;
    std::vector<double> sample_points = evenly_spaced(0.0, 100.0, 50);
    std::size_t eigensolver_cap = 5000;

    static std::vector<double> evenly_spaced(double t_min, double t_max, std::size_t count);
    void validate() const;
    std::string describe() const;
};

/// Combinatorial Laplacian L = D - A as a dense matrix.
Matrix laplacian(const TextAttributedGraph& graph);

/// Psi = U diag(exp(-s lambda)) U^T from a dense symmetric eigendecomposition.
/// Column a is the heat wavelet centred at node a. Throws ValidationError when
/// the input is not symmetric within 1e-8 or N exceeds `eigensolver_cap`.
Matrix heat_wavelets(const Matrix& laplacian, double scale, std::size_t eigensolver_cap = 5000);

/// Row a = [Re phi_a(t_1), Im phi_a(t_1), ..., Re phi_a(t_d), Im phi_a(t_d)]
/// with phi_a(t) = (1/N) sum_b exp(i t Psi_ab).
EmbeddingMatrix characteristic_embedding(const Matrix& wavelets, const WaveConfig& config);

/// laplacian -> heat_wavelets -> characteristic_embedding, fingerprinted.
EmbeddingMatrix role_embedding(const TextAttributedGraph& graph, const WaveConfig& config);

std::string role_fingerprint(const TextAttributedGraph& graph, const WaveConfig& config);

/// Role embeddings for each scale in `scales` (the rest of `config` is shared).
std::vector<EmbeddingMatrix> scale_sweep(const TextAttributedGraph& graph, const WaveConfig& config,
                                         std::span<const double> scales);

/// Euclidean distance between two rows of a role embedding.
double role_distance(const EmbeddingMatrix& emb, NodeId i, NodeId j);

/// 1 / (epsilon + ||P_i - P_j||). Bounded by 1/epsilon, attained iff the rows coincide.
double role_similarity(const EmbeddingMatrix& emb, NodeId i, NodeId j, double epsilon = 1e-6);

}  // namespace toporag

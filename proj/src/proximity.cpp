#include "toporag/proximity.hpp"
#include "toporag/random.hpp"

#include <cmath>
#include <sstream>

namespace toporag {

std::vector<double> DiffusionConfig::resolved_alphas() const {
    validate();
    if (!alphas.empty()) return alphas;
    return std::vector<double>(depth, 1.0 / static_cast<double>(depth));
}

void DiffusionConfig::validate() const {
    if (depth < 1) throw ValidationError("diffusion depth must be at least 1");
    if (!alphas.empty()) {
        if (alphas.size() != depth) {
            throw ValidationError("expected " + std::to_string(depth) + " alphas, got " +
                                  std::to_string(alphas.size()));
        }
        bool any_positive = false;
        for (double a : alphas) {
            if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("alphas must be finite and non-negative");
            any_positive = any_positive || a > 0.0;
        }
        if (!any_positive) throw ValidationError("at least one alpha must be positive");
    }
}

std::string DiffusionConfig::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "proximity;K=" << depth << ";alphas=";
    for (double a : resolved_alphas()) os << a << ',';
    os << ";d=" << projection_dim << ";seed=" << seed;
    return os.str();
}

Matrix gaussian_projection(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (n < 1 || d < 1) throw ValidationError("projection needs n, d >= 1");
    Rng rng(seed);
    Matrix r(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = rng.normal();
    }
    return r;
}

Matrix diffuse(const SparseMatrix& norm_adj, const Matrix& basis, std::span<const double> alphas) {
    if (norm_adj.rows() != norm_adj.cols() || norm_adj.cols() != basis.rows()) {
        throw ValidationError("diffuse: adjacency is " + std::to_string(norm_adj.rows()) + "x" +
                              std::to_string(norm_adj.cols()) + " but basis has " +
                              std::to_string(basis.rows()) + " rows");
    }
    Matrix layer = basis;
    Matrix next(basis.rows(), basis.cols());
    Matrix total = Matrix::Zero(basis.rows(), basis.cols());
    for (double alpha : alphas) {
        next.noalias() = norm_adj * layer;
        layer.swap(next);
        if (alpha != 0.0) total.noalias() += alpha * layer;
    }
    return total;
}

EmbeddingMatrix diffuse(const SparseMatrix& norm_adj, const Matrix& basis,
                        const DiffusionConfig& config) {
    const auto alphas = config.resolved_alphas();
    EmbeddingMatrix emb;
    emb.rows = diffuse(norm_adj, basis, alphas);
    emb.kind = EmbeddingKind::proximity;
    emb.fingerprint = hex64(fnv1a64(config.describe()));
    return emb;
}

EmbeddingMatrix proximity_embedding(const TextAttributedGraph& graph, const DiffusionConfig& config) {
    config.validate();
    const std::size_t n = graph.node_count();
    if (n == 0) throw ValidationError("cannot embed an empty graph");
    const Matrix basis = config.projection_dim == 0
                             ? Matrix(Matrix::Identity(static_cast<Eigen::Index>(n),
                                                       static_cast<Eigen::Index>(n)))
                             : gaussian_projection(n, config.projection_dim, config.seed);
    auto emb = diffuse(normalized_adjacency(graph), basis, config);
    emb.fingerprint = proximity_fingerprint(graph, config);
    return emb;
}

std::string proximity_fingerprint(const TextAttributedGraph& graph, const DiffusionConfig& config) {
    return hex64(fnv1a64(config.describe() + ";graph=" + graph_fingerprint(graph)));
}

double proximity_similarity(const EmbeddingMatrix& emb, NodeId i, NodeId j) {
    if (emb.kind != EmbeddingKind::proximity) {
        throw ValidationError("proximity_similarity needs a proximity embedding");
    }
    if (i >= emb.size() || j >= emb.size()) {
        throw ValidationError("node id out of range for embedding of " + std::to_string(emb.size()) +
                              " rows");
    }
    return cosine_rows(emb.rows.row(static_cast<Eigen::Index>(i)),
                       emb.rows.row(static_cast<Eigen::Index>(j)));
}

}  // namespace toporag

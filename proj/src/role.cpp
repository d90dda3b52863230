#include "toporag/role.hpp"
#include "toporag/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace toporag {

std::vector<double> WaveConfig::evenly_spaced(double t_min, double t_max, std::size_t count) {
    if (count < 2 || !(t_max > t_min)) {
        throw ValidationError("need at least 2 sample points over a non-empty range");
    }
    std::vector<double> t(count);
    const double step = (t_max - t_min) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) t[i] = t_min + step * static_cast<double>(i);
    t.back() = t_max;
    return t;
}

void WaveConfig::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("wavelet scale must be positive");
    if (sample_points.empty()) throw ValidationError("need at least one sample point");
    if (sample_points.size() == 1) return;
    const double step = sample_points[1] - sample_points[0];
    if (!(step > 0.0)) throw ValidationError("sample points must be strictly increasing");
    for (std::size_t i = 1; i < sample_points.size(); ++i) {
        const double gap = sample_points[i] - sample_points[i - 1];
        if (!(gap > 0.0) || std::abs(gap - step) > 1e-9 * std::max(1.0, std::abs(step))) {
            throw ValidationError("sample points must be evenly spaced");
        }
    }
}

std::string WaveConfig::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "role;s=" << scale << ";t=" << sample_points.front() << ".." << sample_points.back()
       << "x" << sample_points.size() << ";cap=" << eigensolver_cap;
    return os.str();
}

Matrix laplacian(const TextAttributedGraph& graph) {
    const auto n = static_cast<Eigen::Index>(graph.node_count());
    Matrix l = Matrix::Zero(n, n);
    for (auto [a, b] : graph.edges()) {
        const auto i = static_cast<Eigen::Index>(a);
        const auto j = static_cast<Eigen::Index>(b);
        l(i, j) -= 1.0;
        l(j, i) -= 1.0;
        l(i, i) += 1.0;
        l(j, j) += 1.0;
    }
    return l;
}

Matrix heat_wavelets(const Matrix& lap, double scale, std::size_t eigensolver_cap) {
    if (lap.rows() != lap.cols()) throw ValidationError("laplacian must be square");
    const auto n = static_cast<std::size_t>(lap.rows());
    if (n > eigensolver_cap) {
        throw ValidationError("graph has " + std::to_string(n) + " nodes, above the dense eigensolver cap of " +
                              std::to_string(eigensolver_cap));
    }
    if (n == 0) return Matrix(0, 0);
    if ((lap - lap.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
        throw ValidationError("laplacian is not symmetric within 1e-8");
    }
    const Eigen::MatrixXd dense = lap;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    if (solver.info() != Eigen::Success) throw Error("eigendecomposition did not converge");
    const Eigen::VectorXd filter = (-scale * solver.eigenvalues().array()).exp();
    const Eigen::MatrixXd& u = solver.eigenvectors();
    Matrix psi = u * filter.asDiagonal() * u.transpose();
    // Symmetrize away rounding so Psi_ab == Psi_ba exactly.
    Matrix sym = 0.5 * (psi + psi.transpose());
    return sym;
}

EmbeddingMatrix characteristic_embedding(const Matrix& wavelets, const WaveConfig& config) {
    config.validate();
    if (wavelets.rows() != wavelets.cols()) throw ValidationError("wavelet matrix must be square");
    const auto n = wavelets.rows();
    const auto d = static_cast<Eigen::Index>(config.sample_points.size());
    EmbeddingMatrix emb;
    emb.kind = EmbeddingKind::role;
    emb.rows.resize(n, 2 * d);
    const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
        const auto a = static_cast<Eigen::Index>(row);
        for (Eigen::Index k = 0; k < d; ++k) {
            const double t = config.sample_points[static_cast<std::size_t>(k)];
            double re = 0.0, im = 0.0;
            for (Eigen::Index b = 0; b < n; ++b) {
                const double x = t * wavelets(a, b);
                re += std::cos(x);
                im += std::sin(x);
            }
            emb.rows(a, 2 * k) = re * inv_n;
            emb.rows(a, 2 * k + 1) = im * inv_n;
        }
    });
    emb.fingerprint = hex64(fnv1a64(config.describe()));
    return emb;
}

EmbeddingMatrix role_embedding(const TextAttributedGraph& graph, const WaveConfig& config) {
    config.validate();
    if (graph.node_count() > config.eigensolver_cap) {
        throw ValidationError("graph has " + std::to_string(graph.node_count()) +
                              " nodes, above the dense eigensolver cap of " +
                              std::to_string(config.eigensolver_cap) +
                              "; sample a subgraph or raise the cap");
    }
    auto emb = characteristic_embedding(heat_wavelets(laplacian(graph), config.scale, config.eigensolver_cap),
                                        config);
    emb.fingerprint = role_fingerprint(graph, config);
    return emb;
}

std::string role_fingerprint(const TextAttributedGraph& graph, const WaveConfig& config) {
    return hex64(fnv1a64(config.describe() + ";graph=" + graph_fingerprint(graph)));
}

std::vector<EmbeddingMatrix> scale_sweep(const TextAttributedGraph& graph, const WaveConfig& config,
                                         std::span<const double> scales) {
    std::vector<EmbeddingMatrix> out;
    out.reserve(scales.size());
    for (double s : scales) {
        WaveConfig c = config;
        c.scale = s;
        out.push_back(role_embedding(graph, c));
    }
    return out;
}

double role_distance(const EmbeddingMatrix& emb, NodeId i, NodeId j) {
    if (emb.kind != EmbeddingKind::role) throw ValidationError("role_distance needs a role embedding");
    if (i >= emb.size() || j >= emb.size()) {
        throw ValidationError("node id out of range for embedding of " + std::to_string(emb.size()) +
                              " rows");
    }
    return (emb.rows.row(static_cast<Eigen::Index>(i)) - emb.rows.row(static_cast<Eigen::Index>(j))).norm();
}

double role_similarity(const EmbeddingMatrix& emb, NodeId i, NodeId j, double epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    return 1.0 / (epsilon + role_distance(emb, i, j));
}

}  // namespace toporag

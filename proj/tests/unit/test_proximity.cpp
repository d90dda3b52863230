#include "toporag/embedding.hpp"
#include "toporag/proximity.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace toporag;
using namespace toporag::testing;

namespace {

Matrix identity(std::size_t n) {
    return Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

}  // namespace

TEST(Projection, Deterministic) {
    EXPECT_EQ(gaussian_projection(20, 8, 5), gaussian_projection(20, 8, 5));
    EXPECT_NE(gaussian_projection(20, 8, 5), gaussian_projection(20, 8, 6));
}

TEST(Projection, Moments) {
    const Matrix p = gaussian_projection(10000, 1, 17);
    const double mean = p.mean();
    const double var = (p.array() - mean).square().sum() / static_cast<double>(p.size() - 1);
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(Diffuse, OneHopIsAdjacency) {
    const auto g = path_graph(3);
    const std::vector<double> alphas{1.0};
    const Matrix p = diffuse(normalized_adjacency(g), identity(3), alphas);
    EXPECT_TRUE(p.row(0).isApprox(Eigen::RowVector3d(0, 1, 0)));
    EXPECT_TRUE(p.row(2).isApprox(Eigen::RowVector3d(0, 1, 0)));
}

TEST(Diffuse, TwoHopOnly) {
    const auto g = path_graph(3);
    const std::vector<double> alphas{0.0, 1.0};
    const Matrix p = diffuse(normalized_adjacency(g), identity(3), alphas);
    EXPECT_TRUE(p.row(0).isApprox(Eigen::RowVector3d(0.5, 0, 0.5)));
}

TEST(Diffuse, MatchesDenseMatrixPowers) {
    Rng rng(100);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(29);
        const auto g = random_graph(n, 0.15, rng);
        const std::size_t k = 1 + rng.below(4);
        std::vector<double> alphas(k);
        for (auto& a : alphas) a = rng.uniform();
        const Matrix p = diffuse(normalized_adjacency(g), identity(n), alphas);
        const auto expected = oracle::diffusion(g, Eigen::MatrixXd::Identity(n, n), alphas);
        EXPECT_LE((Eigen::MatrixXd(p) - expected).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Diffuse, LinearInAlphas) {
    Rng rng(8);
    const auto g = random_graph(25, 0.2, rng);
    const auto adj = normalized_adjacency(g);
    const Matrix basis = gaussian_projection(25, 6, 1);
    const std::vector<double> a{0.2, 0.5, 0.1}, b{0.7, 0.0, 0.3}, ab{0.9, 0.5, 0.4};
    const Matrix lhs = diffuse(adj, basis, a) + diffuse(adj, basis, b);
    EXPECT_LE((lhs - diffuse(adj, basis, ab)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Diffuse, IsolatedNodeHasZeroRow) {
    const auto g = make_graph(3, {{0, 1}});
    DiffusionConfig cfg;
    cfg.projection_dim = 0;
    const auto emb = proximity_embedding(g, cfg);
    EXPECT_EQ(emb.rows.row(2).norm(), 0.0);
    EXPECT_EQ(proximity_similarity(emb, 2, 0), 0.0);
}

TEST(Config, DefaultsAndValidation) {
    DiffusionConfig cfg;
    EXPECT_EQ(cfg.depth, 3u);
    EXPECT_EQ(cfg.projection_dim, 128u);
    const auto a = cfg.resolved_alphas();
    ASSERT_EQ(a.size(), 3u);
    for (double x : a) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
    cfg.alphas = {1.0, 2.0};
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg.depth = 0;
    cfg.alphas.clear();
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Similarity, PathExample) {
    DiffusionConfig cfg;
    cfg.depth = 1;
    cfg.projection_dim = 0;
    const auto emb = proximity_embedding(path_graph(3), cfg);
    EXPECT_NEAR(proximity_similarity(emb, 0, 2), 1.0, 1e-12);
    EXPECT_NEAR(proximity_similarity(emb, 0, 1), 0.0, 1e-12);
    EXPECT_NEAR(proximity_similarity(emb, 1, 1), 1.0, 1e-12);
}

TEST(Similarity, SymmetricExactly) {
    Rng rng(3);
    const auto g = random_graph(30, 0.15, rng);
    DiffusionConfig cfg;
    cfg.projection_dim = 16;
    const auto emb = proximity_embedding(g, cfg);
    for (NodeId i = 0; i < 30; ++i) {
        for (NodeId j = 0; j < 30; ++j) EXPECT_EQ(proximity_similarity(emb, i, j), proximity_similarity(emb, j, i));
    }
}

TEST(Similarity, ReachCoversConnectedPairs) {
    // 5-cycle: connected, non-bipartite, diameter 2.
    DiffusionConfig cfg;
    cfg.depth = 3;
    cfg.projection_dim = 0;
    const auto g = cycle_graph(5);
    const auto emb = proximity_embedding(g, cfg);
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = 0; j < 5; ++j) EXPECT_GT(emb.rows.row(i).dot(emb.rows.row(j)), 0.0);
    }
}

TEST(Embedding, BinaryRoundTrip) {
    Rng rng(1);
    EmbeddingMatrix emb;
    emb.rows = gaussian_projection(7, 3, 2);
    emb.kind = EmbeddingKind::role;
    emb.fingerprint = "abc";
    TempDir dir;
    write_embedding(emb, dir / "e.tprg");
    const auto back = read_embedding(dir / "e.tprg");
    EXPECT_EQ(back.rows, emb.rows);
    EXPECT_EQ(back.kind, EmbeddingKind::role);
    EXPECT_EQ(back.fingerprint, "abc");
    const auto bytes = read_file(dir / "e.tprg");
    EXPECT_EQ(bytes.substr(0, 4), "TPRG");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
    EXPECT_EQ(bytes.size(), 21u + 7 * 3 * 8);
}

TEST(Embedding, RejectsTruncatedFile) {
    const std::string bytes = encode_embedding(Matrix::Ones(2, 2), EmbeddingKind::text);
    EXPECT_THROW(decode_embedding(bytes.substr(0, bytes.size() - 1)), ValidationError);
    EXPECT_THROW(decode_embedding("XXXX"), ValidationError);
}

TEST(Embedding, CosineRules) {
    Vector u(3), v(3), z = Vector::Zero(3);
    u << 1, 0, 0;
    v << 0, 2, 0;
    EXPECT_EQ(cosine(u, v), 0.0);
    EXPECT_EQ(cosine(u, z), 0.0);
    EXPECT_DOUBLE_EQ(cosine(u, 3 * u), 1.0);
    EXPECT_THROW(cosine(u, Vector::Ones(2)), ValidationError);
}

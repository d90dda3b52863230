#include "toporag/retrieval.hpp"
#include "toporag/proximity.hpp"
#include "toporag/role.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <set>

using namespace toporag;
using namespace toporag::testing;

namespace {

std::vector<NodeId> iota_ids(std::size_t n) {
    std::vector<NodeId> v(n);
    std::iota(v.begin(), v.end(), NodeId{0});
    return v;
}

// Direct per-pair scoring, without the norm cache similarity_source uses.
double direct_score(const EmbeddingMatrix& emb, std::size_t i, std::size_t j) {
    const auto a = emb.rows.row(static_cast<Eigen::Index>(i));
    const auto b = emb.rows.row(static_cast<Eigen::Index>(j));
    if (emb.kind == EmbeddingKind::role) return 1.0 / (1e-6 + (a - b).norm());
    return cosine_rows(a, b);
}

void expect_matches_brute(const EmbeddingMatrix& emb, const std::vector<NodeId>& pool, std::size_t k,
                          std::size_t threads) {
    const auto index = build_index(emb, pool, k, threads);
    auto score = [&](std::size_t i, std::size_t j) { return direct_score(emb, i, j); };
    for (NodeId t = 0; t < emb.size(); ++t) {
        const auto expected = oracle::brute_topk(score, t, pool, k);
        const auto got = query(index, t);
        ASSERT_EQ(got.size(), expected.size());
        for (std::size_t r = 0; r < got.size(); ++r) {
            EXPECT_EQ(got[r].id, expected[r].id);
            EXPECT_NEAR(got[r].score, expected[r].score, 1e-12 * std::max(1.0, std::abs(expected[r].score)));
        }
    }
}

}  // namespace

TEST(Index, MatchesBruteForceAcrossSources) {
    Rng rng(2024);
    for (int trial = 0; trial < 6; ++trial) {
        const auto g = random_graph(20 + rng.below(40), 0.1, rng);
        DiffusionConfig dc;
        dc.projection_dim = 16;
        dc.seed = rng.next_u64();
        const auto prox = proximity_embedding(g, dc);
        WaveConfig wc;
        wc.sample_points = WaveConfig::evenly_spaced(0, 50, 10);
        const auto role = role_embedding(g, wc);
        EmbeddingMatrix text;
        text.kind = EmbeddingKind::text;
        text.rows = gaussian_projection(g.node_count(), 12, rng.next_u64());
        std::vector<NodeId> pool;
        for (NodeId i = 0; i < g.node_count(); ++i)
            if (rng.uniform() < 0.6) pool.push_back(i);
        if (pool.empty()) pool.push_back(0);
        const std::size_t k = 1 + rng.below(8);
        expect_matches_brute(prox, pool, k, trial % 3);
        expect_matches_brute(role, pool, k, 1);
        expect_matches_brute(text, pool, k, 4);
    }
}

TEST(Index, TiesBreakByAscendingId) {
    auto score = [](NodeId, NodeId j) { return j % 2 == 0 ? 1.0 : 0.5; };
    const auto pool = iota_ids(10);
    const auto index = build_index(score, 10, pool, 4, EmbeddingKind::proximity, "f");
    const auto nn = query(index, 2);
    ASSERT_EQ(nn.size(), 4u);
    EXPECT_EQ(nn[0].id, 0u);
    EXPECT_EQ(nn[1].id, 4u);
    EXPECT_EQ(nn[2].id, 6u);
    EXPECT_EQ(nn[3].id, 8u);
}

TEST(Index, ExhaustiveKandSelfExclusion) {
    Rng rng(7);
    EmbeddingMatrix emb;
    emb.rows = gaussian_projection(9, 4, 1);
    const auto pool = iota_ids(9);
    const auto index = build_index(emb, pool, 20);
    for (NodeId t = 0; t < 9; ++t) {
        const auto nn = query(index, t);
        EXPECT_EQ(nn.size(), 8u);
        std::set<NodeId> ids;
        for (const auto& e : nn) ids.insert(e.id);
        EXPECT_EQ(ids.size(), 8u);
        EXPECT_FALSE(ids.count(t));
        for (std::size_t r = 1; r < nn.size(); ++r) EXPECT_TRUE(ranks_before(nn[r - 1], nn[r]));
    }
}

TEST(Index, Errors) {
    EmbeddingMatrix emb;
    emb.rows = Matrix::Identity(3, 3);
    const auto pool = iota_ids(3);
    EXPECT_THROW(build_index(emb, pool, 0), ValidationError);
    EXPECT_THROW(build_index(emb, std::vector<NodeId>{}, 2), ValidationError);
    EXPECT_THROW(build_index(emb, std::vector<NodeId>{5}, 2), ValidationError);
    const auto index = build_index(emb, pool, 2);
    EXPECT_THROW(query(index, 3), ValidationError);
}

TEST(Index, FileRoundTrip) {
    EmbeddingMatrix emb;
    emb.rows = gaussian_projection(15, 5, 3);
    emb.fingerprint = "fp1";
    const auto index = build_index(emb, iota_ids(15), 4);
    TempDir dir;
    write_index(index, dir / "i.jsonl");
    const auto back = read_index(dir / "i.jsonl");
    EXPECT_EQ(back.k, 4u);
    EXPECT_EQ(back.fingerprint, "fp1");
    EXPECT_EQ(back.entries, index.entries);
    write_file(dir / "bad.jsonl", "{\"k\":1,\"kind\":\"proximity\",\"fingerprint\":\"x\"}\n{\"id\":1,\"nn\":[]}\n");
    try {
        read_index(dir / "bad.jsonl");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(read_index(dir / "missing.jsonl"), IoError);
}

TEST(Plan, KeysAndParsing) {
    RetrievalPlan p;
    EXPECT_EQ(p.key(), "topo:k=3:offset=0");
    p.strategy = RetrievalStrategy::none;
    EXPECT_EQ(p.key(), "none");
    p.strategy = parse_strategy("rd");
    p.seed = 5;
    EXPECT_EQ(p.key(), "random:k=3:seed=5");
    p.candidate_pool = std::vector<NodeId>{};
    EXPECT_THROW(p.validate(), ValidationError);
    EXPECT_THROW(parse_strategy("bm25"), ValidationError);
}

class Strategies : public ::testing::Test {
protected:
    void SetUp() override {
        graph = path_graph(8);
        provider.dimension = 64;
        text = node_text_embeddings(graph, provider);
        DiffusionConfig dc;
        dc.projection_dim = 0;
        topo_index = build_index(proximity_embedding(graph, dc), pool_ids(), 5);
        ctx.graph = &graph;
        ctx.index = &topo_index;
        ctx.text_embeddings = &text;
        ctx.provider = &provider;
        ctx.pool = pool_ids();
    }

    static std::vector<NodeId> pool_ids() { return {0, 1, 2, 3, 4, 5}; }

    TextAttributedGraph graph;
    EmbeddingProviderSpec provider;
    EmbeddingMatrix text;
    TopKIndex topo_index;
    RetrievalContext ctx;
};

TEST_F(Strategies, NoneIsEmpty) {
    RetrievalPlan p;
    p.strategy = RetrievalStrategy::none;
    EXPECT_TRUE(retrieve(p, 7, ctx, "x").empty());
}

TEST_F(Strategies, TopoFollowsIndexWindows) {
    RetrievalPlan p;
    p.k = 2;
    const auto first = retrieve(p, 6, ctx, "");
    p.rank_offset = 2;
    const auto second = retrieve(p, 6, ctx, "");
    const auto nn = query(topo_index, 6);
    ASSERT_EQ(first.size(), 2u);
    ASSERT_EQ(second.size(), 2u);
    EXPECT_EQ(first[0].node, nn[0].id);
    EXPECT_EQ(first[1].node, nn[1].id);
    EXPECT_EQ(second[0].node, nn[2].id);
    EXPECT_EQ(second[1].node, nn[3].id);
    EXPECT_EQ(first[0].text, graph.text(nn[0].id));
    p.rank_offset = 4;
    EXPECT_THROW(retrieve(p, 6, ctx, ""), ValidationError);
}

TEST_F(Strategies, TextMatchesCosineOracle) {
    RetrievalPlan p;
    p.strategy = RetrievalStrategy::text;
    p.k = 3;
    const std::string prefix = "node 4";
    const auto got = retrieve(p, 7, ctx, prefix);
    const Matrix q = fallback_embed({prefix}, 64, 0);
    auto score = [&](std::size_t, std::size_t j) {
        return cosine_rows(q.row(0), text.rows.row(static_cast<Eigen::Index>(j)));
    };
    const auto expected = oracle::brute_topk(score, 7, pool_ids(), 3);
    ASSERT_EQ(got.size(), 3u);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(got[r].node, expected[r].id);
    EXPECT_EQ(got[0].node, 4u);
    EXPECT_THROW(retrieve(p, 7, ctx, ""), ValidationError);
}

TEST_F(Strategies, RandomIsSeededAndExcludesTarget) {
    RetrievalPlan p;
    p.strategy = RetrievalStrategy::random;
    p.k = 4;
    p.seed = 11;
    const auto a = retrieve(p, 2, ctx, "");
    const auto b = retrieve(p, 2, ctx, "");
    ASSERT_EQ(a.size(), 4u);
    std::set<NodeId> ids;
    for (std::size_t r = 0; r < a.size(); ++r) {
        EXPECT_EQ(a[r].node, b[r].node);
        EXPECT_NE(a[r].node, 2u);
        ids.insert(a[r].node);
    }
    EXPECT_EQ(ids.size(), 4u);
    p.k = 6;
    EXPECT_THROW(retrieve(p, 2, ctx, ""), ValidationError);
}

TEST_F(Strategies, ExplicitCandidatePool) {
    RetrievalPlan p;
    p.strategy = RetrievalStrategy::random;
    p.k = 2;
    p.candidate_pool = std::vector<NodeId>{6, 7};
    const auto got = retrieve(p, 0, ctx, "");
    std::set<NodeId> ids;
    for (const auto& r : got) ids.insert(r.node);
    EXPECT_EQ(ids, (std::set<NodeId>{6, 7}));
}

namespace {

TextAttributedGraph email_graph() {
    std::vector<NodeAttributes> nodes(4);
    nodes[0].text = "employee zero";
    nodes[0].texts = {{"meeting about the budget", TextDirection::sent},
                      {"lunch on friday", TextDirection::received}};
    nodes[1].text = "employee one";
    nodes[1].texts = {{"budget review meeting notes", TextDirection::sent}};
    nodes[2].text = "employee two";
    nodes[3].text = "employee three";
    return TextAttributedGraph(nodes, {{0, 2}, {1, 3}});
}

TopKIndex fixed_index(const std::vector<std::vector<Neighbor>>& entries) {
    TopKIndex index;
    index.k = 1;
    index.entries = entries;
    return index;
}

}  // namespace

TEST(TwoStage, PoolsEmailsOfBestMatches) {
    const auto g = email_graph();
    const auto index = fixed_index({{{2, 1.0}}, {{3, 1.0}}, {{0, 1.0}}, {{1, 1.0}}});
    EmbeddingProviderSpec p;
    p.dimension = 128;
    const auto res = two_stage_retrieve(g, 2, 3, "budget meeting", index, 2, p);
    EXPECT_EQ(res.employees, (std::vector<NodeId>{0, 1}));
    ASSERT_EQ(res.texts.size(), 2u);
    std::set<std::string> texts;
    for (const auto& t : res.texts) texts.insert(t.text);
    EXPECT_TRUE(texts.count("meeting about the budget"));
    EXPECT_TRUE(texts.count("budget review meeting notes"));
    EXPECT_FALSE(res.empty_pool);
}

TEST(TwoStage, KLargerThanPool) {
    const auto g = email_graph();
    const auto index = fixed_index({{{2, 1.0}}, {{3, 1.0}}, {{0, 1.0}}, {{0, 1.0}}});
    EmbeddingProviderSpec p;
    const auto res = two_stage_retrieve(g, 2, 3, "lunch", index, 10, p);
    EXPECT_EQ(res.employees, std::vector<NodeId>{0});
    EXPECT_EQ(res.texts.size(), 2u);
}

TEST(TwoStage, EmptyPool) {
    const auto g = email_graph();
    const auto index = fixed_index({{{3, 1.0}}, {{2, 1.0}}, {{3, 1.0}}, {{2, 1.0}}});
    EmbeddingProviderSpec p;
    const auto res = two_stage_retrieve(g, 0, 1, "anything", index, 3, p);
    EXPECT_TRUE(res.empty_pool);
    EXPECT_TRUE(res.texts.empty());
}

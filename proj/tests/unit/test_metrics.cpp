#include "toporag/metrics.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace toporag;
using namespace toporag::testing;

namespace {

const std::vector<std::string> kVocab{"the", "graph", "node", "text", "model", "edge", "label", "data",
                                      "learn", "word", "a",     "of",   "in",    "is",   ".",     ","};

std::string random_sentence(Rng& rng, std::size_t min_len, std::size_t max_len) {
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        if (i) out += ' ';
        out += kVocab[rng.below(kVocab.size())];
    }
    return out;
}

// One-hot embedding per distinct token: cosine 1 on equal tokens, else 0.
TokenEmbedder exact_match_embedder() {
    return [](const std::vector<std::string>& tokens) {
        static const std::vector<std::string> vocab = [] {
            std::vector<std::string> v(kVocab);
            for (char c = 'a'; c <= 'z'; ++c) v.emplace_back(1, c);
            return v;
        }();
        Matrix m = Matrix::Zero(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(vocab.size()));
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto it = std::find(vocab.begin(), vocab.end(), tokens[i]);
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(it - vocab.begin())) = 1.0;
        }
        return m;
    };
}

}  // namespace

TEST(Tokenize, LowercaseAndPunctuation) {
    EXPECT_EQ(tokenize("Hello, World!  ok"), (std::vector<std::string>{"hello", ",", "world", "!", "ok"}));
    EXPECT_EQ(tokenize("it's"), (std::vector<std::string>{"it", "'", "s"}));
    EXPECT_TRUE(tokenize(" \t ").empty());
    EXPECT_EQ(tokenize("Größe"), (std::vector<std::string>{"größe"}));
}

TEST(StripPrefix, Examples) {
    EXPECT_EQ(strip_observed_prefix("a b c d", "a b"), "c d");
    EXPECT_EQ(strip_observed_prefix("x y z", "a b"), "x y z");
    EXPECT_EQ(strip_observed_prefix("a b c", ""), "a b c");
    EXPECT_EQ(strip_observed_prefix("a   b\nc", "a b"), "c");
    EXPECT_EQ(strip_observed_prefix("ab c", "a"), "ab c");
    EXPECT_EQ(strip_observed_prefix("a b", "a b"), "");
}

TEST(Bleu, PerfectMatch) {
    EXPECT_DOUBLE_EQ(bleu4("the cat sat on the mat", "the cat sat on the mat"), 1.0);
    EXPECT_NEAR(bleu4("The cat sat on the mat.", "the cat sat on the mat ."), 1.0, 1e-15);
}

TEST(Bleu, EmptyCandidateIsZero) {
    EXPECT_EQ(bleu4("", "a b c"), 0.0);
    EXPECT_EQ(bleu4("   ", "a b c"), 0.0);
}

TEST(Bleu, HandComputedSmoothing) {
    // cand "a b c d e" vs ref "a b x d e": p1=4/5, p2=2/4, p3=0 -> 0.1/3.1, p4=0 -> 0.1/2.1.
    const double expected = std::pow(0.8 * 0.5 * (0.1 / 3.1) * (0.1 / 2.1), 0.25);
    EXPECT_NEAR(bleu4("a b c d e", "a b x d e"), expected, 1e-15);
}

TEST(Bleu, BrevityPenalty) {
    const double expected = std::exp(1.0 - 8.0 / 4.0);
    EXPECT_NEAR(bleu4("a b c d", "a b c d e f g h"), expected, 1e-12);
}

TEST(Bleu, SmoothingOrdering) {
    const double no_four = bleu4("a b c x d e f", "a b c d e f g");
    const double with_four = bleu4("a b c d x y z", "a b c d e f g");
    EXPECT_GT(no_four, 0.0);
    EXPECT_LT(no_four, with_four);
}

TEST(Bleu, MatchesReferenceImplementation) {
    Rng rng(50);
    for (int i = 0; i < 50; ++i) {
        const auto cand = random_sentence(rng, 1, 25);
        const auto ref = random_sentence(rng, 1, 25);
        EXPECT_NEAR(bleu4(cand, ref), oracle::bleu4(tokenize(cand), tokenize(ref)), 1e-6) << cand << " | " << ref;
    }
    for (int i = 0; i < 20; ++i) {
        const auto ref = random_sentence(rng, 5, 20);
        auto toks = tokenize(ref);
        toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(rng.below(toks.size())));
        EXPECT_NEAR(bleu4_tokens(toks, tokenize(ref)), oracle::bleu4(toks, tokenize(ref)), 1e-12);
    }
}

TEST(Bleu, OrderSensitive) {
    const std::string ref = "one two three four five six";
    const double in_order = bleu4("one two three four five six", ref);
    const double shuffled = bleu4("six four two five one three", ref);
    EXPECT_GT(in_order, shuffled);
    EXPECT_NEAR(oracle::bleu4(tokenize("six four two five one three"), tokenize(ref)), shuffled, 1e-12);
}

TEST(Rouge, Examples) {
    EXPECT_NEAR(rouge_l("a b c d", "a c d"), 6.0 / 7.0, 1e-15);
    EXPECT_DOUBLE_EQ(rouge_l("x y z", "x y z"), 1.0);
    EXPECT_EQ(rouge_l("x y", "p q"), 0.0);
    EXPECT_EQ(rouge_l("", "p q"), 0.0);
    EXPECT_EQ(rouge_l("p q", ""), 0.0);
}

TEST(Rouge, TenConstructedPairs) {
    struct Case {
        const char* cand;
        const char* ref;
        std::size_t lcs;
    };
    const Case cases[] = {
        {"a b c d e", "a b c d e", 5}, {"a b c", "c b a", 1},         {"a x b y c", "a b c", 3},
        {"a b", "b a b a", 2},         {"p q r s", "q s", 2},         {"one", "one two three", 1},
        {"a a a", "a", 1},             {"x a y b z c", "a b c d", 3}, {"m n o", "o n m n o", 3},
        {"k l m n", "l k n m", 2},
    };
    for (const auto& c : cases) {
        const auto ct = tokenize(c.cand);
        const auto rt = tokenize(c.ref);
        ASSERT_EQ(lcs_length(ct, rt), c.lcs) << c.cand;
        ASSERT_EQ(oracle::lcs(ct, rt), c.lcs) << c.cand;
        const double p = static_cast<double>(c.lcs) / static_cast<double>(ct.size());
        const double r = static_cast<double>(c.lcs) / static_cast<double>(rt.size());
        EXPECT_EQ(rouge_l(c.cand, c.ref), 2 * p * r / (p + r)) << c.cand;
    }
}

TEST(Rouge, InsertionOutsideLcsOnlyChangesLength) {
    const double base = rouge_l("a b c", "a b c d");
    const double inserted = rouge_l("a z b c", "a b c d");
    EXPECT_EQ(lcs_length(tokenize("a z b c"), tokenize("a b c d")), 3u);
    EXPECT_NEAR(inserted, 2 * 0.75 * 0.75 / 1.5, 1e-15);
    EXPECT_LT(inserted, base);
}

TEST(Rouge, MatchesTableLcsOnRandomPairs) {
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        const auto a = tokenize(random_sentence(rng, 0, 30));
        const auto b = tokenize(random_sentence(rng, 0, 30));
        EXPECT_EQ(lcs_length(a, b), oracle::lcs(a, b));
    }
}

TEST(EmbeddingF1, IdenticalSequences) {
    EmbeddingProviderSpec p;
    p.dimension = 64;
    const auto r = embedding_f1("graph based retrieval", "graph based retrieval", make_token_embedder(p));
    EXPECT_NEAR(r.precision, 1.0, 1e-12);
    EXPECT_NEAR(r.recall, 1.0, 1e-12);
    EXPECT_NEAR(r.f1, 1.0, 1e-12);
}

TEST(EmbeddingF1, SubsetWithExactMatchEmbedder) {
    const auto r = embedding_f1("graph node", "the graph node text", exact_match_embedder());
    EXPECT_DOUBLE_EQ(r.precision, 1.0);
    EXPECT_DOUBLE_EQ(r.recall, 0.5);
    EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-15);
}

TEST(EmbeddingF1, EmptySideIsZero) {
    const auto r = embedding_f1("", "a b", exact_match_embedder());
    EXPECT_EQ(r.precision, 0.0);
    EXPECT_EQ(r.recall, 0.0);
    EXPECT_EQ(r.f1, 0.0);
}

TEST(EmbeddingF1, MatchesDoubleLoopOracle) {
    EmbeddingProviderSpec p;
    p.dimension = 32;
    const auto embedder = make_token_embedder(p);
    Rng rng(20);
    for (int i = 0; i < 20; ++i) {
        const auto cand = random_sentence(rng, 1, 15);
        const auto ref = random_sentence(rng, 1, 15);
        const auto got = embedding_f1(cand, ref, embedder);
        const auto expected = oracle::greedy_f1(embedder(tokenize(cand)), embedder(tokenize(ref)));
        EXPECT_NEAR(got.precision, expected.p, 1e-9);
        EXPECT_NEAR(got.recall, expected.r, 1e-9);
        EXPECT_NEAR(got.f1, expected.f, 1e-9);
    }
}

TEST(Metrics, BoundsOnRandomPairs) {
    Rng rng(77);
    EmbeddingProviderSpec p;
    p.dimension = 32;
    const auto embedder = make_token_embedder(p);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_sentence(rng, 0, 20);
        const auto b = random_sentence(rng, 0, 20);
        const double bl = bleu4(a, b);
        const double rl = rouge_l(a, b);
        const auto f = embedding_f1(a, b, embedder);
        EXPECT_GE(bl, 0.0);
        EXPECT_LE(bl, 1.0 + 1e-12);
        EXPECT_GE(rl, 0.0);
        EXPECT_LE(rl, 1.0);
        EXPECT_LE(f.f1, 1.0 + 1e-12);
        EXPECT_GE(f.f1, -1.0);
    }
}

namespace {

GenerationRecord record(NodeId target, const std::string& plan, std::optional<std::string> output,
                        const std::string& prefix, const std::string& ref) {
    GenerationRecord r;
    r.target = target;
    r.strategy = plan.substr(0, plan.find(':'));
    r.plan_key = plan;
    r.backend_id = "mock";
    r.prefix = prefix;
    r.reference = ref;
    r.output = std::move(output);
    r.excluded = !r.output;
    if (r.excluded) r.reason = "context_limit";
    return r;
}

}  // namespace

TEST(Report, MeansOverScoredRecordsOnly) {
    const std::vector<GenerationRecord> recs{
        record(0, "topo:k=3", "p q a b c d", "p q", "a b c d"),
        record(1, "topo:k=3", "x y", "p", "a b c d"),
        record(2, "topo:k=3", std::nullopt, "p", "a b"),
    };
    const auto report = evaluate_records(recs, exact_match_embedder(), "fp");
    EXPECT_EQ(report.scored, 2u);
    EXPECT_EQ(report.excluded, 1u);
    ASSERT_EQ(report.records.size(), 3u);
    EXPECT_DOUBLE_EQ(report.records[0].bleu4, 1.0);
    EXPECT_DOUBLE_EQ(report.records[0].rouge_l, 1.0);
    EXPECT_DOUBLE_EQ(report.records[1].rouge_l, 0.0);
    EXPECT_DOUBLE_EQ(report.means.rouge_l, 0.5);
    EXPECT_DOUBLE_EQ(report.means.bleu4, (1.0 + report.records[1].bleu4) / 2);
    EXPECT_TRUE(report.records[2].excluded);
    const auto doc = to_json(report);
    EXPECT_EQ(doc["fingerprint"], "fp");
    EXPECT_EQ(doc["records"].size(), 3u);
}

TEST(Report, GroupsByPlanAndCsv) {
    const std::vector<GenerationRecord> recs{
        record(0, "topo:k=3", "a b", "", "a b"),
        record(0, "text:k=3", "a", "", "a b"),
        record(1, "topo:k=3", "c", "", "a b"),
    };
    const auto reports = evaluate_store(recs, exact_match_embedder(), "fp");
    ASSERT_EQ(reports.size(), 2u);
    std::map<std::string, std::size_t> sizes;
    for (const auto& r : reports) sizes[r.plan_key] = r.records.size();
    EXPECT_EQ(sizes["topo:k=3"], 2u);
    EXPECT_EQ(sizes["text:k=3"], 1u);
    TempDir dir;
    write_eval_csv(reports, dir / "e.csv");
    const auto csv = read_file(dir / "e.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "plan,strategy,backend,target,excluded,bleu4,rouge_l,emb_precision,emb_recall,emb_f1");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Report, Boost) {
    const MetricMeans m{0.4, 0.6, 0.9};
    const MetricMeans base{0.2, 0.3, 0.6};
    const auto b = boost(m, base);
    ASSERT_TRUE(b.has_value());
    EXPECT_DOUBLE_EQ(b->bleu4, 2.0);
    EXPECT_DOUBLE_EQ(b->rouge_l, 2.0);
    EXPECT_DOUBLE_EQ(b->emb_f1, 1.5);
    EXPECT_FALSE(boost(m, MetricMeans{0.0, 0.3, 0.6}).has_value());
}

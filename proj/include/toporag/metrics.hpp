#pragma once

#include "toporag/generation.hpp"
#include "toporag/text_embed.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace toporag {

// Tokenizer "words-punct-v1": ASCII-lowercase, split on whitespace, and emit
// every ASCII punctuation character as a token of its own. Bytes >= 0x80 are
// word characters.
inline constexpr std::string_view kTokenizerVersion = "words-punct-v1";
std::vector<std::string> tokenize(std::string_view text);

/// Remove the observed prefix from generated text when it starts with it
/// (whitespace-normalized, at a word boundary); otherwise return it unchanged.
std::string strip_observed_prefix(std::string_view generated, std::string_view prefix);

inline constexpr double kBleuEpsilon = 0.1;

/// Sentence BLEU-4, uniform weights. A precision with no matches (or no
/// candidate n-grams) becomes (m + eps) / (t + eps). Brevity penalty
/// exp(1 - r/c) when c < r. Empty candidate scores 0.
double bleu4(std::string_view candidate, std::string_view reference);
double bleu4_tokens(const std::vector<std::string>& cand, const std::vector<std::string>& ref);

/// LCS-based F1 (beta = 1). 0 when either side is empty or LCS = 0.
double rouge_l(std::string_view candidate, std::string_view reference);
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Maps tokens to one embedding row each.
using TokenEmbedder = std::function<Matrix(const std::vector<std::string>&)>;
TokenEmbedder make_token_embedder(const EmbeddingProviderSpec& provider);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy matching: each token takes its best cosine on the other side. No idf.
PrecisionRecall embedding_f1(std::string_view candidate, std::string_view reference,
                             const TokenEmbedder& embedder);
PrecisionRecall embedding_f1_rows(const Matrix& cand, const Matrix& ref);

struct RecordScore {
    NodeId target = 0;
    bool excluded = false;
    std::string reason;
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    PrecisionRecall emb;
};

struct MetricMeans {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double emb_f1 = 0.0;
};

struct EvalReport {
    std::string plan_key;
    std::string strategy;
    std::string backend_id;
    std::string fingerprint;
    std::vector<RecordScore> records;
    std::size_t scored = 0;
    std::size_t excluded = 0;
    MetricMeans means;  // over scored records only
};

/// Score one plan's records. Candidates are stripped of the observed prefix;
/// references are the hidden suffixes.
EvalReport evaluate_records(const std::vector<GenerationRecord>& records, const TokenEmbedder& embedder,
                            std::string fingerprint);

/// Split a record list by plan and backend and evaluate each group.
std::vector<EvalReport> evaluate_store(const std::vector<GenerationRecord>& records, const TokenEmbedder& embedder,
                                       const std::string& fingerprint);

/// Ratio of means, reported alongside the text baseline. Missing when the
/// baseline mean is 0.
std::optional<MetricMeans> boost(const MetricMeans& method, const MetricMeans& baseline);

nlohmann::json to_json(const EvalReport& report);
/// One row per record across all reports.
void write_eval_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);

}  // namespace toporag

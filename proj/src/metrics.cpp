#include "toporag/metrics.hpp"
#include "toporag/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

namespace toporag {

using json = nlohmann::json;

namespace {

bool is_ascii_punct(unsigned char c) {
    return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
           (c >= 0x7b && c <= 0x7e);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    for (auto word : split_whitespace(text)) {
        std::string current;
        for (unsigned char c : word) {
            if (is_ascii_punct(c)) {
                if (!current.empty()) tokens.push_back(std::move(current));
                current.clear();
                tokens.emplace_back(1, static_cast<char>(c));
            } else {
                current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
            }
        }
        if (!current.empty()) tokens.push_back(std::move(current));
    }
    return tokens;
}

std::string strip_observed_prefix(std::string_view generated, std::string_view prefix) {
    const std::string p = normalize_whitespace(prefix);
    if (p.empty()) return std::string(generated);
    const std::string g = normalize_whitespace(generated);
    if (g.size() >= p.size() && g.compare(0, p.size(), p) == 0) {
        if (g.size() == p.size()) return {};
        if (g[p.size()] == ' ') return g.substr(p.size() + 1);
    }
    return std::string(generated);
}

double bleu4_tokens(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    if (cand.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::map<std::vector<std::string>, std::size_t> ref_counts, cand_counts;
        for (std::size_t i = 0; i + n <= ref.size(); ++i) {
            ++ref_counts[std::vector<std::string>(ref.begin() + static_cast<std::ptrdiff_t>(i),
                                                  ref.begin() + static_cast<std::ptrdiff_t>(i + n))];
        }
        std::size_t total = 0;
        for (std::size_t i = 0; i + n <= cand.size(); ++i, ++total) {
            ++cand_counts[std::vector<std::string>(cand.begin() + static_cast<std::ptrdiff_t>(i),
                                                   cand.begin() + static_cast<std::ptrdiff_t>(i + n))];
        }
        std::size_t matched = 0;
        for (const auto& [gram, count] : cand_counts) {
            const auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) matched += std::min(count, it->second);
        }
        const double p = matched == 0 ? kBleuEpsilon / (static_cast<double>(total) + kBleuEpsilon)
                                      : static_cast<double>(matched) / static_cast<double>(total);
        log_sum += std::log(p);
    }
    const double c = static_cast<double>(cand.size());
    const double r = static_cast<double>(ref.size());
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return bp * std::exp(log_sum / 4.0);
}

double bleu4(std::string_view candidate, std::string_view reference) {
    return bleu4_tokens(tokenize(candidate), tokenize(reference));
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const auto& shorter = a.size() < b.size() ? a : b;
    const auto& longer = a.size() < b.size() ? b : a;
    std::vector<std::size_t> row(shorter.size() + 1, 0);
    for (const auto& x : longer) {
        std::size_t diag = 0;
        for (std::size_t j = 1; j <= shorter.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = x == shorter[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
            diag = up;
        }
    }
    return row.back();
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto cand = tokenize(candidate);
    const auto ref = tokenize(reference);
    if (cand.empty() || ref.empty()) return 0.0;
    const auto lcs = static_cast<double>(lcs_length(cand, ref));
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(cand.size());
    const double r = lcs / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

TokenEmbedder make_token_embedder(const EmbeddingProviderSpec& provider) {
    return [provider](const std::vector<std::string>& tokens) { return embed_tokens(provider, tokens); };
}

PrecisionRecall embedding_f1_rows(const Matrix& cand, const Matrix& ref) {
    if (cand.rows() == 0 || ref.rows() == 0) return {};
    if (cand.cols() != ref.cols()) throw ValidationError("token embeddings have different dimensions");
    Vector cn(cand.rows()), rn(ref.rows());
    for (Eigen::Index i = 0; i < cand.rows(); ++i) cn(i) = cand.row(i).norm();
    for (Eigen::Index j = 0; j < ref.rows(); ++j) rn(j) = ref.row(j).norm();
    Matrix sim = cand * ref.transpose();
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
        for (Eigen::Index j = 0; j < sim.cols(); ++j) {
            const double den = cn(i) * rn(j);
            sim(i, j) = den == 0.0 ? 0.0 : sim(i, j) / den;
        }
    }
    PrecisionRecall out;
    out.precision = sim.rowwise().maxCoeff().mean();
    out.recall = sim.colwise().maxCoeff().mean();
    const double s = out.precision + out.recall;
    out.f1 = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
    return out;
}

PrecisionRecall embedding_f1(std::string_view candidate, std::string_view reference,
                             const TokenEmbedder& embedder) {
    const auto cand = tokenize(candidate);
    const auto ref = tokenize(reference);
    if (cand.empty() || ref.empty()) return {};
    return embedding_f1_rows(embedder(cand), embedder(ref));
}

EvalReport evaluate_records(const std::vector<GenerationRecord>& records, const TokenEmbedder& embedder,
                            std::string fingerprint) {
    EvalReport report;
    report.fingerprint = std::move(fingerprint);
    if (!records.empty()) {
        report.plan_key = records.front().plan_key;
        report.strategy = records.front().strategy;
        report.backend_id = records.front().backend_id;
    }
    std::vector<const GenerationRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->target < b->target; });

    double bleu_sum = 0.0, rouge_sum = 0.0, f1_sum = 0.0;
    for (const auto* rec : sorted) {
        RecordScore score;
        score.target = rec->target;
        score.excluded = rec->excluded || !rec->output;
        score.reason = rec->reason;
        if (score.excluded) {
            ++report.excluded;
        } else {
            const std::string cand = strip_observed_prefix(*rec->output, rec->prefix);
            score.bleu4 = bleu4(cand, rec->reference);
            score.rouge_l = rouge_l(cand, rec->reference);
            score.emb = embedding_f1(cand, rec->reference, embedder);
            bleu_sum += score.bleu4;
            rouge_sum += score.rouge_l;
            f1_sum += score.emb.f1;
            ++report.scored;
        }
        report.records.push_back(std::move(score));
    }
    if (report.scored) {
        const auto n = static_cast<double>(report.scored);
        report.means = {bleu_sum / n, rouge_sum / n, f1_sum / n};
    }
    return report;
}

std::vector<EvalReport> evaluate_store(const std::vector<GenerationRecord>& records, const TokenEmbedder& embedder,
                                       const std::string& fingerprint) {
    std::map<std::pair<std::string, std::string>, std::vector<GenerationRecord>> groups;
    for (const auto& r : records) groups[{r.plan_key, r.backend_id}].push_back(r);
    std::vector<EvalReport> out;
    for (const auto& [key, group] : groups) out.push_back(evaluate_records(group, embedder, fingerprint));
    return out;
}

std::optional<MetricMeans> boost(const MetricMeans& method, const MetricMeans& baseline) {
    if (baseline.bleu4 == 0.0 || baseline.rouge_l == 0.0 || baseline.emb_f1 == 0.0) return std::nullopt;
    return MetricMeans{method.bleu4 / baseline.bleu4, method.rouge_l / baseline.rouge_l,
                       method.emb_f1 / baseline.emb_f1};
}

json to_json(const EvalReport& report) {
    json recs = json::array();
    for (const auto& r : report.records) {
        json row{{"target", r.target}, {"excluded", r.excluded}};
        if (r.excluded) {
            row["reason"] = r.reason;
        } else {
            row["bleu4"] = r.bleu4;
            row["rouge_l"] = r.rouge_l;
            row["emb_precision"] = r.emb.precision;
            row["emb_recall"] = r.emb.recall;
            row["emb_f1"] = r.emb.f1;
        }
        recs.push_back(std::move(row));
    }
    return json{{"plan", report.plan_key},
                {"strategy", report.strategy},
                {"backend", report.backend_id},
                {"fingerprint", report.fingerprint},
                {"tokenizer", kTokenizerVersion},
                {"scored", report.scored},
                {"excluded", report.excluded},
                {"mean", {{"bleu4", report.means.bleu4}, {"rouge_l", report.means.rouge_l}, {"emb_f1", report.means.emb_f1}}},
                {"records", std::move(recs)}};
}

namespace {

std::string csv_field(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void write_eval_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "plan,strategy,backend,target,excluded,bleu4,rouge_l,emb_precision,emb_recall,emb_f1\n";
    for (const auto& rep : reports) {
        for (const auto& r : rep.records) {
            out << csv_field(rep.plan_key) << ',' << csv_field(rep.strategy) << ',' << csv_field(rep.backend_id)
                << ',' << r.target << ',' << (r.excluded ? 1 : 0);
            if (r.excluded) {
                out << ",,,,,\n";
            } else {
                out << ',' << fmt(r.bleu4) << ',' << fmt(r.rouge_l) << ',' << fmt(r.emb.precision) << ','
                    << fmt(r.emb.recall) << ',' << fmt(r.emb.f1) << '\n';
            }
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace toporag

#pragma once

#include "toporag/embedding.hpp"
#include "toporag/graph.hpp"
#include "toporag/proximity.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace toporag {

/// Pearson r is undefined because one of the sequences is constant.
class UndefinedCorrelation : public ValidationError {
public:
    using ValidationError::ValidationError;
};

enum class PairSelectionKind { all_ordered, all_unordered_no_self, sampled };

struct PairSelection {
    PairSelectionKind kind = PairSelectionKind::all_unordered_no_self;
    std::size_t count = 1'000'000;  // sampled only
    std::uint64_t seed = 0;         // sampled only

    std::string label() const;
};

struct PairSample {
    std::string selection;
    std::vector<std::pair<NodeId, NodeId>> pairs;
    std::vector<double> text_scores;
    std::vector<double> topo_scores;

    std::size_t size() const noexcept { return text_scores.size(); }
};

/// What the topological axis of a pair sample measures.
enum class TopoScore { cosine, l2_distance, inverse_distance };

/// Cosine for proximity and text embeddings, L2 distance for role embeddings.
TopoScore default_topo_score(EmbeddingKind kind);
std::string_view to_string(TopoScore score);

double pearson(std::span<const double> x, std::span<const double> y);
double pearson(const PairSample& sample);

/// Number of pairs `selection` yields on n nodes.
std::size_t pair_count(const PairSelection& selection, std::size_t n);

/// Unordered pair (i < j) at position `index` in row-major enumeration.
std::pair<NodeId, NodeId> unordered_pair_at(std::size_t index, std::size_t n);

std::vector<std::pair<NodeId, NodeId>> select_pairs(const PairSelection& selection, std::size_t n);

PairSample pairwise_scores(const TextAttributedGraph& graph, const EmbeddingMatrix& text_emb,
                           const EmbeddingMatrix& topo_emb, const PairSelection& selection,
                           std::optional<TopoScore> topo_score = std::nullopt);

struct CurveBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::optional<double> mean;
    double stderr_mean = 0.0;
};

struct BinnedCurve {
    std::vector<CurveBin> bins;
    std::size_t out_of_range = 0;
};

/// Bin pairs by topo score ([lo, hi), last bin closed) and summarize the text
/// scores in each bin.
BinnedCurve binned_curve(const PairSample& sample, std::span<const double> edges);

struct GroupMatrix {
    std::vector<std::string> labels;                      // sorted
    std::vector<std::vector<std::optional<double>>> values;  // missing when no i != j pair exists
};

GroupMatrix group_mean_matrix(std::span<const std::string> groups,
                              const std::function<double(NodeId, NodeId)>& score);

/// Pearson r between text and proximity similarity for diffusion depth
/// k = 1..max_depth, uniform weights over the first k layers.
std::vector<double> layer_sweep(const TextAttributedGraph& graph, const EmbeddingMatrix& text_emb,
                                std::size_t max_depth, const DiffusionConfig& config,
                                const PairSelection& selection = {});

nlohmann::json analysis_report(double r, const PairSample& sample, std::string_view topo_axis,
                               const BinnedCurve* curve, const GroupMatrix* groups);

}  // namespace toporag

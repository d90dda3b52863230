#pragma once

#include "toporag/generation.hpp"
#include "toporag/graph.hpp"
#include "toporag/text_embed.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toporag {

enum class TaskKind { node_classification, link_prediction };
enum class ModelKind { mlp, propagated_mlp };
enum class OptimizerKind { adam, sgd };

std::string_view to_string(ModelKind m);
ModelKind parse_model(std::string_view name);

struct TaskEvalConfig {
    TaskKind task = TaskKind::node_classification;
    ModelKind model = ModelKind::mlp;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::size_t epochs = 1000;
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    std::size_t patience = 100;
    std::size_t hidden = 64;
    double dropout = 0.5;
    std::size_t layers = 2;
    std::size_t eval_negatives = 10'000;  // link prediction
    std::vector<std::uint64_t> seeds{0, 1, 2};
    double train_fraction = 0.6;  // node classification; the rest of the
    double val_fraction = 0.2;    // non-test nodes go to validation

    static TaskEvalConfig node_classification();
    static TaskEvalConfig link_prediction();
    void validate() const;
};

/// Two-layer perceptron parameters.
struct MlpParams {
    Matrix w1;
    Eigen::RowVectorXd b1;
    Matrix w2;
    Eigen::RowVectorXd b2;
};

struct RunSummary {
    std::vector<double> values;  // one per seed
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single run
    bool saturated = false;  // link prediction with fewer than 200 test edges
};

RunSummary summarize(std::vector<double> values);

/// D^-1 A applied twice to the features.
Matrix propagate_features(const TextAttributedGraph& graph, const Matrix& features, std::size_t hops = 2);

/// Per-node labels from the graph; nodes without a label are nullopt.
std::vector<std::optional<std::string>> graph_labels(const TextAttributedGraph& graph);

using EpochHook = std::function<void(std::size_t epoch, const MlpParams& params)>;

/// Train an MLP classifier per seed and report test accuracy. When
/// `test_nodes` is given those nodes form the test set and the remaining
/// labelled nodes are split into train/validation; otherwise all labelled
/// nodes are split train/val/test by the configured fractions.
RunSummary train_node_classifier(const Matrix& features, const TextAttributedGraph& graph,
                                 const std::vector<std::optional<std::string>>& labels,
                                 const TaskEvalConfig& config,
                                 const std::optional<std::vector<NodeId>>& test_nodes = std::nullopt,
                                 const EpochHook& on_epoch = {});

/// Fraction of positive scores strictly greater than the k-th highest
/// negative score.
double hits_at_k(std::span<const double> positive, std::span<const double> negative, std::size_t k = 100);

struct EdgeSplit {
    std::vector<Edge> train, valid, test;
};

/// Shuffle the edges with `seed` and cut them 70/10/20.
EdgeSplit split_edges(const TextAttributedGraph& graph, std::uint64_t seed);

/// `count` distinct non-edges (u < v) drawn with `seed`; all of them when the
/// graph has fewer.
std::vector<Edge> sample_negative_edges(const TextAttributedGraph& graph, std::size_t count, std::uint64_t seed);

/// Propagated-MLP encoder with a dot-product scorer, Hits@100 per seed.
RunSummary link_prediction_eval(const Matrix& features, const TextAttributedGraph& graph,
                                const TaskEvalConfig& config);

enum class ImputeStrategy { zero, random, global_mean, toporag_text };

std::string_view to_string(ImputeStrategy s);
ImputeStrategy parse_impute_strategy(std::string_view name);

struct ImputeExtras {
    std::uint64_t seed = 0;
    const std::map<NodeId, std::string>* generated = nullptr;  // toporag_text
    const EmbeddingProviderSpec* provider = nullptr;            // toporag_text
};

/// Replace the rows of nodes marked missing. Observed rows are untouched.
Matrix impute_features(const Matrix& features, const std::vector<bool>& missing, ImputeStrategy strategy,
                       const ImputeExtras& extras = {});

/// Generated text per target for one plan/backend, excluded records skipped.
std::map<NodeId, std::string> generated_texts(const std::vector<GenerationRecord>& records);

}  // namespace toporag

#pragma once

#include "toporag/graph.hpp"
#include "toporag/http.hpp"
#include "toporag/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toporag {

inline constexpr std::string_view kDefaultTemplate = "continue-v1";

struct PromptBundle {
    NodeId target = 0;
    std::string prefix;
    std::vector<std::string> retrieved;
    std::string template_id{kDefaultTemplate};
    std::size_t word_budget = 0;
    std::size_t estimated_tokens = 0;
    std::string prompt;
};

/// ceil(1.4 * whitespace token count), in integer arithmetic.
std::size_t estimate_tokens(std::string_view text);

/// Render the prompt. Retrieved texts are copied verbatim, never truncated.
PromptBundle assemble_prompt(std::string_view prefix, const std::vector<std::string>& retrieved,
                             std::size_t word_budget, std::string_view template_id = kDefaultTemplate,
                             NodeId target = 0);

struct GuardResult {
    bool accepted = true;
    std::string reason;  // "context_limit" when rejected
};

/// Accept iff estimated_tokens <= limit_tokens.
GuardResult context_guard(const PromptBundle& bundle, std::size_t limit_tokens);

struct GenerationBackendSpec {
    std::string endpoint = "mock";
    std::string model = "mock";
    std::size_t max_words = 150;
    double temperature = 0.0;
    std::chrono::milliseconds timeout{60000};
    std::string auth_env = "GEN_API_KEY";
    std::size_t max_in_flight = 4;
    RetryPolicy retry;

    bool is_mock() const noexcept { return endpoint == "mock"; }
    void validate() const;
    /// Identifier stored on records: "mock" or model@endpoint.
    std::string id() const;
};

/// Mock: the first word_budget tokens of the retrieved texts (concatenated and
/// cycled), or the prefix words reversed when nothing was retrieved.
/// Remote: POST {endpoint}/generate. Throws RemoteError on failure or an
/// empty reply.
std::string generate(const GenerationBackendSpec& backend, const PromptBundle& bundle);

struct GenerationRecord {
    NodeId target = 0;
    std::string strategy;
    std::string plan_key;
    std::string backend_id;
    std::size_t starting_words = 0;
    std::string prompt;
    std::string prefix;
    std::optional<std::string> output;
    std::string reference;
    std::vector<NodeId> retrieved_ids;
    std::size_t estimated_tokens = 0;
    bool excluded = false;
    std::string reason;

    /// (node, plan, backend) identity used for resumption.
    std::string key() const;
};

nlohmann::json to_json(const GenerationRecord& record);
GenerationRecord record_from_json(const nlohmann::json& doc);

/// Append-only JSON-lines store. Later lines win when a key repeats.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path path);

    const std::filesystem::path& path() const noexcept { return path_; }
    bool contains(const std::string& key) const { return by_key_.count(key) != 0; }
    const GenerationRecord* find(const std::string& key) const;
    std::vector<GenerationRecord> records() const;
    std::size_t size() const noexcept { return by_key_.size(); }

    void append(const GenerationRecord& record);
    /// Rewrite the file with one line per key, ordered by plan, backend, target.
    void compact();

private:
    std::filesystem::path path_;
    std::map<std::string, GenerationRecord> by_key_;
};

struct ExperimentConfig {
    std::size_t sample_size = 500;
    std::uint64_t seed = 0;
    std::size_t word_budget = 150;
    std::size_t limit_tokens = 4096;
};

/// Sample partial nodes, retrieve, guard, generate. Returns one record per
/// sampled node, ordered by target id. Failures become excluded records. With
/// a store, keys already present are returned from it rather than regenerated
/// and new records are appended.
std::vector<GenerationRecord> run_experiment(const TextAttributedGraph& graph, const SplitAssignment& split,
                                             const RetrievalPlan& plan, const RetrievalContext& ctx,
                                             const GenerationBackendSpec& backend, const ExperimentConfig& config,
                                             RecordStore* store = nullptr);

/// Per-target nodes run_experiment would sample, sorted.
std::vector<NodeId> sample_targets(const SplitAssignment& split, std::size_t sample_size, std::uint64_t seed);

/// Default generated-word budgets keyed by dataset name (lowercase).
std::size_t default_word_budget(std::string_view dataset);

}  // namespace toporag

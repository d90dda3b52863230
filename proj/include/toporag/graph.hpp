#pragma once

#include "toporag/common.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace toporag {

enum class TextDirection { sent, received };

/// One entry of a multi-text node (an email attached to an employee node).
struct NodeText {
    std::string text;
    TextDirection direction = TextDirection::sent;
};

struct NodeAttributes {
    std::int64_t source_id = 0;  // id in the file this node was loaded from
    std::string text;
    std::optional<std::string> label;
    std::optional<std::int64_t> timestamp;
    bool text_missing = false;
    std::vector<NodeText> texts;  // optional multi-text payload
};

/// Unordered edge stored with first < second.
using Edge = std::pair<NodeId, NodeId>;

/// Undirected text-attributed graph with contiguous ids 0..N-1 and a CSR
/// adjacency. Immutable after construction; safe for concurrent readers.
class TextAttributedGraph {
public:
    TextAttributedGraph() = default;

    /// Canonicalizes `edges`: endpoints ordered, self-loops and duplicates
    /// dropped. Throws ValidationError on an out-of-range endpoint or a
    /// non-flagged empty text.
    TextAttributedGraph(std::vector<NodeAttributes> nodes, std::vector<Edge> edges);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }

    const NodeAttributes& node(NodeId id) const;
    const std::vector<NodeAttributes>& nodes() const noexcept { return nodes_; }
    const std::string& text(NodeId id) const { return node(id).text; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    std::span<const NodeId> neighbors(NodeId id) const;
    std::size_t degree(NodeId id) const { return neighbors(id).size(); }
    bool has_edge(NodeId a, NodeId b) const;

    bool has_labels() const noexcept;
    bool has_timestamps() const noexcept;

    /// True when node i was loaded from source id i for every i.
    bool identity_mapping() const noexcept;

private:
    void check(NodeId id) const;

    std::vector<NodeAttributes> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_{0};
    std::vector<NodeId> adjacency_;
};

/// Load a graph from a JSON-lines nodes file and a TAB-separated edges file.
/// Nodes whose text has fewer than `min_text_words` words are dropped and the
/// survivors are re-packed to contiguous ids in ascending source-id order.
/// Whitespace in texts is normalized to single spaces.
TextAttributedGraph load_graph(const std::filesystem::path& nodes_path,
                               const std::filesystem::path& edges_path,
                               std::size_t min_text_words = 0);

/// Write the graph back out in the input formats, using the current ids.
void write_graph(const TextAttributedGraph& graph, const std::filesystem::path& nodes_path,
                 const std::filesystem::path& edges_path);

/// JSON-lines sidecar {"old": source id, "new": id}, one line per node.
void write_reindex_map(const TextAttributedGraph& graph, const std::filesystem::path& path);

std::string graph_fingerprint(const TextAttributedGraph& graph);

enum class SplitStrategy { random, time };

struct PartialNode {
    NodeId id = 0;
    std::string prefix;  // X_i, the observed leading words
    std::string suffix;  // Y_i, the hidden remainder
    bool excluded = false;  // text too short for the requested prefix
};

struct SplitAssignment {
    std::vector<NodeId> full_ids;     // sorted
    std::vector<NodeId> partial_ids;  // sorted
    std::size_t starting_words = 0;
    std::vector<PartialNode> partial;  // aligned with partial_ids
    std::size_t excluded_count = 0;

    bool is_partial(NodeId id) const;
    const PartialNode* find(NodeId id) const;
    /// Partial ids with a usable prefix/suffix split.
    std::vector<NodeId> eligible_ids() const;
};

/// ceil(fraction * n), guarded against floating-point overshoot.
std::size_t fraction_count(double fraction, std::size_t n);

SplitAssignment split_nodes(const TextAttributedGraph& graph, double partial_fraction,
                            SplitStrategy strategy, std::size_t starting_words,
                            std::uint64_t seed);

/// Same partial set, different prefix length (starting-words sweeps).
SplitAssignment with_starting_words(const TextAttributedGraph& graph,
                                    const SplitAssignment& split, std::size_t starting_words);

void write_split(const SplitAssignment& split, const std::filesystem::path& path);
SplitAssignment read_split(const std::filesystem::path& path);

/// Drop every edge whose endpoints are both partially observed.
TextAttributedGraph remove_partial_partial_edges(const TextAttributedGraph& graph,
                                                 const SplitAssignment& split);

/// Induced subgraph on `keep`, re-indexed in ascending id order. Source ids
/// are carried through so the result maps back to the original file.
TextAttributedGraph induced_subgraph(const TextAttributedGraph& graph,
                                     std::vector<NodeId> keep);

/// Layered neighbor sampling from ceil(seed_fraction * N) random seeds.
/// Layer l samples min(fanouts[l], degree) distinct neighbors of every
/// frontier node; the next frontier is the set of nodes first reached at l.
TextAttributedGraph sample_subgraph(const TextAttributedGraph& graph, double seed_fraction,
                                    std::span<const std::size_t> fanouts, std::uint64_t seed);

/// Node ids visited by sample_subgraph, sorted.
std::vector<NodeId> sample_nodes(const TextAttributedGraph& graph, double seed_fraction,
                                 std::span<const std::size_t> fanouts, std::uint64_t seed);

std::vector<NodeId> neighbors(const TextAttributedGraph& graph, NodeId node);

/// D^-1 A. Zero-degree rows stay all-zero.
SparseMatrix normalized_adjacency(const TextAttributedGraph& graph);

}  // namespace toporag

#include "toporag/graph.hpp"
#include "toporag/random.hpp"
#include "toporag/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

namespace toporag {

using json = nlohmann::json;

TextAttributedGraph::TextAttributedGraph(std::vector<NodeAttributes> nodes,
                                         std::vector<Edge> edges)
    : nodes_(std::move(nodes)) {
    const std::size_t n = nodes_.size();
    for (const auto& node : nodes_) {
        if (node.text.empty() && !node.text_missing && node.texts.empty()) {
            throw ValidationError("node " + std::to_string(node.source_id) +
                                  " has an empty text but is not flagged as text-missing");
        }
    }
    edges_.reserve(edges.size());
    for (auto [a, b] : edges) {
        if (a >= n || b >= n) {
            throw ValidationError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                  ") references a node outside 0.." + std::to_string(n));
        }
        if (a == b) continue;
        edges_.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

    std::vector<std::size_t> degree(n, 0);
    for (auto [a, b] : edges_) {
        ++degree[a];
        ++degree[b];
    }
    offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + degree[i];
    adjacency_.resize(offsets_[n]);
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (auto [a, b] : edges_) {
        adjacency_[cursor[a]++] = b;
        adjacency_[cursor[b]++] = a;
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                  adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
    }
}

void TextAttributedGraph::check(NodeId id) const {
    if (id >= nodes_.size()) {
        throw ValidationError("node id " + std::to_string(id) + " out of range (N=" +
                              std::to_string(nodes_.size()) + ")");
    }
}

const NodeAttributes& TextAttributedGraph::node(NodeId id) const {
    check(id);
    return nodes_[id];
}

std::span<const NodeId> TextAttributedGraph::neighbors(NodeId id) const {
    check(id);
    return {adjacency_.data() + offsets_[id], offsets_[id + 1] - offsets_[id]};
}

bool TextAttributedGraph::has_edge(NodeId a, NodeId b) const {
    const auto row = neighbors(a);
    return std::binary_search(row.begin(), row.end(), b);
}

bool TextAttributedGraph::has_labels() const noexcept {
    return !nodes_.empty() &&
           std::all_of(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.label.has_value(); });
}

bool TextAttributedGraph::has_timestamps() const noexcept {
    return !nodes_.empty() && std::all_of(nodes_.begin(), nodes_.end(),
                                          [](const auto& n) { return n.timestamp.has_value(); });
}

bool TextAttributedGraph::identity_mapping() const noexcept {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].source_id != static_cast<std::int64_t>(i)) return false;
    }
    return true;
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

bool blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

NodeAttributes parse_node(const json& obj, const std::string& file, std::size_t line) {
    if (!obj.is_object()) throw FormatError(file, line, "expected a JSON object");
    NodeAttributes node;
    const auto id = obj.find("id");
    if (id == obj.end() || !id->is_number_integer()) {
        throw FormatError(file, line, "missing integer \"id\"");
    }
    node.source_id = id->get<std::int64_t>();

    if (const auto missing = obj.find("missing"); missing != obj.end() && !missing->is_null()) {
        if (!missing->is_boolean()) throw FormatError(file, line, "\"missing\" must be a boolean");
        node.text_missing = missing->get<bool>();
    }
    const auto text = obj.find("text");
    if (text != obj.end() && !text->is_null()) {
        if (!text->is_string()) throw FormatError(file, line, "\"text\" must be a string");
        node.text = normalize_whitespace(text->get<std::string>());
    } else if (!node.text_missing && !obj.contains("texts")) {
        throw FormatError(file, line, "missing \"text\"");
    }

    if (const auto label = obj.find("label"); label != obj.end() && !label->is_null()) {
        if (label->is_string()) {
            node.label = label->get<std::string>();
        } else if (label->is_number_integer()) {
            node.label = std::to_string(label->get<std::int64_t>());
        } else {
            throw FormatError(file, line, "\"label\" must be a string, an integer or null");
        }
    }
    if (const auto ts = obj.find("timestamp"); ts != obj.end() && !ts->is_null()) {
        if (!ts->is_number_integer()) throw FormatError(file, line, "\"timestamp\" must be an integer");
        node.timestamp = ts->get<std::int64_t>();
    }
    if (const auto texts = obj.find("texts"); texts != obj.end() && !texts->is_null()) {
        if (!texts->is_array()) throw FormatError(file, line, "\"texts\" must be an array");
        for (const auto& entry : *texts) {
            NodeText nt;
            if (entry.is_string()) {
                nt.text = normalize_whitespace(entry.get<std::string>());
            } else if (entry.is_object() && entry.contains("text") && entry["text"].is_string()) {
                nt.text = normalize_whitespace(entry["text"].get<std::string>());
                const auto dir = entry.value("direction", std::string("sent"));
                if (dir == "sent") {
                    nt.direction = TextDirection::sent;
                } else if (dir == "received") {
                    nt.direction = TextDirection::received;
                } else {
                    throw FormatError(file, line, "unknown text direction \"" + dir + "\"");
                }
            } else {
                throw FormatError(file, line, "\"texts\" entries must be strings or {text, direction}");
            }
            node.texts.push_back(std::move(nt));
        }
    }
    if (node.text.empty() && !node.text_missing && node.texts.empty()) {
        throw FormatError(file, line, "empty text on a node not flagged \"missing\"");
    }
    return node;
}

bool parse_id(std::string_view field, std::int64_t& out) {
    while (!field.empty() && (field.front() == ' ')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
    if (field.empty()) return false;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

TextAttributedGraph load_graph(const std::filesystem::path& nodes_path,
                               const std::filesystem::path& edges_path,
                               std::size_t min_text_words) {
    const std::string nodes_file = nodes_path.string();
    const std::string edges_file = edges_path.string();

    std::vector<NodeAttributes> records;
    std::unordered_map<std::int64_t, std::size_t> by_source;
    {
        auto in = open_input(nodes_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (blank(line)) continue;
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::parse_error& e) {
                throw FormatError(nodes_file, line_no, std::string("invalid JSON: ") + e.what());
            }
            auto node = parse_node(obj, nodes_file, line_no);
            if (!by_source.emplace(node.source_id, records.size()).second) {
                throw FormatError(nodes_file, line_no,
                                  "duplicate node id " + std::to_string(node.source_id));
            }
            records.push_back(std::move(node));
        }
    }

    std::vector<std::pair<std::int64_t, std::int64_t>> raw_edges;
    {
        auto in = open_input(edges_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (blank(line)) continue;
            const auto tab = line.find('\t');
            std::int64_t a = 0, b = 0;
            if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos ||
                !parse_id(std::string_view(line).substr(0, tab), a) ||
                !parse_id(std::string_view(line).substr(tab + 1), b)) {
                throw FormatError(edges_file, line_no, "expected \"src<TAB>dst\" with decimal ids");
            }
            for (auto endpoint : {a, b}) {
                if (!by_source.contains(endpoint)) {
                    throw FormatError(edges_file, line_no,
                                      "dangling edge endpoint " + std::to_string(endpoint));
                }
            }
            raw_edges.emplace_back(a, b);
        }
    }

    // Keep nodes that pass the word filter; multi-text and text-missing nodes are exempt.
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& node = records[i];
        const bool exempt = node.text_missing || !node.texts.empty();
        if (exempt || count_words(node.text) >= min_text_words) keep.push_back(i);
    }
    std::sort(keep.begin(), keep.end(), [&](std::size_t x, std::size_t y) {
        return records[x].source_id < records[y].source_id;
    });

    std::unordered_map<std::int64_t, NodeId> new_id;
    std::vector<NodeAttributes> nodes;
    nodes.reserve(keep.size());
    for (std::size_t i : keep) {
        new_id.emplace(records[i].source_id, nodes.size());
        nodes.push_back(std::move(records[i]));
    }

    std::vector<Edge> edges;
    edges.reserve(raw_edges.size());
    for (auto [a, b] : raw_edges) {
        const auto ia = new_id.find(a);
        const auto ib = new_id.find(b);
        if (ia == new_id.end() || ib == new_id.end()) continue;  // endpoint filtered out
        edges.emplace_back(ia->second, ib->second);
    }
    return TextAttributedGraph(std::move(nodes), std::move(edges));
}

void write_graph(const TextAttributedGraph& graph, const std::filesystem::path& nodes_path,
                 const std::filesystem::path& edges_path) {
    auto nodes_out = open_output(nodes_path);
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
        const auto& node = graph.node(i);
        json obj;
        obj["id"] = i;
        obj["text"] = node.text;
        obj["label"] = node.label ? json(*node.label) : json(nullptr);
        obj["timestamp"] = node.timestamp ? json(*node.timestamp) : json(nullptr);
        if (node.text_missing) obj["missing"] = true;
        if (!node.texts.empty()) {
            json texts = json::array();
            for (const auto& t : node.texts) {
                texts.push_back({{"text", t.text},
                                 {"direction", t.direction == TextDirection::sent ? "sent" : "received"}});
            }
            obj["texts"] = std::move(texts);
        }
        nodes_out << obj.dump() << '\n';
    }
    auto edges_out = open_output(edges_path);
    for (auto [a, b] : graph.edges()) edges_out << a << '\t' << b << '\n';
    if (!nodes_out || !edges_out) throw IoError("failed writing graph files");
}

void write_reindex_map(const TextAttributedGraph& graph, const std::filesystem::path& path) {
    auto out = open_output(path);
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
        out << json{{"old", graph.node(i).source_id}, {"new", i}}.dump() << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::string graph_fingerprint(const TextAttributedGraph& graph) {
    std::uint64_t h = fnv1a64("toporag-graph-v1");
    auto mix = [&h](std::string_view bytes) {
        h = fnv1a64(bytes, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
    };
    mix(std::to_string(graph.node_count()));
    for (const auto& node : graph.nodes()) {
        mix(node.text);
        mix(node.label.value_or("\x01"));
        mix(node.timestamp ? std::to_string(*node.timestamp) : "\x01");
        for (const auto& t : node.texts) mix(t.text);
    }
    for (auto [a, b] : graph.edges()) mix(std::to_string(a) + "-" + std::to_string(b));
    return hex64(h);
}

// ---------------------------------------------------------------------------
// Splits

std::size_t fraction_count(double fraction, std::size_t n) {
    const double raw = fraction * static_cast<double>(n);
    const double rounded = std::round(raw);
    const double value = std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
    return std::min(n, static_cast<std::size_t>(value));
}

bool SplitAssignment::is_partial(NodeId id) const {
    return std::binary_search(partial_ids.begin(), partial_ids.end(), id);
}

const PartialNode* SplitAssignment::find(NodeId id) const {
    const auto it = std::lower_bound(partial_ids.begin(), partial_ids.end(), id);
    if (it == partial_ids.end() || *it != id) return nullptr;
    return &partial[static_cast<std::size_t>(it - partial_ids.begin())];
}

std::vector<NodeId> SplitAssignment::eligible_ids() const {
    std::vector<NodeId> out;
    for (const auto& p : partial) {
        if (!p.excluded) out.push_back(p.id);
    }
    return out;
}

namespace {

void fill_prefixes(const TextAttributedGraph& graph, SplitAssignment& split) {
    split.partial.clear();
    split.excluded_count = 0;
    for (NodeId id : split.partial_ids) {
        PartialNode p;
        p.id = id;
        const auto& text = graph.text(id);
        if (count_words(text) <= split.starting_words) {
            p.excluded = true;
            ++split.excluded_count;
        } else {
            auto parts = split_prefix(text, split.starting_words);
            p.prefix = std::move(parts.prefix);
            p.suffix = std::move(parts.suffix);
        }
        split.partial.push_back(std::move(p));
    }
}

}  // namespace

SplitAssignment split_nodes(const TextAttributedGraph& graph, double partial_fraction,
                            SplitStrategy strategy, std::size_t starting_words,
                            std::uint64_t seed) {
    if (!(partial_fraction > 0.0 && partial_fraction < 1.0)) {
        throw ValidationError("partial_fraction must lie in (0, 1)");
    }
    const std::size_t n = graph.node_count();
    const std::size_t m = fraction_count(partial_fraction, n);

    std::vector<NodeId> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (strategy == SplitStrategy::random) {
        Rng rng(seed);
        rng.shuffle(order);
    } else {
        if (!graph.has_timestamps()) {
            throw ValidationError("time split requires a timestamp on every node");
        }
        std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
            const auto ta = *graph.node(a).timestamp;
            const auto tb = *graph.node(b).timestamp;
            return ta != tb ? ta > tb : a < b;
        });
    }

    SplitAssignment split;
    split.starting_words = starting_words;
    split.partial_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    split.full_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(m), order.end());
    std::sort(split.partial_ids.begin(), split.partial_ids.end());
    std::sort(split.full_ids.begin(), split.full_ids.end());
    fill_prefixes(graph, split);
    return split;
}

SplitAssignment with_starting_words(const TextAttributedGraph& graph,
                                    const SplitAssignment& split, std::size_t starting_words) {
    SplitAssignment out;
    out.full_ids = split.full_ids;
    out.partial_ids = split.partial_ids;
    out.starting_words = starting_words;
    fill_prefixes(graph, out);
    return out;
}

void write_split(const SplitAssignment& split, const std::filesystem::path& path) {
    json partial = json::array();
    for (const auto& p : split.partial) {
        partial.push_back({{"id", p.id}, {"prefix", p.prefix}, {"suffix", p.suffix},
                           {"excluded", p.excluded}});
    }
    const json doc{{"starting_words", split.starting_words},
                   {"full_ids", split.full_ids},
                   {"partial_ids", split.partial_ids},
                   {"excluded_count", split.excluded_count},
                   {"partial", std::move(partial)}};
    auto out = open_output(path);
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

SplitAssignment read_split(const std::filesystem::path& path) {
    auto in = open_input(path);
    json doc;
    try {
        doc = json::parse(in);
        SplitAssignment split;
        split.starting_words = doc.at("starting_words").get<std::size_t>();
        split.full_ids = doc.at("full_ids").get<std::vector<NodeId>>();
        split.partial_ids = doc.at("partial_ids").get<std::vector<NodeId>>();
        split.excluded_count = doc.at("excluded_count").get<std::size_t>();
        for (const auto& p : doc.at("partial")) {
            split.partial.push_back({p.at("id").get<NodeId>(), p.at("prefix").get<std::string>(),
                                     p.at("suffix").get<std::string>(),
                                     p.at("excluded").get<bool>()});
        }
        if (split.partial.size() != split.partial_ids.size()) {
            throw ValidationError("split file " + path.string() + " is inconsistent");
        }
        return split;
    } catch (const json::exception& e) {
        throw ValidationError("malformed split file " + path.string() + ": " + e.what());
    }
}

TextAttributedGraph remove_partial_partial_edges(const TextAttributedGraph& graph,
                                                 const SplitAssignment& split) {
    for (NodeId id : split.partial_ids) {
        if (id >= graph.node_count()) {
            throw ValidationError("split references node " + std::to_string(id) +
                                  " outside the graph");
        }
    }
    std::vector<Edge> kept;
    kept.reserve(graph.edge_count());
    for (const auto& e : graph.edges()) {
        if (!(split.is_partial(e.first) && split.is_partial(e.second))) kept.push_back(e);
    }
    return TextAttributedGraph(graph.nodes(), std::move(kept));
}

// ---------------------------------------------------------------------------
// Sampling

TextAttributedGraph induced_subgraph(const TextAttributedGraph& graph, std::vector<NodeId> keep) {
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    std::vector<NodeId> remap(graph.node_count(), graph.node_count());
    std::vector<NodeAttributes> nodes;
    nodes.reserve(keep.size());
    for (NodeId old : keep) {
        remap[old] = nodes.size();
        nodes.push_back(graph.node(old));
    }
    std::vector<Edge> edges;
    for (auto [a, b] : graph.edges()) {
        if (remap[a] < nodes.size() && remap[b] < nodes.size()) edges.emplace_back(remap[a], remap[b]);
    }
    return TextAttributedGraph(std::move(nodes), std::move(edges));
}

std::vector<NodeId> sample_nodes(const TextAttributedGraph& graph, double seed_fraction,
                                 std::span<const std::size_t> fanouts, std::uint64_t seed) {
    if (!(seed_fraction > 0.0 && seed_fraction <= 1.0)) {
        throw ValidationError("seed_fraction must lie in (0, 1]");
    }
    if (fanouts.empty()) throw ValidationError("fanouts must be non-empty");
    const std::size_t n = graph.node_count();
    Rng rng(seed);
    auto frontier = rng.sample_indices(n, fraction_count(seed_fraction, n));
    std::sort(frontier.begin(), frontier.end());
    std::vector<char> visited(n, 0);
    for (NodeId s : frontier) visited[s] = 1;

    for (std::size_t fanout : fanouts) {
        std::vector<NodeId> next;
        for (NodeId node : frontier) {
            const auto row = graph.neighbors(node);
            for (std::size_t pick : rng.sample_indices(row.size(), fanout)) {
                const NodeId nb = row[pick];
                if (!visited[nb]) {
                    visited[nb] = 1;
                    next.push_back(nb);
                }
            }
        }
        std::sort(next.begin(), next.end());
        frontier = std::move(next);
    }
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (visited[i]) out.push_back(i);
    }
    return out;
}

TextAttributedGraph sample_subgraph(const TextAttributedGraph& graph, double seed_fraction,
                                    std::span<const std::size_t> fanouts, std::uint64_t seed) {
    return induced_subgraph(graph, sample_nodes(graph, seed_fraction, fanouts, seed));
}

std::vector<NodeId> neighbors(const TextAttributedGraph& graph, NodeId node) {
    const auto row = graph.neighbors(node);
    return {row.begin(), row.end()};
}

SparseMatrix normalized_adjacency(const TextAttributedGraph& graph) {
    const auto n = static_cast<Eigen::Index>(graph.node_count());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(2 * graph.edge_count());
    for (NodeId i = 0; i < graph.node_count(); ++i) {
        const auto row = graph.neighbors(i);
        if (row.empty()) continue;
        const double w = 1.0 / static_cast<double>(row.size());
        for (NodeId j : row) {
            triplets.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), w);
        }
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

}  // namespace toporag

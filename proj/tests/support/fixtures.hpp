#pragma once

// Graph builders and seeded generators shared by the unit and acceptance tests.

#include "toporag/graph.hpp"
#include "toporag/random.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <string>
#include <vector>

namespace toporag::testing {

inline TextAttributedGraph make_graph(std::size_t n, const std::vector<Edge>& edges) {
    std::vector<NodeAttributes> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i].source_id = static_cast<std::int64_t>(i);
        nodes[i].text = "node " + std::to_string(i) + " text";
    }
    return TextAttributedGraph(std::move(nodes), edges);
}

inline TextAttributedGraph path_graph(std::size_t n) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return make_graph(n, edges);
}

inline TextAttributedGraph cycle_graph(std::size_t n) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    return make_graph(n, edges);
}

/// Node 0 is the center.
inline TextAttributedGraph star_graph(std::size_t leaves) {
    std::vector<Edge> edges;
    for (std::size_t i = 1; i <= leaves; ++i) edges.emplace_back(0, i);
    return make_graph(leaves + 1, edges);
}

/// Erdos-Renyi G(n, p).
inline TextAttributedGraph random_graph(std::size_t n, double p, Rng& rng) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (rng.uniform() < p) edges.emplace_back(i, j);
        }
    }
    return make_graph(n, edges);
}

/// Two blocks of `per_block` nodes; labels "a" / "b".
inline TextAttributedGraph planted_partition(std::size_t per_block, double p_in, double p_out, Rng& rng) {
    const std::size_t n = 2 * per_block;
    std::vector<NodeAttributes> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i].source_id = static_cast<std::int64_t>(i);
        nodes[i].label = i < per_block ? "a" : "b";
        nodes[i].text = std::string(i < per_block ? "alpha" : "beta") + " node " + std::to_string(i);
    }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool same = (i < per_block) == (j < per_block);
            if (rng.uniform() < (same ? p_in : p_out)) edges.emplace_back(i, j);
        }
    }
    return TextAttributedGraph(std::move(nodes), std::move(edges));
}

struct LatentGraph {
    TextAttributedGraph graph;
    Matrix features;  // block indicator, then ring-angle harmonics
};

/// Two blocks; each node sits at a random angle on its block's ring and links
/// to same-block nodes within `reach` radians with probability p_near. Cross
/// edges appear with probability p_out.
inline LatentGraph latent_ring_graph(std::size_t per_block, double reach, double p_near,
                                     double p_out, std::size_t dim, Rng& rng) {
    const std::size_t n = 2 * per_block;
    std::vector<double> angle(n);
    for (auto& a : angle) a = rng.uniform() * 2.0 * 3.14159265358979323846;
    std::vector<NodeAttributes> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i].source_id = static_cast<std::int64_t>(i);
        nodes[i].label = i < per_block ? "a" : "b";
        nodes[i].text = "node " + std::to_string(i);
    }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool same = (i < per_block) == (j < per_block);
            double gap = std::abs(angle[i] - angle[j]);
            gap = std::min(gap, 2.0 * 3.14159265358979323846 - gap);
            const double p = same ? (gap <= reach ? p_near : 0.0) : p_out;
            if (rng.uniform() < p) edges.emplace_back(i, j);
        }
    }
    Matrix x = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        x(r, i < per_block ? 0 : 1) = 1.0;
        for (Eigen::Index h = 1; 2 * h + 1 < x.cols(); ++h) {
            x(r, 2 * h) = std::cos(static_cast<double>(h) * angle[i]);
            x(r, 2 * h + 1) = std::sin(static_cast<double>(h) * angle[i]);
        }
    }
    return {TextAttributedGraph(std::move(nodes), std::move(edges)), std::move(x)};
}

inline TextAttributedGraph permuted(const TextAttributedGraph& g, const std::vector<NodeId>& perm) {
    std::vector<NodeAttributes> nodes(g.node_count());
    for (NodeId i = 0; i < g.node_count(); ++i) nodes[perm[i]] = g.node(i);
    std::vector<Edge> edges;
    for (auto [a, b] : g.edges()) edges.emplace_back(perm[a], perm[b]);
    return TextAttributedGraph(std::move(nodes), std::move(edges));
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("toporag_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace toporag::testing

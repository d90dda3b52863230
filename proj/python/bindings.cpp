#include "toporag/analysis.hpp"
#include "toporag/cli.hpp"
#include "toporag/embedding.hpp"
#include "toporag/graph.hpp"
#include "toporag/metrics.hpp"
#include "toporag/proximity.hpp"
#include "toporag/retrieval.hpp"
#include "toporag/role.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace toporag;

namespace {

TextAttributedGraph make_graph(const std::vector<std::string>& texts, const std::vector<Edge>& edges) {
    std::vector<NodeAttributes> nodes(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        nodes[i].source_id = static_cast<std::int64_t>(i);
        nodes[i].text = texts[i];
    }
    return TextAttributedGraph(std::move(nodes), edges);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Topology-aware retrieval: embeddings, top-K index, metrics";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<TextAttributedGraph>(m, "Graph")
        .def(py::init(&make_graph), py::arg("texts"), py::arg("edges"))
        .def_property_readonly("node_count", &TextAttributedGraph::node_count)
        .def_property_readonly("edge_count", &TextAttributedGraph::edge_count)
        .def_property_readonly("edges", &TextAttributedGraph::edges)
        .def("text", &TextAttributedGraph::text, py::arg("node"))
        .def("neighbors", [](const TextAttributedGraph& g, NodeId id) {
            const auto span = g.neighbors(id);
            return std::vector<NodeId>(span.begin(), span.end());
        }, py::arg("node"));

    m.def("load_graph", &load_graph, py::arg("nodes_path"), py::arg("edges_path"),
          py::arg("min_text_words") = 0);

    py::class_<EmbeddingMatrix>(m, "Embedding")
        .def_readonly("rows", &EmbeddingMatrix::rows)
        .def_property_readonly("kind", [](const EmbeddingMatrix& e) { return std::string(to_string(e.kind)); })
        .def_readonly("fingerprint", &EmbeddingMatrix::fingerprint)
        .def("__len__", &EmbeddingMatrix::size);

    m.def("proximity_embedding",
          [](const TextAttributedGraph& g, std::size_t depth, std::vector<double> alphas,
             std::size_t projection_dim, std::uint64_t seed) {
              DiffusionConfig cfg;
              cfg.depth = depth;
              cfg.alphas = std::move(alphas);
              cfg.projection_dim = projection_dim;
              cfg.seed = seed;
              return proximity_embedding(g, cfg);
          },
          py::arg("graph"), py::arg("depth") = 3, py::arg("alphas") = std::vector<double>{},
          py::arg("projection_dim") = 128, py::arg("seed") = 0);

    m.def("role_embedding",
          [](const TextAttributedGraph& g, double scale, std::size_t sample_count, double t_max,
             std::size_t eigensolver_cap) {
              WaveConfig cfg;
              cfg.scale = scale;
              cfg.sample_points = WaveConfig::evenly_spaced(0.0, t_max, sample_count);
              cfg.eigensolver_cap = eigensolver_cap;
              return role_embedding(g, cfg);
          },
          py::arg("graph"), py::arg("scale") = 1.0, py::arg("sample_count") = 50, py::arg("t_max") = 100.0,
          py::arg("eigensolver_cap") = 5000);

    m.def("laplacian", &laplacian, py::arg("graph"));
    m.def("heat_wavelets", &heat_wavelets, py::arg("laplacian"), py::arg("scale"),
          py::arg("eigensolver_cap") = 5000);
    m.def("cosine", [](const Vector& u, const Vector& v) { return cosine(u, v); });
    m.def("proximity_similarity", &proximity_similarity);
    m.def("role_distance", &role_distance);

    m.def("build_index",
          [](const EmbeddingMatrix& emb, std::vector<NodeId> pool, std::size_t k) {
              const auto index = build_index(emb, pool, k, 1);
              std::vector<std::vector<std::pair<NodeId, double>>> out(index.size());
              for (std::size_t i = 0; i < index.size(); ++i) {
                  for (const auto& nb : index.entries[i]) out[i].emplace_back(nb.id, nb.score);
              }
              return out;
          },
          py::arg("embedding"), py::arg("pool"), py::arg("k"),
          "Top-k (id, score) per node; ties broken by ascending id.");

    m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); });

    m.def("tokenize", &tokenize);
    m.def("bleu4", &bleu4, py::arg("candidate"), py::arg("reference"));
    m.def("rouge_l", &rouge_l, py::arg("candidate"), py::arg("reference"));

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Run the command-line tool in-process; returns (exit code, stdout, stderr).");
}

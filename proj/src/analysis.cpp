#include "toporag/analysis.hpp"
#include "toporag/random.hpp"
#include "toporag/role.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace toporag {

std::string PairSelection::label() const {
    switch (kind) {
        case PairSelectionKind::all_ordered: return "all_ordered";
        case PairSelectionKind::all_unordered_no_self: return "all_unordered_no_self";
        case PairSelectionKind::sampled:
            return "sampled(" + std::to_string(count) + "," + std::to_string(seed) + ")";
    }
    return "unknown";
}

TopoScore default_topo_score(EmbeddingKind kind) {
    return kind == EmbeddingKind::role ? TopoScore::l2_distance : TopoScore::cosine;
}

std::string_view to_string(TopoScore score) {
    switch (score) {
        case TopoScore::cosine: return "cosine_similarity";
        case TopoScore::l2_distance: return "l2_distance";
        case TopoScore::inverse_distance: return "inverse_l2_distance";
    }
    return "unknown";
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("pearson: sequences differ in length");
    if (x.size() < 2) throw ValidationError("pearson: need at least two pairs");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw UndefinedCorrelation("pearson: correlation undefined for a constant sequence");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson(const PairSample& sample) { return pearson(sample.text_scores, sample.topo_scores); }

std::size_t pair_count(const PairSelection& selection, std::size_t n) {
    switch (selection.kind) {
        case PairSelectionKind::all_ordered: return n * n;
        case PairSelectionKind::all_unordered_no_self: return n < 2 ? 0 : n * (n - 1) / 2;
        case PairSelectionKind::sampled: return selection.count;
    }
    return 0;
}

std::pair<NodeId, NodeId> unordered_pair_at(std::size_t index, std::size_t n) {
    // Row i starts at i*(2n - i - 1)/2. Invariant: row_start(lo) <= index < row_start(hi).
    auto row_start = [n](std::size_t i) { return i * (2 * n - i - 1) / 2; };
    std::size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (row_start(mid) <= index) lo = mid; else hi = mid;
    }
    return {lo, lo + 1 + (index - row_start(lo))};
}

std::vector<std::pair<NodeId, NodeId>> select_pairs(const PairSelection& selection, std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> pairs;
    switch (selection.kind) {
        case PairSelectionKind::all_ordered:
            pairs.reserve(n * n);
            for (NodeId i = 0; i < n; ++i)
                for (NodeId j = 0; j < n; ++j) pairs.emplace_back(i, j);
            break;
        case PairSelectionKind::all_unordered_no_self:
            pairs.reserve(n < 2 ? 0 : n * (n - 1) / 2);
            for (NodeId i = 0; i < n; ++i)
                for (NodeId j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
            break;
        case PairSelectionKind::sampled: {
            const std::size_t available = n < 2 ? 0 : n * (n - 1) / 2;
            if (selection.count > available) {
                throw ValidationError("requested " + std::to_string(selection.count) + " pairs but only " +
                                      std::to_string(available) + " unordered pairs exist");
            }
            Rng rng(selection.seed);
            auto picks = rng.sample_indices(available, selection.count);
            std::sort(picks.begin(), picks.end());
            pairs.reserve(picks.size());
            for (std::size_t p : picks) pairs.push_back(unordered_pair_at(p, n));
            break;
        }
    }
    return pairs;
}

PairSample pairwise_scores(const TextAttributedGraph& graph, const EmbeddingMatrix& text_emb,
                           const EmbeddingMatrix& topo_emb, const PairSelection& selection,
                           std::optional<TopoScore> topo_score) {
    const std::size_t n = graph.node_count();
    if (text_emb.size() != n || topo_emb.size() != n) {
        throw ValidationError("embedding row counts (" + std::to_string(text_emb.size()) + ", " +
                              std::to_string(topo_emb.size()) + ") do not match the graph (" +
                              std::to_string(n) + ")");
    }
    const TopoScore score = topo_score.value_or(default_topo_score(topo_emb.kind));
    PairSample sample;
    sample.selection = selection.label();
    sample.pairs = select_pairs(selection, n);
    sample.text_scores.resize(sample.pairs.size());
    sample.topo_scores.resize(sample.pairs.size());

    auto norms = [](const Matrix& m) {
        Vector out(m.rows());
        for (Eigen::Index i = 0; i < m.rows(); ++i) out(i) = m.row(i).norm();
        return out;
    };
    const Vector text_norm = norms(text_emb.rows);
    const Vector topo_norm = norms(topo_emb.rows);
    auto cos = [](const Matrix& m, const Vector& nrm, NodeId i, NodeId j) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        if (nrm(a) == 0.0 || nrm(b) == 0.0) return 0.0;
        return m.row(a).dot(m.row(b)) / (nrm(a) * nrm(b));
    };
    for (std::size_t k = 0; k < sample.pairs.size(); ++k) {
        const auto [i, j] = sample.pairs[k];
        sample.text_scores[k] = cos(text_emb.rows, text_norm, i, j);
        switch (score) {
            case TopoScore::cosine:
                sample.topo_scores[k] = cos(topo_emb.rows, topo_norm, i, j);
                break;
            case TopoScore::l2_distance:
                sample.topo_scores[k] = (topo_emb.rows.row(static_cast<Eigen::Index>(i)) -
                                         topo_emb.rows.row(static_cast<Eigen::Index>(j))).norm();
                break;
            case TopoScore::inverse_distance:
                sample.topo_scores[k] = 1.0 / (1e-6 + (topo_emb.rows.row(static_cast<Eigen::Index>(i)) -
                                                       topo_emb.rows.row(static_cast<Eigen::Index>(j))).norm());
                break;
        }
    }
    return sample;
}

BinnedCurve binned_curve(const PairSample& sample, std::span<const double> edges) {
    if (edges.size() < 2) throw ValidationError("binned_curve needs at least two bin edges");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) throw ValidationError("bin edges must be strictly increasing");
    }
    const std::size_t nbins = edges.size() - 1;
    std::vector<double> sum(nbins, 0.0);
    std::vector<std::vector<double>> members(nbins);
    BinnedCurve curve;
    for (std::size_t k = 0; k < sample.size(); ++k) {
        const double x = sample.topo_scores[k];
        if (x < edges.front() || x > edges.back()) {
            ++curve.out_of_range;
            continue;
        }
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
        if (bin >= nbins) bin = nbins - 1;  // x == last edge
        members[bin].push_back(sample.text_scores[k]);
    }
    for (std::size_t b = 0; b < nbins; ++b) {
        CurveBin out;
        out.lo = edges[b];
        out.hi = edges[b + 1];
        out.count = members[b].size();
        if (out.count > 0) {
            double mean = 0.0;
            for (double v : members[b]) mean += v;
            mean /= static_cast<double>(out.count);
            out.mean = mean;
            if (out.count > 1) {
                double ss = 0.0;
                for (double v : members[b]) ss += (v - mean) * (v - mean);
                const double sd = std::sqrt(ss / static_cast<double>(out.count - 1));
                out.stderr_mean = sd / std::sqrt(static_cast<double>(out.count));
            }
        }
        curve.bins.push_back(out);
    }
    return curve;
}

GroupMatrix group_mean_matrix(std::span<const std::string> groups,
                              const std::function<double(NodeId, NodeId)>& score) {
    std::map<std::string, std::vector<NodeId>> members;
    for (NodeId i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
    if (members.size() < 2) throw ValidationError("group_mean_matrix needs at least two groups");
    GroupMatrix out;
    for (const auto& [label, ids] : members) out.labels.push_back(label);
    const std::size_t g = out.labels.size();
    out.values.assign(g, std::vector<std::optional<double>>(g));
    std::size_t gi = 0;
    for (const auto& [la, ia] : members) {
        std::size_t gj = 0;
        for (const auto& [lb, ib] : members) {
            double sum = 0.0;
            std::size_t count = 0;
            for (NodeId i : ia) {
                for (NodeId j : ib) {
                    if (i == j) continue;
                    sum += score(i, j);
                    ++count;
                }
            }
            if (count > 0) out.values[gi][gj] = sum / static_cast<double>(count);
            ++gj;
        }
        ++gi;
    }
    return out;
}

std::vector<double> layer_sweep(const TextAttributedGraph& graph, const EmbeddingMatrix& text_emb,
                                std::size_t max_depth, const DiffusionConfig& config,
                                const PairSelection& selection) {
    if (max_depth < 1) throw ValidationError("layer_sweep needs max_depth >= 1");
    std::vector<double> out;
    out.reserve(max_depth);
    for (std::size_t k = 1; k <= max_depth; ++k) {
        DiffusionConfig c = config;
        c.depth = k;
        c.alphas.clear();
        const auto topo = proximity_embedding(graph, c);
        out.push_back(pearson(pairwise_scores(graph, text_emb, topo, selection)));
    }
    return out;
}

nlohmann::json analysis_report(double r, const PairSample& sample, std::string_view topo_axis,
                               const BinnedCurve* curve, const GroupMatrix* groups) {
    nlohmann::json doc;
    doc["pearson"] = r;
    doc["pair_selection"] = sample.selection;
    doc["pairs"] = sample.size();
    doc["axes"] = {{"x", std::string(topo_axis)}, {"y", "text_cosine_similarity"}};
    nlohmann::json bins = nlohmann::json::array();
    if (curve) {
        for (const auto& b : curve->bins) {
            bins.push_back({{"lo", b.lo},
                            {"hi", b.hi},
                            {"mean", b.mean ? nlohmann::json(*b.mean) : nlohmann::json(nullptr)},
                            {"count", b.count},
                            {"stderr", b.stderr_mean}});
        }
        doc["out_of_range"] = curve->out_of_range;
    }
    doc["bins"] = std::move(bins);
    if (groups) {
        nlohmann::json values = nlohmann::json::array();
        for (const auto& row : groups->values) {
            nlohmann::json r_json = nlohmann::json::array();
            for (const auto& v : row) r_json.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
            values.push_back(std::move(r_json));
        }
        doc["group_matrix"] = {{"labels", groups->labels}, {"values", std::move(values)}};
    } else {
        doc["group_matrix"] = nullptr;
    }
    return doc;
}

}  // namespace toporag

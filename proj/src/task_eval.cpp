#include "toporag/task_eval.hpp"
#include "toporag/metrics.hpp"
#include "toporag/random.hpp"
#include "toporag/text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

namespace toporag {

std::string_view to_string(ModelKind m) {
    return m == ModelKind::mlp ? "mlp" : "propagated_mlp";
}

ModelKind parse_model(std::string_view name) {
    if (name == "mlp") return ModelKind::mlp;
    if (name == "propagated_mlp") return ModelKind::propagated_mlp;
    throw ValidationError("unknown model \"" + std::string(name) + "\"");
}

TaskEvalConfig TaskEvalConfig::node_classification() { return {}; }

TaskEvalConfig TaskEvalConfig::link_prediction() {
    TaskEvalConfig c;
    c.task = TaskKind::link_prediction;
    c.model = ModelKind::propagated_mlp;
    c.learning_rate = 0.001;
    c.weight_decay = 0.0;
    c.hidden = 256;
    c.dropout = 0.0;
    c.epochs = 200;
    c.patience = 50;
    return c;
}

void TaskEvalConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be non-negative");
    if (patience < 1) throw ValidationError("patience must be positive");
    if (hidden < 1) throw ValidationError("hidden width must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
    if (layers != 2) throw ValidationError("only two-layer perceptrons are supported");
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    if (!(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction < 1.0)) {
        throw ValidationError("train and validation fractions must be positive and sum below 1");
    }
    if (task == TaskKind::link_prediction && eval_negatives < 100) {
        throw ValidationError("link prediction needs at least 100 evaluation negatives");
    }
}

RunSummary summarize(std::vector<double> values) {
    RunSummary s;
    s.values = std::move(values);
    if (s.values.empty()) return s;
    const auto n = static_cast<double>(s.values.size());
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    if (s.values.size() > 1) {
        double ss = 0.0;
        for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

Matrix propagate_features(const TextAttributedGraph& graph, const Matrix& features, std::size_t hops) {
    if (static_cast<std::size_t>(features.rows()) != graph.node_count()) {
        throw ValidationError("feature rows do not match the node count");
    }
    const SparseMatrix adj = normalized_adjacency(graph);
    Matrix out = features;
    for (std::size_t h = 0; h < hops; ++h) out = adj * out;
    return out;
}

std::vector<std::optional<std::string>> graph_labels(const TextAttributedGraph& graph) {
    std::vector<std::optional<std::string>> out;
    out.reserve(graph.node_count());
    for (const auto& n : graph.nodes()) out.push_back(n.label);
    return out;
}

namespace {

using RowVec = Eigen::RowVectorXd;

template <typename M>
struct AdamSlot {
    M m, v;
};

class Optimizer {
public:
    Optimizer(const TaskEvalConfig& c, const MlpParams& p) : cfg_(c) {
        init(w1_, p.w1);
        init(b1_, p.b1);
        init(w2_, p.w2);
        init(b2_, p.b2);
    }

    void step(MlpParams& p, MlpParams& g) {
        ++t_;
        // L2 weight decay on the weight matrices, added to the gradient.
        g.w1 += cfg_.weight_decay * p.w1;
        g.w2 += cfg_.weight_decay * p.w2;
        update(p.w1, g.w1, w1_);
        update(p.b1, g.b1, b1_);
        update(p.w2, g.w2, w2_);
        update(p.b2, g.b2, b2_);
    }

private:
    template <typename M>
    static void init(AdamSlot<M>& s, const M& like) {
        s.m = M::Zero(like.rows(), like.cols());
        s.v = M::Zero(like.rows(), like.cols());
    }

    template <typename M>
    void update(M& param, const M& grad, AdamSlot<M>& s) {
        if (cfg_.optimizer == OptimizerKind::sgd) {
            param -= cfg_.learning_rate * grad;
            return;
        }
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        s.m = b1 * s.m + (1.0 - b1) * grad;
        s.v = b2 * s.v + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        param.array() -= cfg_.learning_rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
    }

    const TaskEvalConfig& cfg_;
    AdamSlot<Matrix> w1_, w2_;
    AdamSlot<RowVec> b1_, b2_;
    std::size_t t_ = 0;
};

Matrix glorot(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    }
    return w;
}

MlpParams init_mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
    MlpParams p;
    p.w1 = glorot(in, hidden, rng);
    p.b1 = RowVec::Zero(static_cast<Eigen::Index>(hidden));
    p.w2 = glorot(hidden, out, rng);
    p.b2 = RowVec::Zero(static_cast<Eigen::Index>(out));
    return p;
}

struct Forward {
    Matrix pre;     // X W1 + b1
    Matrix hidden;  // relu(pre) after dropout
    Matrix mask;    // dropout scale per hidden unit (empty when off)
    Matrix out;
};

Forward forward(const MlpParams& p, const Matrix& x, double dropout, Rng* rng) {
    Forward f;
    f.pre = (x * p.w1).rowwise() + p.b1;
    f.hidden = f.pre.cwiseMax(0.0);
    if (rng && dropout > 0.0) {
        f.mask.resize(f.hidden.rows(), f.hidden.cols());
        const double keep = 1.0 - dropout;
        for (Eigen::Index i = 0; i < f.mask.rows(); ++i) {
            for (Eigen::Index j = 0; j < f.mask.cols(); ++j) f.mask(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
        }
        f.hidden = f.hidden.cwiseProduct(f.mask);
    }
    f.out = (f.hidden * p.w2).rowwise() + p.b2;
    return f;
}

/// Gradients of the parameters given d(loss)/d(out).
MlpParams backward(const MlpParams& p, const Matrix& x, const Forward& f, const Matrix& dout) {
    MlpParams g;
    g.w2 = f.hidden.transpose() * dout;
    g.b2 = dout.colwise().sum();
    Matrix dh = dout * p.w2.transpose();
    if (f.mask.size()) dh = dh.cwiseProduct(f.mask);
    dh = dh.cwiseProduct((f.pre.array() > 0.0).cast<double>().matrix());
    g.w1 = x.transpose() * dh;
    g.b1 = dh.colwise().sum();
    return g;
}

Matrix gather_rows(const Matrix& m, const std::vector<NodeId>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

double accuracy(const Matrix& logits, const std::vector<NodeId>& nodes, const std::vector<int>& y) {
    if (nodes.empty()) return 0.0;
    std::size_t correct = 0;
    for (NodeId n : nodes) {
        Eigen::Index arg = 0;
        logits.row(static_cast<Eigen::Index>(n)).maxCoeff(&arg);
        if (arg == y[n]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

}  // namespace

RunSummary train_node_classifier(const Matrix& features, const TextAttributedGraph& graph,
                                 const std::vector<std::optional<std::string>>& labels,
                                 const TaskEvalConfig& config, const std::optional<std::vector<NodeId>>& test_nodes,
                                 const EpochHook& on_epoch) {
    config.validate();
    const std::size_t n = graph.node_count();
    if (static_cast<std::size_t>(features.rows()) != n || labels.size() != n) {
        throw ValidationError("features and labels must have one row per node");
    }
    if (!features.allFinite()) throw ValidationError("features contain non-finite values");

    std::map<std::string, int> classes;
    for (const auto& l : labels) {
        if (l) classes.emplace(*l, 0);
    }
    if (classes.size() < 2) throw ValidationError("node classification needs at least two classes");
    int next_class = 0;
    for (auto& [name, idx] : classes) idx = next_class++;
    std::vector<int> y(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i]) y[i] = classes.at(*labels[i]);
    }

    const Matrix x = config.model == ModelKind::propagated_mlp ? propagate_features(graph, features) : features;

    std::vector<double> accs;
    for (std::uint64_t seed : config.seeds) {
        Rng split_rng(derive_seed(seed, "nc-split"));
        std::vector<NodeId> test, rest;
        std::vector<bool> is_test(n, false);
        if (test_nodes) {
            for (NodeId t : *test_nodes) {
                if (t >= n) throw ValidationError("test node out of range");
                if (y[t] >= 0 && !is_test[t]) {
                    is_test[t] = true;
                    test.push_back(t);
                }
            }
        }
        for (NodeId i = 0; i < n; ++i) {
            if (y[i] >= 0 && !is_test[i]) rest.push_back(i);
        }
        split_rng.shuffle(rest);
        std::vector<NodeId> train, val;
        if (test_nodes) {
            const double share = config.train_fraction / (config.train_fraction + config.val_fraction);
            const auto n_train = fraction_count(share, rest.size());
            train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
            val.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());
        } else {
            const auto n_train = fraction_count(config.train_fraction, rest.size());
            const auto n_val = std::min(fraction_count(config.val_fraction, rest.size()), rest.size() - n_train);
            train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
            val.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train),
                       rest.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
            test.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), rest.end());
        }
        std::sort(train.begin(), train.end());
        std::sort(val.begin(), val.end());
        std::sort(test.begin(), test.end());
        if (test.empty()) throw ValidationError("node classification has no test nodes");
        std::vector<bool> seen(classes.size(), false);
        for (NodeId t : train) seen[static_cast<std::size_t>(y[t])] = true;
        for (const auto& [name, idx] : classes) {
            if (!seen[static_cast<std::size_t>(idx)]) {
                throw ValidationError("class \"" + name + "\" has no training examples");
            }
        }

        Rng rng(derive_seed(seed, "nc-train"));
        MlpParams params = init_mlp(static_cast<std::size_t>(x.cols()), config.hidden, classes.size(), rng);
        Optimizer opt(config, params);
        const Matrix x_train = gather_rows(x, train);
        Matrix onehot = Matrix::Zero(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(classes.size()));
        for (std::size_t r = 0; r < train.size(); ++r) onehot(static_cast<Eigen::Index>(r), y[train[r]]) = 1.0;

        double best_val = -1.0, test_at_best = 0.0;
        std::size_t since_best = 0;
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            const Forward f = forward(params, x_train, config.dropout, &rng);
            Matrix probs = f.out;
            for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                const double mx = probs.row(r).maxCoeff();
                probs.row(r) = (probs.row(r).array() - mx).exp().matrix();
                probs.row(r) /= probs.row(r).sum();
            }
            const Matrix dout = (probs - onehot) / static_cast<double>(train.size());
            MlpParams grad = backward(params, x_train, f, dout);
            opt.step(params, grad);
            if (on_epoch) on_epoch(epoch, params);

            const Matrix logits = forward(params, x, 0.0, nullptr).out;
            const double val_acc = val.empty() ? accuracy(logits, train, y) : accuracy(logits, val, y);
            if (val_acc > best_val) {
                best_val = val_acc;
                test_at_best = accuracy(logits, test, y);
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        }
        accs.push_back(test_at_best);
    }
    return summarize(std::move(accs));
}

double hits_at_k(std::span<const double> positive, std::span<const double> negative, std::size_t k) {
    if (k < 1) throw ValidationError("k must be positive");
    if (negative.size() < k) {
        throw ValidationError("Hits@" + std::to_string(k) + " needs at least " + std::to_string(k) +
                              " negatives, got " + std::to_string(negative.size()));
    }
    if (positive.empty()) return 0.0;
    std::vector<double> neg(negative.begin(), negative.end());
    std::nth_element(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k - 1), neg.end(), std::greater<>());
    const double threshold = neg[k - 1];
    const auto hits = std::count_if(positive.begin(), positive.end(), [threshold](double s) { return s > threshold; });
    return static_cast<double>(hits) / static_cast<double>(positive.size());
}

EdgeSplit split_edges(const TextAttributedGraph& graph, std::uint64_t seed) {
    std::vector<Edge> edges = graph.edges();
    Rng rng(derive_seed(seed, "lp-split"));
    rng.shuffle(edges);
    const std::size_t m = edges.size();
    const std::size_t n_train = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(m) + 1e-9));
    const std::size_t n_valid = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(m) + 1e-9));
    EdgeSplit s;
    s.train.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.valid.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train),
                   edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    s.test.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), edges.end());
    return s;
}

std::vector<Edge> sample_negative_edges(const TextAttributedGraph& graph, std::size_t count, std::uint64_t seed) {
    const std::size_t n = graph.node_count();
    const std::size_t all_pairs = n < 2 ? 0 : n * (n - 1) / 2;
    const std::size_t available = all_pairs - graph.edge_count();
    std::vector<Edge> out;
    Rng rng(seed);
    if (available <= 2 * count) {
        // Enumerate all non-edges, then take a seeded subset.
        std::vector<Edge> non_edges;
        for (NodeId u = 0; u < n; ++u) {
            for (NodeId v = u + 1; v < n; ++v) {
                if (!graph.has_edge(u, v)) non_edges.emplace_back(u, v);
            }
        }
        if (non_edges.size() <= count) return non_edges;
        for (std::size_t pick : rng.sample_indices(non_edges.size(), count)) out.push_back(non_edges[pick]);
        std::sort(out.begin(), out.end());
        return out;
    }
    std::set<Edge> chosen;
    while (chosen.size() < count) {
        NodeId u = rng.below(n), v = rng.below(n);
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        if (graph.has_edge(u, v)) continue;
        chosen.emplace(u, v);
    }
    return {chosen.begin(), chosen.end()};
}

namespace {

std::vector<double> edge_scores(const Matrix& z, const std::vector<Edge>& edges) {
    std::vector<double> s;
    s.reserve(edges.size());
    for (const auto& [u, v] : edges) {
        s.push_back(z.row(static_cast<Eigen::Index>(u)).dot(z.row(static_cast<Eigen::Index>(v))));
    }
    return s;
}

}  // namespace

RunSummary link_prediction_eval(const Matrix& features, const TextAttributedGraph& graph,
                                const TaskEvalConfig& config) {
    config.validate();
    const std::size_t n = graph.node_count();
    if (static_cast<std::size_t>(features.rows()) != n) throw ValidationError("feature rows do not match the node count");
    if (!features.allFinite()) throw ValidationError("features contain non-finite values");

    std::vector<double> hits;
    bool saturated = false;
    for (std::uint64_t seed : config.seeds) {
        const EdgeSplit split = split_edges(graph, seed);
        if (split.train.empty() || split.test.empty()) throw ValidationError("too few edges for a 70/10/20 split");
        if (split.test.size() < 200) saturated = true;
        const auto eval_neg = sample_negative_edges(graph, config.eval_negatives, derive_seed(seed, "lp-eval-neg"));
        if (eval_neg.size() < 100) throw ValidationError("fewer than 100 evaluation negatives are available");

        // Message passing sees training edges only.
        std::vector<NodeAttributes> attrs(n);
        for (std::size_t i = 0; i < n; ++i) {
            attrs[i].source_id = static_cast<std::int64_t>(i);
            attrs[i].text_missing = true;
        }
        const TextAttributedGraph train_graph(std::move(attrs), split.train);
        const Matrix x =
            config.model == ModelKind::propagated_mlp ? propagate_features(train_graph, features) : features;

        Rng rng(derive_seed(seed, "lp-train"));
        MlpParams params = init_mlp(static_cast<std::size_t>(x.cols()), config.hidden, config.hidden, rng);
        Optimizer opt(config, params);

        double best_val = -1.0, test_at_best = 0.0;
        std::size_t since_best = 0;
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            std::vector<Edge> batch = split.train;
            std::vector<double> target(batch.size(), 1.0);
            for (std::size_t i = 0; i < split.train.size(); ++i) {
                NodeId u = rng.below(n), v = rng.below(n);
                batch.emplace_back(u, v);
                target.push_back(0.0);
            }
            const Forward f = forward(params, x, config.dropout, &rng);
            Matrix dz = Matrix::Zero(f.out.rows(), f.out.cols());
            const double scale = 1.0 / static_cast<double>(batch.size());
            for (std::size_t e = 0; e < batch.size(); ++e) {
                const auto u = static_cast<Eigen::Index>(batch[e].first);
                const auto v = static_cast<Eigen::Index>(batch[e].second);
                const double s = f.out.row(u).dot(f.out.row(v));
                const double g = (1.0 / (1.0 + std::exp(-s)) - target[e]) * scale;
                dz.row(u) += g * f.out.row(v);
                dz.row(v) += g * f.out.row(u);
            }
            MlpParams grad = backward(params, x, f, dz);
            opt.step(params, grad);

            const Matrix z = forward(params, x, 0.0, nullptr).out;
            const auto neg = edge_scores(z, eval_neg);
            const double val = split.valid.empty() ? 0.0 : hits_at_k(edge_scores(z, split.valid), neg);
            if (val > best_val) {
                best_val = val;
                test_at_best = hits_at_k(edge_scores(z, split.test), neg);
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        }
        hits.push_back(test_at_best);
    }
    auto summary = summarize(std::move(hits));
    summary.saturated = saturated;
    return summary;
}

std::string_view to_string(ImputeStrategy s) {
    switch (s) {
        case ImputeStrategy::zero: return "zero";
        case ImputeStrategy::random: return "random";
        case ImputeStrategy::global_mean: return "global_mean";
        case ImputeStrategy::toporag_text: return "toporag_text";
    }
    return "unknown";
}

ImputeStrategy parse_impute_strategy(std::string_view name) {
    if (name == "zero") return ImputeStrategy::zero;
    if (name == "random") return ImputeStrategy::random;
    if (name == "global_mean") return ImputeStrategy::global_mean;
    if (name == "toporag_text" || name == "toporag") return ImputeStrategy::toporag_text;
    throw ValidationError("unknown imputation strategy \"" + std::string(name) + "\"");
}

Matrix impute_features(const Matrix& features, const std::vector<bool>& missing, ImputeStrategy strategy,
                       const ImputeExtras& extras) {
    if (missing.size() != static_cast<std::size_t>(features.rows())) {
        throw ValidationError("missing mask must have one entry per feature row");
    }
    Matrix out = features;
    std::vector<NodeId> missing_ids;
    for (std::size_t i = 0; i < missing.size(); ++i) {
        if (missing[i]) missing_ids.push_back(i);
    }
    if (missing_ids.empty()) return out;

    switch (strategy) {
        case ImputeStrategy::zero:
            for (NodeId i : missing_ids) out.row(static_cast<Eigen::Index>(i)).setZero();
            break;
        case ImputeStrategy::random: {
            Rng rng(derive_seed(extras.seed, "impute-random"));
            for (NodeId i : missing_ids) {
                for (Eigen::Index j = 0; j < out.cols(); ++j) out(static_cast<Eigen::Index>(i), j) = rng.normal();
            }
            break;
        }
        case ImputeStrategy::global_mean: {
            RowVec mean = RowVec::Zero(features.cols());
            std::size_t observed = 0;
            for (std::size_t i = 0; i < missing.size(); ++i) {
                if (!missing[i]) {
                    mean += features.row(static_cast<Eigen::Index>(i));
                    ++observed;
                }
            }
            if (observed) mean /= static_cast<double>(observed);
            for (NodeId i : missing_ids) out.row(static_cast<Eigen::Index>(i)) = mean;
            break;
        }
        case ImputeStrategy::toporag_text: {
            if (!extras.generated || !extras.provider) {
                throw ValidationError("toporag_text imputation needs generated texts and a provider");
            }
            std::vector<std::string> texts;
            for (NodeId i : missing_ids) {
                const auto it = extras.generated->find(i);
                if (it == extras.generated->end()) {
                    throw ValidationError("no generated text for missing node " + std::to_string(i));
                }
                texts.push_back(it->second);
            }
            const Matrix emb = embed_texts(*extras.provider, texts).rows;
            if (emb.cols() != features.cols()) {
                throw ValidationError("generated-text embeddings have dimension " + std::to_string(emb.cols()) +
                                      " but features have " + std::to_string(features.cols()));
            }
            for (std::size_t r = 0; r < missing_ids.size(); ++r) {
                out.row(static_cast<Eigen::Index>(missing_ids[r])) = emb.row(static_cast<Eigen::Index>(r));
            }
            break;
        }
    }
    return out;
}

std::map<NodeId, std::string> generated_texts(const std::vector<GenerationRecord>& records) {
    std::map<NodeId, std::string> out;
    for (const auto& r : records) {
        if (r.excluded || !r.output) continue;
        out[r.target] = join_prefix_suffix(r.prefix, strip_observed_prefix(*r.output, r.prefix));
    }
    return out;
}

}  // namespace toporag

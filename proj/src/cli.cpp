#include "toporag/cli.hpp"

#include "toporag/analysis.hpp"
#include "toporag/generation.hpp"
#include "toporag/graph.hpp"
#include "toporag/metrics.hpp"
#include "toporag/proximity.hpp"
#include "toporag/retrieval.hpp"
#include "toporag/role.hpp"
#include "toporag/task_eval.hpp"
#include "toporag/text_embed.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace toporag {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
    fs::path base_dir = ".";
    std::optional<std::uint64_t> seed;
    std::string dataset = "custom";
    fs::path nodes, edges;
    std::size_t min_text_words = 0;

    double partial_fraction = 0.2;
    SplitStrategy split_strategy = SplitStrategy::random;
    std::size_t starting_words = 3;
    bool remove_partial_edges = true;
    std::optional<double> sample_seed_fraction;
    std::vector<std::size_t> fanouts;

    DiffusionConfig diffusion;
    WaveConfig wave;
    EmbeddingProviderSpec provider;
    GenerationBackendSpec backend;

    std::size_t index_k = 64;
    EmbeddingKind index_kind = EmbeddingKind::proximity;

    std::vector<RetrievalStrategy> strategies{RetrievalStrategy::none, RetrievalStrategy::random,
                                              RetrievalStrategy::text, RetrievalStrategy::topo};
    std::size_t retrieve_k = 3;
    std::vector<std::size_t> rank_offsets{0};
    std::vector<std::size_t> starting_words_grid;  // empty: just starting_words
    std::optional<std::size_t> sample_size;
    std::optional<std::size_t> word_budget;
    std::size_t limit_tokens = 4096;

    PairSelection pairs;
    std::size_t bins = 10;
    std::size_t layer_sweep = 0;

    TaskEvalConfig nc = TaskEvalConfig::node_classification();
    TaskEvalConfig lp = TaskEvalConfig::link_prediction();
    std::vector<ImputeStrategy> impute{ImputeStrategy::zero, ImputeStrategy::random, ImputeStrategy::global_mean,
                                       ImputeStrategy::toporag_text};

    fs::path out;

    std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(*seed, stage); }
    std::size_t budget() const {
        if (word_budget) return *word_budget;
        try {
            return default_word_budget(dataset);
        } catch (const ValidationError&) {
            return 150;
        }
    }
};

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const json& doc, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

template <typename T>
void take(const json& obj, const char* key, T& into) {
    if (obj.contains(key) && !obj[key].is_null()) into = obj[key].get<T>();
}

template <typename T>
void take(const json& obj, const char* key, std::optional<T>& into) {
    if (obj.contains(key) && !obj[key].is_null()) into = obj[key].get<T>();
}

void check_keys(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ValidationError("config section \"" + std::string(section) + "\" must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError("unknown config key \"" + std::string(section) + "." + key + "\"");
        }
    }
}

SplitStrategy parse_split_strategy(std::string_view s) {
    if (s == "random") return SplitStrategy::random;
    if (s == "time") return SplitStrategy::time;
    throw ValidationError("unknown split strategy \"" + std::string(s) + "\"");
}

PairSelectionKind parse_pair_kind(std::string_view s) {
    if (s == "all_ordered") return PairSelectionKind::all_ordered;
    if (s == "all_unordered_no_self") return PairSelectionKind::all_unordered_no_self;
    if (s == "sampled") return PairSelectionKind::sampled;
    throw ValidationError("unknown pair selection \"" + std::string(s) + "\"");
}

TextSelection parse_text_selection(std::string_view s) {
    if (s == "primary") return TextSelection::primary;
    if (s == "all") return TextSelection::all;
    if (s == "sent") return TextSelection::sent;
    if (s == "received") return TextSelection::received;
    throw ValidationError("unknown text selection \"" + std::string(s) + "\"");
}

EmbeddingKind parse_kind_arg(std::string_view s) {
    if (s == "topo-proximity") return EmbeddingKind::proximity;
    if (s == "topo-role") return EmbeddingKind::role;
    return parse_embedding_kind(s);
}

void parse_task(const json& obj, std::string_view name, TaskEvalConfig& c) {
    check_keys(obj, name, {"model", "optimizer", "epochs", "learning_rate", "weight_decay", "patience", "hidden",
                           "dropout", "eval_negatives", "seeds", "train_fraction", "val_fraction"});
    if (obj.contains("model")) c.model = parse_model(obj["model"].get<std::string>());
    if (obj.contains("optimizer")) {
        const auto o = obj["optimizer"].get<std::string>();
        if (o == "adam") c.optimizer = OptimizerKind::adam;
        else if (o == "sgd") c.optimizer = OptimizerKind::sgd;
        else throw ValidationError("unknown optimizer \"" + o + "\"");
    }
    take(obj, "epochs", c.epochs);
    take(obj, "learning_rate", c.learning_rate);
    take(obj, "weight_decay", c.weight_decay);
    take(obj, "patience", c.patience);
    take(obj, "hidden", c.hidden);
    take(obj, "dropout", c.dropout);
    take(obj, "eval_negatives", c.eval_negatives);
    take(obj, "seeds", c.seeds);
    take(obj, "train_fraction", c.train_fraction);
    take(obj, "val_fraction", c.val_fraction);
}

void parse_config(const json& doc, RunConfig& cfg) {
    check_keys(doc, "", {"seed", "dataset", "split", "sampling", "diffusion", "wave", "embedding", "generation",
                         "index", "retrieval", "experiment", "correlate", "node_classification",
                         "link_prediction", "impute", "out"});
    take(doc, "seed", cfg.seed);
    if (doc.contains("dataset")) {
        const auto& d = doc["dataset"];
        check_keys(d, "dataset", {"name", "nodes", "edges", "min_text_words"});
        take(d, "name", cfg.dataset);
        if (d.contains("nodes")) cfg.nodes = cfg.base_dir / d["nodes"].get<std::string>();
        if (d.contains("edges")) cfg.edges = cfg.base_dir / d["edges"].get<std::string>();
        take(d, "min_text_words", cfg.min_text_words);
    }
    if (doc.contains("split")) {
        const auto& s = doc["split"];
        check_keys(s, "split", {"partial_fraction", "strategy", "starting_words", "remove_partial_edges"});
        take(s, "partial_fraction", cfg.partial_fraction);
        if (s.contains("strategy")) cfg.split_strategy = parse_split_strategy(s["strategy"].get<std::string>());
        take(s, "starting_words", cfg.starting_words);
        take(s, "remove_partial_edges", cfg.remove_partial_edges);
    }
    if (doc.contains("sampling")) {
        const auto& s = doc["sampling"];
        check_keys(s, "sampling", {"seed_fraction", "fanouts"});
        take(s, "seed_fraction", cfg.sample_seed_fraction);
        take(s, "fanouts", cfg.fanouts);
    }
    if (doc.contains("diffusion")) {
        const auto& s = doc["diffusion"];
        check_keys(s, "diffusion", {"depth", "alphas", "projection_dim"});
        take(s, "depth", cfg.diffusion.depth);
        take(s, "alphas", cfg.diffusion.alphas);
        take(s, "projection_dim", cfg.diffusion.projection_dim);
    }
    if (doc.contains("wave")) {
        const auto& s = doc["wave"];
        check_keys(s, "wave", {"scale", "points", "t_max", "eigensolver_cap"});
        take(s, "scale", cfg.wave.scale);
        std::size_t points = cfg.wave.sample_points.size();
        double t_max = cfg.wave.sample_points.back();
        take(s, "points", points);
        take(s, "t_max", t_max);
        cfg.wave.sample_points = WaveConfig::evenly_spaced(0.0, t_max, points);
        take(s, "eigensolver_cap", cfg.wave.eigensolver_cap);
    }
    if (doc.contains("embedding")) {
        const auto& s = doc["embedding"];
        check_keys(s, "embedding", {"endpoint", "model", "dimension", "batch_size", "timeout_ms", "auth_env",
                                    "max_in_flight", "cache_dir", "fallback_seed"});
        take(s, "endpoint", cfg.provider.endpoint);
        take(s, "model", cfg.provider.model);
        take(s, "dimension", cfg.provider.dimension);
        take(s, "batch_size", cfg.provider.batch_size);
        if (s.contains("timeout_ms")) cfg.provider.timeout = std::chrono::milliseconds(s["timeout_ms"].get<long>());
        take(s, "auth_env", cfg.provider.auth_env);
        take(s, "max_in_flight", cfg.provider.max_in_flight);
        if (s.contains("cache_dir")) cfg.provider.cache_dir = (cfg.base_dir / s["cache_dir"].get<std::string>()).string();
        take(s, "fallback_seed", cfg.provider.fallback_seed);
    }
    if (doc.contains("generation")) {
        const auto& s = doc["generation"];
        check_keys(s, "generation", {"endpoint", "model", "max_words", "temperature", "timeout_ms", "auth_env",
                                     "max_in_flight"});
        take(s, "endpoint", cfg.backend.endpoint);
        take(s, "model", cfg.backend.model);
        take(s, "max_words", cfg.backend.max_words);
        take(s, "temperature", cfg.backend.temperature);
        if (s.contains("timeout_ms")) cfg.backend.timeout = std::chrono::milliseconds(s["timeout_ms"].get<long>());
        take(s, "auth_env", cfg.backend.auth_env);
        take(s, "max_in_flight", cfg.backend.max_in_flight);
    }
    if (doc.contains("index")) {
        const auto& s = doc["index"];
        check_keys(s, "index", {"k", "kind"});
        take(s, "k", cfg.index_k);
        if (s.contains("kind")) cfg.index_kind = parse_kind_arg(s["kind"].get<std::string>());
    }
    if (doc.contains("retrieval")) {
        const auto& s = doc["retrieval"];
        check_keys(s, "retrieval", {"strategies", "k", "rank_offsets"});
        if (s.contains("strategies")) {
            cfg.strategies.clear();
            for (const auto& x : s["strategies"]) cfg.strategies.push_back(parse_strategy(x.get<std::string>()));
        }
        take(s, "k", cfg.retrieve_k);
        take(s, "rank_offsets", cfg.rank_offsets);
    }
    if (doc.contains("experiment")) {
        const auto& s = doc["experiment"];
        check_keys(s, "experiment", {"sample_size", "word_budget", "limit_tokens", "starting_words_grid"});
        take(s, "sample_size", cfg.sample_size);
        take(s, "word_budget", cfg.word_budget);
        take(s, "limit_tokens", cfg.limit_tokens);
        take(s, "starting_words_grid", cfg.starting_words_grid);
    }
    if (doc.contains("correlate")) {
        const auto& s = doc["correlate"];
        check_keys(s, "correlate", {"pairs", "pair_count", "bins", "layer_sweep"});
        if (s.contains("pairs")) cfg.pairs.kind = parse_pair_kind(s["pairs"].get<std::string>());
        take(s, "pair_count", cfg.pairs.count);
        take(s, "bins", cfg.bins);
        take(s, "layer_sweep", cfg.layer_sweep);
    }
    if (doc.contains("node_classification")) parse_task(doc["node_classification"], "node_classification", cfg.nc);
    if (doc.contains("link_prediction")) parse_task(doc["link_prediction"], "link_prediction", cfg.lp);
    if (doc.contains("impute")) {
        const auto& s = doc["impute"];
        check_keys(s, "impute", {"strategies"});
        if (s.contains("strategies")) {
            cfg.impute.clear();
            for (const auto& x : s["strategies"]) cfg.impute.push_back(parse_impute_strategy(x.get<std::string>()));
        }
    }
    if (doc.contains("out")) cfg.out = cfg.base_dir / doc["out"].get<std::string>();
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* flag) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || item.front() == '-') {
            throw ValidationError(std::string(flag) + " expects comma-separated non-negative integers, got \"" + text + "\"");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ValidationError(std::string(flag) + " is empty");
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Artifacts under the output directory

struct Layout {
    fs::path root;
    fs::path nodes() const { return root / "graph" / "nodes.jsonl"; }
    fs::path edges() const { return root / "graph" / "edges.tsv"; }
    fs::path reindex() const { return root / "graph" / "reindex.jsonl"; }
    fs::path split() const { return root / "graph" / "split.json"; }
    fs::path manifest() const { return root / "graph" / "manifest.json"; }
    fs::path embedding(EmbeddingKind k) const { return root / "embeddings" / (std::string(to_string(k)) + ".tprg"); }
    fs::path index(EmbeddingKind k) const { return root / "index" / (std::string(to_string(k)) + ".jsonl"); }
    fs::path records() const { return root / "records" / "records.jsonl"; }
    fs::path reports() const { return root / "reports"; }
};

struct Pipeline {
    TextAttributedGraph graph;
    SplitAssignment split;
    std::string graph_fp;
};

Pipeline load_pipeline(const Layout& layout) {
    if (!fs::exists(layout.manifest())) {
        throw IoError("no ingested graph under " + layout.root.string() + "; run \"toporag ingest\" first");
    }
    Pipeline p;
    p.graph = load_graph(layout.nodes(), layout.edges(), 0);
    p.split = read_split(layout.split());
    p.graph_fp = graph_fingerprint(p.graph);
    const auto manifest = read_json_file(layout.manifest());
    if (manifest.value("graph_fingerprint", std::string()) != p.graph_fp) {
        throw ValidationError("ingested graph does not match its manifest fingerprint; re-run ingest");
    }
    return p;
}

std::string expected_fingerprint(const RunConfig& cfg, const Pipeline& p, EmbeddingKind kind) {
    switch (kind) {
        case EmbeddingKind::proximity: {
            DiffusionConfig d = cfg.diffusion;
            d.seed = cfg.stage_seed("projection");
            return proximity_fingerprint(p.graph, d);
        }
        case EmbeddingKind::role: return role_fingerprint(p.graph, cfg.wave);
        case EmbeddingKind::text: return text_fingerprint(p.graph, cfg.provider);
    }
    return {};
}

EmbeddingMatrix load_checked_embedding(const RunConfig& cfg, const Pipeline& p, const Layout& layout,
                                       EmbeddingKind kind) {
    const auto path = layout.embedding(kind);
    if (!fs::exists(path)) {
        throw IoError("missing " + path.string() + "; run \"toporag embed " +
                      (kind == EmbeddingKind::text ? std::string("text") : "topo-" + std::string(to_string(kind))) +
                      "\" first");
    }
    auto emb = read_embedding(path);
    if (emb.kind != kind) throw ValidationError(path.string() + " holds a " + std::string(to_string(emb.kind)) + " embedding");
    const auto expected = expected_fingerprint(cfg, p, kind);
    if (emb.fingerprint != expected) {
        throw ValidationError("fingerprint mismatch: " + path.string() + " has " + emb.fingerprint +
                              " but the current graph and config give " + expected);
    }
    if (emb.size() != p.graph.node_count()) throw ValidationError(path.string() + " has the wrong number of rows");
    return emb;
}

TopKIndex load_checked_index(const RunConfig& cfg, const Pipeline& p, const Layout& layout, EmbeddingKind kind) {
    const auto path = layout.index(kind);
    if (!fs::exists(path)) {
        throw IoError("missing " + path.string() + "; run \"toporag index --kind " + std::string(to_string(kind)) +
                      "\" first");
    }
    auto index = read_index(path);
    const auto emb_path = layout.embedding(kind);
    const auto emb_fp = fs::exists(emb_path) ? read_embedding_fingerprint(emb_path) : std::string();
    if (index.fingerprint != emb_fp || index.fingerprint != expected_fingerprint(cfg, p, kind)) {
        throw ValidationError("fingerprint mismatch between " + path.string() + " (" + index.fingerprint +
                              ") and the " + std::string(to_string(kind)) + " embeddings (" +
                              (emb_fp.empty() ? std::string("absent") : emb_fp) + ")");
    }
    if (index.kind != kind || index.size() != p.graph.node_count()) {
        throw ValidationError(path.string() + " does not match the ingested graph");
    }
    return index;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const RunConfig& cfg, const Layout& layout, std::ostream& out) {
    if (cfg.nodes.empty() || cfg.edges.empty()) throw ValidationError("config must name dataset.nodes and dataset.edges");
    auto graph = load_graph(cfg.nodes, cfg.edges, cfg.min_text_words);
    if (cfg.sample_seed_fraction) {
        graph = sample_subgraph(graph, *cfg.sample_seed_fraction, cfg.fanouts, cfg.stage_seed("sample-subgraph"));
    }
    const auto split = split_nodes(graph, cfg.partial_fraction, cfg.split_strategy, cfg.starting_words,
                                   cfg.stage_seed("split"));
    const std::size_t before = graph.edge_count();
    if (cfg.remove_partial_edges) graph = remove_partial_partial_edges(graph, split);

    write_graph(graph, layout.nodes(), layout.edges());
    write_reindex_map(graph, layout.reindex());
    write_split(split, layout.split());
    write_json_file(json{{"graph_fingerprint", graph_fingerprint(graph)},
                         {"nodes", graph.node_count()},
                         {"edges", graph.edge_count()},
                         {"removed_partial_edges", before - graph.edge_count()},
                         {"full", split.full_ids.size()},
                         {"partial", split.partial_ids.size()},
                         {"excluded", split.excluded_count}},
                    layout.manifest());
    out << "ingested " << graph.node_count() << " nodes, " << graph.edge_count() << " edges ("
        << split.partial_ids.size() << " partial, " << split.excluded_count << " too short)\n";
    return kExitOk;
}

int cmd_embed(const RunConfig& cfg, const Layout& layout, const std::string& what, std::ostream& out) {
    const Pipeline p = load_pipeline(layout);
    const EmbeddingKind kind = parse_kind_arg(what);
    EmbeddingMatrix emb;
    switch (kind) {
        case EmbeddingKind::proximity: {
            DiffusionConfig d = cfg.diffusion;
            d.seed = cfg.stage_seed("projection");
            emb = proximity_embedding(p.graph, d);
            break;
        }
        case EmbeddingKind::role: emb = role_embedding(p.graph, cfg.wave); break;
        case EmbeddingKind::text: emb = node_text_embeddings(p.graph, cfg.provider); break;
    }
    write_embedding(emb, layout.embedding(kind));
    out << "wrote " << to_string(kind) << " embeddings " << emb.size() << "x" << emb.dim() << " ("
        << emb.fingerprint << ")\n";
    return kExitOk;
}

std::vector<double> default_bin_edges(const PairSample& sample, std::size_t bins) {
    if (bins < 1) throw ValidationError("bin count must be positive");
    const auto [lo_it, hi_it] = std::minmax_element(sample.topo_scores.begin(), sample.topo_scores.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi <= lo) hi = lo + 1.0;
    std::vector<double> edges;
    for (std::size_t b = 0; b <= bins; ++b) {
        edges.push_back(b == bins ? hi : lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
    }
    return edges;
}

int cmd_correlate(const RunConfig& cfg, const Layout& layout, const std::string& kind_name,
                  const std::string& selection_name, bool sweep_from_flag, std::ostream& out) {
    const Pipeline p = load_pipeline(layout);
    const EmbeddingKind kind = parse_kind_arg(kind_name);
    if (kind == EmbeddingKind::text) throw ValidationError("correlate needs a topological embedding kind");
    const TextSelection selection = parse_text_selection(selection_name);
    const EmbeddingMatrix text = selection == TextSelection::primary
                                     ? load_checked_embedding(cfg, p, layout, EmbeddingKind::text)
                                     : node_text_embeddings(p.graph, cfg.provider, selection);
    const EmbeddingMatrix topo = load_checked_embedding(cfg, p, layout, kind);

    PairSelection sel = cfg.pairs;
    sel.seed = cfg.stage_seed("pairs");
    const PairSample sample = pairwise_scores(p.graph, text, topo, sel);
    const double r = pearson(sample);
    const auto edges = default_bin_edges(sample, cfg.bins);
    const BinnedCurve curve = binned_curve(sample, edges);

    std::optional<GroupMatrix> groups;
    if (p.graph.has_labels()) {
        std::vector<std::string> labels;
        bool complete = true;
        for (const auto& n : p.graph.nodes()) {
            if (!n.label) complete = false;
            labels.push_back(n.label.value_or(""));
        }
        if (complete) {
            groups = group_mean_matrix(labels, [&text](NodeId i, NodeId j) {
                return cosine_rows(text.rows.row(static_cast<Eigen::Index>(i)), text.rows.row(static_cast<Eigen::Index>(j)));
            });
        }
    }
    json report = analysis_report(r, sample, to_string(default_topo_score(kind)), &curve, groups ? &*groups : nullptr);
    report["kind"] = to_string(kind);
    report["text_selection"] = selection_name;
    report["text_fingerprint"] = text.fingerprint;
    report["topo_fingerprint"] = topo.fingerprint;
    // A sweep requested in the config applies to proximity runs only; on the
    // command line it must match the kind.
    if (cfg.layer_sweep > 0 && (kind == EmbeddingKind::proximity || sweep_from_flag)) {
        if (kind != EmbeddingKind::proximity) throw ValidationError("--layer-sweep applies to proximity embeddings");
        DiffusionConfig d = cfg.diffusion;
        d.seed = cfg.stage_seed("projection");
        const auto sweep = layer_sweep(p.graph, text, cfg.layer_sweep, d, sel);
        report["layer_sweep"] = sweep;
    }
    std::string name = "correlate_" + std::string(to_string(kind));
    if (selection != TextSelection::primary) name += "_" + selection_name;
    write_json_file(report, layout.reports() / (name + ".json"));
    out << to_string(kind) << " correlation r = " << r << " over " << sample.size() << " pairs\n";
    if (report.contains("layer_sweep")) {
        out << "layer sweep:";
        for (double v : report["layer_sweep"]) out << ' ' << v;
        out << '\n';
    }
    return kExitOk;
}

int cmd_index(const RunConfig& cfg, const Layout& layout, const std::string& kind_name, std::ostream& out) {
    const Pipeline p = load_pipeline(layout);
    const EmbeddingKind kind = kind_name.empty() ? cfg.index_kind : parse_kind_arg(kind_name);
    const EmbeddingMatrix emb = load_checked_embedding(cfg, p, layout, kind);
    const TopKIndex index = build_index(emb, p.split.full_ids, cfg.index_k);
    write_index(index, layout.index(kind));
    out << "indexed " << index.size() << " nodes, K = " << cfg.index_k << " over " << p.split.full_ids.size()
        << " fully observed candidates\n";
    return kExitOk;
}

int cmd_generate(const RunConfig& cfg, const Layout& layout, const std::string& kind_name, std::ostream& out) {
    const Pipeline p = load_pipeline(layout);
    cfg.backend.validate();
    const EmbeddingKind kind = kind_name.empty() ? cfg.index_kind : parse_kind_arg(kind_name);
    const bool wants_topo = std::find(cfg.strategies.begin(), cfg.strategies.end(), RetrievalStrategy::topo) !=
                            cfg.strategies.end();
    const bool wants_text = std::find(cfg.strategies.begin(), cfg.strategies.end(), RetrievalStrategy::text) !=
                            cfg.strategies.end();
    std::optional<TopKIndex> index;
    std::optional<EmbeddingMatrix> text;
    if (wants_topo) index = load_checked_index(cfg, p, layout, kind);
    if (wants_text) text = load_checked_embedding(cfg, p, layout, EmbeddingKind::text);

    RetrievalContext ctx;
    ctx.graph = &p.graph;
    ctx.index = index ? &*index : nullptr;
    ctx.text_embeddings = text ? &*text : nullptr;
    ctx.provider = &cfg.provider;
    ctx.pool = p.split.full_ids;

    ExperimentConfig exp;
    exp.sample_size = cfg.sample_size.value_or(std::min<std::size_t>(500, p.split.partial_ids.size()));
    exp.seed = *cfg.seed;
    exp.word_budget = cfg.budget();
    exp.limit_tokens = cfg.limit_tokens;

    std::vector<std::size_t> grid = cfg.starting_words_grid;
    if (grid.empty()) grid.push_back(p.split.starting_words);

    RecordStore store(layout.records());
    for (std::size_t sw : grid) {
        const SplitAssignment split = sw == p.split.starting_words ? p.split : with_starting_words(p.graph, p.split, sw);
        for (RetrievalStrategy strategy : cfg.strategies) {
            const std::vector<std::size_t> offsets =
                strategy == RetrievalStrategy::topo ? cfg.rank_offsets : std::vector<std::size_t>{0};
            for (std::size_t offset : offsets) {
                RetrievalPlan plan;
                plan.strategy = strategy;
                plan.k = cfg.retrieve_k;
                plan.rank_offset = offset;
                plan.seed = cfg.stage_seed("random-retrieval");
                const auto records = run_experiment(p.graph, split, plan, ctx, cfg.backend, exp, &store);
                const auto excluded = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.excluded; });
                out << plan.key() << " sw=" << sw << ": " << records.size() - static_cast<std::size_t>(excluded)
                    << " generated, " << excluded << " excluded\n";
            }
        }
    }
    store.compact();
    return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const Layout& layout, std::ostream& out) {
    const Pipeline p = load_pipeline(layout);
    if (!fs::exists(layout.records())) throw IoError("missing " + layout.records().string() + "; run \"toporag generate\" first");
    const RecordStore store(layout.records());
    const auto records = store.records();
    for (const auto& r : records) {
        if (r.target >= p.graph.node_count() || (!r.excluded && !p.split.is_partial(r.target))) {
            throw ValidationError("record store does not match the ingested graph (node " + std::to_string(r.target) + ")");
        }
    }
    const auto reports = evaluate_store(records, make_token_embedder(cfg.provider), p.graph_fp);

    json doc{{"tokenizer", kTokenizerVersion}, {"graph_fingerprint", p.graph_fp}};
    json reps = json::array();
    for (const auto& r : reports) reps.push_back(to_json(r));
    doc["reports"] = std::move(reps);

    // Boost: topo over text baseline with the same k, prefix length and backend.
    auto suffix_of = [](const std::string& key) {
        const auto pos = key.rfind(":sw=");
        return pos == std::string::npos ? std::string() : key.substr(pos);
    };
    json boosts = json::array();
    for (const auto& topo : reports) {
        if (topo.strategy != "topo") continue;
        for (const auto& base : reports) {
            if (base.strategy != "text" || base.backend_id != topo.backend_id ||
                suffix_of(base.plan_key) != suffix_of(topo.plan_key)) {
                continue;
            }
            const auto b = boost(topo.means, base.means);
            json row{{"plan", topo.plan_key}, {"baseline", base.plan_key}};
            if (b) {
                row["bleu4"] = b->bleu4;
                row["rouge_l"] = b->rouge_l;
                row["emb_f1"] = b->emb_f1;
            } else {
                row["bleu4"] = row["rouge_l"] = row["emb_f1"] = nullptr;
            }
            boosts.push_back(std::move(row));
        }
    }
    doc["boost"] = std::move(boosts);
    write_json_file(doc, layout.reports() / "eval.json");
    write_eval_csv(reports, layout.reports() / "eval.csv");
    for (const auto& r : reports) {
        out << r.plan_key << " [" << r.backend_id << "] scored " << r.scored << ", excluded " << r.excluded
            << ": bleu4 " << r.means.bleu4 << ", rouge_l " << r.means.rouge_l << ", emb_f1 " << r.means.emb_f1 << '\n';
    }
    return kExitOk;
}

json summary_json(const RunSummary& s) {
    return json{{"mean", s.mean}, {"std", s.stddev}, {"values", s.values}, {"saturated", s.saturated}};
}

int cmd_impute(const RunConfig& cfg, const Layout& layout, const std::string& task, std::ostream& out) {
    if (task != "nc" && task != "lp" && task != "both") throw ValidationError("--task must be nc, lp or both");
    const Pipeline p = load_pipeline(layout);
    const EmbeddingMatrix text = load_checked_embedding(cfg, p, layout, EmbeddingKind::text);

    std::vector<bool> missing(p.graph.node_count(), false);
    for (NodeId id : p.split.partial_ids) missing[id] = true;

    std::map<NodeId, std::string> generated;
    std::string plan_key;
    const bool needs_records = std::find(cfg.impute.begin(), cfg.impute.end(), ImputeStrategy::toporag_text) != cfg.impute.end();
    if (needs_records) {
        RetrievalPlan plan;
        plan.strategy = RetrievalStrategy::topo;
        plan.k = cfg.retrieve_k;
        plan.rank_offset = cfg.rank_offsets.front();
        plan_key = plan.key() + ":sw=" + std::to_string(p.split.starting_words);
        if (!fs::exists(layout.records())) throw IoError("missing " + layout.records().string() + "; run \"toporag generate\" first");
        const RecordStore store(layout.records());
        std::vector<GenerationRecord> chosen;
        for (const auto& r : store.records()) {
            if (r.plan_key == plan_key && r.backend_id == cfg.backend.id()) chosen.push_back(r);
        }
        generated = generated_texts(chosen);
    }

    json doc{{"graph_fingerprint", p.graph_fp}, {"features", text.fingerprint}, {"missing", p.split.partial_ids.size()}};
    if (!plan_key.empty()) doc["plan"] = plan_key;
    const auto labels = graph_labels(p.graph);
    json results = json::object();
    for (ImputeStrategy strategy : cfg.impute) {
        ImputeExtras extras;
        extras.seed = cfg.stage_seed("impute");
        extras.generated = &generated;
        extras.provider = &cfg.provider;
        const Matrix features = impute_features(text.rows, missing, strategy, extras);
        json row = json::object();
        if (task != "lp") {
            const auto s = train_node_classifier(features, p.graph, labels, cfg.nc, p.split.partial_ids);
            row["node_classification"] = summary_json(s);
            out << to_string(strategy) << " node classification: " << s.mean << " +/- " << s.stddev << '\n';
        }
        if (task != "nc") {
            const auto s = link_prediction_eval(features, p.graph, cfg.lp);
            row["link_prediction"] = summary_json(s);
            out << to_string(strategy) << " link prediction Hits@100: " << s.mean << " +/- " << s.stddev
                << (s.saturated ? " (fewer than 200 test edges)" : "") << '\n';
        }
        results[std::string(to_string(strategy))] = std::move(row);
    }
    doc["results"] = std::move(results);
    write_json_file(doc, layout.reports() / "impute.json");
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Topology-aware retrieval-augmented generation over text-attributed graphs", "toporag"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", out_dir, "Output directory (overrides config \"out\")");
    app.add_option("--seed", seed, "Global seed (overrides config \"seed\")");

    auto* ingest = app.add_subcommand("ingest", "Load, split and write the leakage-safe graph");

    auto* embed = app.add_subcommand("embed", "Compute node embeddings");
    std::string embed_kind;
    embed->add_option("kind", embed_kind, "topo-proximity | topo-role | text")->required();
    std::optional<std::size_t> depth, dim;
    std::optional<double> scale;
    embed->add_option("--depth", depth, "Diffusion depth K");
    embed->add_option("--dim", dim, "Projection dimension (0 = exact identity basis)");
    embed->add_option("--scale", scale, "Heat kernel scale");

    auto* correlate = app.add_subcommand("correlate", "Correlate text and topological similarity");
    std::string corr_kind = "proximity", selection = "primary", pairs_kind;
    std::optional<std::size_t> layer_sweep_depth, pair_count, bins;
    correlate->add_option("--kind", corr_kind, "proximity | role");
    correlate->add_option("--layer-sweep", layer_sweep_depth, "Also correlate for diffusion depths 1..N");
    correlate->add_option("--pairs", pairs_kind, "all_ordered | all_unordered_no_self | sampled");
    correlate->add_option("--pair-count", pair_count, "Pairs to draw when --pairs sampled");
    correlate->add_option("--bins", bins, "Number of curve bins");
    correlate->add_option("--text-selection", selection, "primary | all | sent | received");

    auto* index = app.add_subcommand("index", "Precompute the top-K neighbor index");
    std::string index_kind;
    std::optional<std::size_t> index_k;
    index->add_option("--kind", index_kind, "proximity | role | text");
    index->add_option("--k", index_k, "Neighbors kept per node");

    auto* generate = app.add_subcommand("generate", "Retrieve and generate continuations");
    std::string strategies, backend, model, gen_kind, rank_offsets, sw_grid;
    std::optional<std::size_t> gen_k, sample_size, word_budget, limit_tokens;
    generate->add_option("--strategy", strategies, "Comma list of none, random, text, topo");
    generate->add_option("--backend", backend, "\"mock\" or a generation endpoint URL");
    generate->add_option("--model", model, "Remote model name");
    generate->add_option("--kind", gen_kind, "Index used by the topo strategy");
    generate->add_option("--k", gen_k, "Retrieved texts per target");
    generate->add_option("--rank-offset", rank_offsets, "Comma list of rank-window offsets for topo");
    generate->add_option("--starting-words-grid", sw_grid, "Comma list of observed prefix lengths");
    generate->add_option("--sample-size", sample_size, "Partial nodes to sample");
    generate->add_option("--word-budget", word_budget, "Words to generate");
    generate->add_option("--limit-tokens", limit_tokens, "Context limit in estimated tokens");

    auto* evaluate = app.add_subcommand("evaluate", "Score generated records");

    auto* impute = app.add_subcommand("impute", "Feature imputation with task evaluation");
    std::string impute_strategies, task = "both";
    impute->add_option("--strategy", impute_strategies, "Comma list of zero, random, global_mean, toporag_text");
    impute->add_option("--task", task, "nc | lp | both");

    std::vector<std::string> argv_store{"toporag"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            cfg.base_dir = fs::path(config_path).parent_path();
            if (cfg.base_dir.empty()) cfg.base_dir = ".";
            parse_config(read_json_file(config_path), cfg);
        }
        if (seed) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out = out_dir;
        if (!cfg.seed) throw ValidationError("a seed is required (config \"seed\" or --seed)");
        if (cfg.out.empty()) throw ValidationError("an output directory is required (config \"out\" or --out)");

        if (depth) cfg.diffusion.depth = *depth;
        if (dim) cfg.diffusion.projection_dim = *dim;
        if (scale) cfg.wave.scale = *scale;
        if (layer_sweep_depth) cfg.layer_sweep = *layer_sweep_depth;
        if (!pairs_kind.empty()) cfg.pairs.kind = parse_pair_kind(pairs_kind);
        if (pair_count) cfg.pairs.count = *pair_count;
        if (bins) cfg.bins = *bins;
        if (index_k) cfg.index_k = *index_k;
        if (!strategies.empty()) {
            cfg.strategies.clear();
            for (const auto& s : split_list(strategies)) cfg.strategies.push_back(parse_strategy(s));
        }
        if (!backend.empty()) cfg.backend.endpoint = backend;
        if (!model.empty()) cfg.backend.model = model;
        if (gen_k) cfg.retrieve_k = *gen_k;
        if (!rank_offsets.empty()) cfg.rank_offsets = parse_size_list(rank_offsets, "--rank-offset");
        if (!sw_grid.empty()) cfg.starting_words_grid = parse_size_list(sw_grid, "--starting-words-grid");
        if (sample_size) cfg.sample_size = sample_size;
        if (word_budget) cfg.word_budget = word_budget;
        if (limit_tokens) cfg.limit_tokens = *limit_tokens;
        if (!impute_strategies.empty()) {
            cfg.impute.clear();
            for (const auto& s : split_list(impute_strategies)) cfg.impute.push_back(parse_impute_strategy(s));
        }
        cfg.provider.validate();

        const Layout layout{cfg.out};
        if (ingest->parsed()) return cmd_ingest(cfg, layout, out);
        if (embed->parsed()) return cmd_embed(cfg, layout, embed_kind, out);
        if (correlate->parsed()) return cmd_correlate(cfg, layout, corr_kind, selection, layer_sweep_depth.has_value(), out);
        if (index->parsed()) return cmd_index(cfg, layout, index_kind, out);
        if (generate->parsed()) return cmd_generate(cfg, layout, gen_kind, out);
        if (evaluate->parsed()) return cmd_evaluate(cfg, layout, out);
        if (impute->parsed()) return cmd_impute(cfg, layout, task, out);
        err << "error: no command given\n";
        return kExitValidation;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const json::exception& e) {
        err << "error: invalid configuration value: " << e.what() << '\n';
        return kExitValidation;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace toporag

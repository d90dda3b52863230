#include "toporag/generation.hpp"
#include "toporag/random.hpp"
#include "toporag/text.hpp"

#include <algorithm>
#include <fstream>
#include <future>

namespace toporag {

using json = nlohmann::json;

std::size_t estimate_tokens(std::string_view text) {
    return (count_words(text) * 14 + 9) / 10;
}

PromptBundle assemble_prompt(std::string_view prefix, const std::vector<std::string>& retrieved,
                             std::size_t word_budget, std::string_view template_id, NodeId target) {
    if (word_budget == 0) throw ValidationError("word budget must be positive");
    if (template_id != kDefaultTemplate) {
        throw ValidationError("unknown prompt template \"" + std::string(template_id) + "\"");
    }
    PromptBundle bundle;
    bundle.target = target;
    bundle.prefix = std::string(prefix);
    bundle.retrieved = retrieved;
    bundle.template_id = std::string(template_id);
    bundle.word_budget = word_budget;

    std::string& p = bundle.prompt;
    p = "Continue the following text in the same style; write approximately " + std::to_string(word_budget) +
        " words.\n\n";
    for (std::size_t n = 0; n < retrieved.size(); ++n) {
        p += "Reference " + std::to_string(n + 1) + ":\n";
        p += retrieved[n];
        p += "\n\n";
    }
    p += "Text to continue: ";
    p += prefix;
    bundle.estimated_tokens = estimate_tokens(p);
    return bundle;
}

GuardResult context_guard(const PromptBundle& bundle, std::size_t limit_tokens) {
    if (limit_tokens == 0) throw ValidationError("token limit must be positive");
    if (bundle.estimated_tokens > limit_tokens) return {false, "context_limit"};
    return {};
}

void GenerationBackendSpec::validate() const {
    if (max_words < 1) throw ValidationError("backend max_words must be at least 1");
    if (!(temperature >= 0.0)) throw ValidationError("backend temperature must be non-negative");
    if (max_in_flight < 1) throw ValidationError("backend max_in_flight must be at least 1");
    if (endpoint.empty()) throw ValidationError("backend endpoint is empty");
}

std::string GenerationBackendSpec::id() const {
    return is_mock() ? std::string("mock") : model + "@" + endpoint;
}

namespace {

std::string mock_generate(const PromptBundle& bundle) {
    std::vector<std::string_view> words;
    for (const auto& t : bundle.retrieved) {
        for (auto w : split_whitespace(t)) words.push_back(w);
    }
    std::string out;
    if (!words.empty()) {
        for (std::size_t i = 0; i < bundle.word_budget; ++i) {
            if (i) out += ' ';
            out += words[i % words.size()];
        }
        return out;
    }
    auto prefix_words = split_whitespace(bundle.prefix);
    std::reverse(prefix_words.begin(), prefix_words.end());
    return join_words(prefix_words, 0, prefix_words.size());
}

}  // namespace

std::string generate(const GenerationBackendSpec& backend, const PromptBundle& bundle) {
    backend.validate();
    std::string text;
    if (backend.is_mock()) {
        text = mock_generate(bundle);
    } else {
        const json body{{"model", backend.model},
                        {"prompt", bundle.prompt},
                        {"max_words", std::min(backend.max_words, bundle.word_budget)},
                        {"temperature", backend.temperature}};
        const json reply = post_json(backend.endpoint, "/generate", body, backend.auth_env, backend.timeout,
                                     backend.retry);
        if (!reply.contains("text") || !reply["text"].is_string()) {
            throw RemoteError("generation reply has no \"text\" field");
        }
        text = reply["text"].get<std::string>();
    }
    if (count_words(text) == 0) throw RemoteError("backend returned an empty response");
    return text;
}

std::string GenerationRecord::key() const {
    return std::to_string(target) + "|" + plan_key + "|" + backend_id;
}

json to_json(const GenerationRecord& r) {
    json doc{{"target", r.target},
             {"strategy", r.strategy},
             {"plan", r.plan_key},
             {"backend", r.backend_id},
             {"starting_words", r.starting_words},
             {"prompt", r.prompt},
             {"prefix", r.prefix},
             {"output", r.output ? json(*r.output) : json(nullptr)},
             {"reference", r.reference},
             {"retrieved", r.retrieved_ids},
             {"estimated_tokens", r.estimated_tokens},
             {"excluded", r.excluded},
             {"reason", r.reason}};
    return doc;
}

GenerationRecord record_from_json(const json& doc) {
    GenerationRecord r;
    r.target = doc.at("target").get<NodeId>();
    r.strategy = doc.at("strategy").get<std::string>();
    r.plan_key = doc.at("plan").get<std::string>();
    r.backend_id = doc.at("backend").get<std::string>();
    r.starting_words = doc.value("starting_words", std::size_t{0});
    r.prompt = doc.value("prompt", std::string());
    r.prefix = doc.value("prefix", std::string());
    if (doc.contains("output") && doc["output"].is_string()) r.output = doc["output"].get<std::string>();
    r.reference = doc.at("reference").get<std::string>();
    r.retrieved_ids = doc.value("retrieved", std::vector<NodeId>{});
    r.estimated_tokens = doc.value("estimated_tokens", std::size_t{0});
    r.excluded = doc.at("excluded").get<bool>();
    r.reason = doc.value("reason", std::string());
    if (r.excluded == r.output.has_value()) {
        throw ValidationError("record for node " + std::to_string(r.target) +
                              " must carry an output exactly when it is not excluded");
    }
    return r;
}

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;  // a fresh store
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto rec = record_from_json(json::parse(line));
            const auto key = rec.key();
            by_key_.insert_or_assign(key, std::move(rec));
        } catch (const json::exception& e) {
            throw FormatError(path_.string(), line_no, e.what());
        } catch (const ValidationError& e) {
            throw FormatError(path_.string(), line_no, e.what());
        }
    }
}

const GenerationRecord* RecordStore::find(const std::string& key) const {
    const auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : &it->second;
}

std::vector<GenerationRecord> RecordStore::records() const {
    std::vector<GenerationRecord> out;
    out.reserve(by_key_.size());
    for (const auto& [key, rec] : by_key_) out.push_back(rec);
    std::sort(out.begin(), out.end(), [](const GenerationRecord& a, const GenerationRecord& b) {
        return std::tie(a.plan_key, a.backend_id, a.target) < std::tie(b.plan_key, b.backend_id, b.target);
    });
    return out;
}

void RecordStore::append(const GenerationRecord& record) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + path_.string());
    out << to_json(record).dump() << '\n';
    out.flush();
    if (!out) throw IoError("failed writing " + path_.string());
    by_key_.insert_or_assign(record.key(), record);
}

void RecordStore::compact() {
    const auto tmp = path_.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        for (const auto& rec : records()) out << to_json(rec).dump() << '\n';
        if (!out) throw IoError("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path_);
}

std::vector<NodeId> sample_targets(const SplitAssignment& split, std::size_t sample_size, std::uint64_t seed) {
    if (sample_size > split.partial_ids.size()) {
        throw ValidationError("sample size " + std::to_string(sample_size) + " exceeds the " +
                              std::to_string(split.partial_ids.size()) + " partially observed nodes");
    }
    Rng rng(derive_seed(seed, "sample"));
    std::vector<NodeId> out;
    for (std::size_t pick : rng.sample_indices(split.partial_ids.size(), sample_size)) {
        out.push_back(split.partial_ids[pick]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<GenerationRecord> run_experiment(const TextAttributedGraph& graph, const SplitAssignment& split,
                                             const RetrievalPlan& plan, const RetrievalContext& ctx,
                                             const GenerationBackendSpec& backend, const ExperimentConfig& config,
                                             RecordStore* store) {
    backend.validate();
    plan.validate();
    RetrievalContext local = ctx;
    local.graph = &graph;
    const auto targets = sample_targets(split, config.sample_size, config.seed);
    const std::string plan_key = plan.key() + ":sw=" + std::to_string(split.starting_words);

    std::vector<GenerationRecord> records(targets.size());
    std::vector<std::optional<PromptBundle>> pending(targets.size());

    for (std::size_t t = 0; t < targets.size(); ++t) {
        auto& rec = records[t];
        rec.target = targets[t];
        rec.strategy = std::string(to_string(plan.strategy));
        rec.plan_key = plan_key;
        rec.backend_id = backend.id();
        rec.starting_words = split.starting_words;
        if (store) {
            if (const auto* existing = store->find(rec.key())) {
                rec = *existing;
                continue;
            }
        }
        const PartialNode* partial = split.find(rec.target);
        if (!partial || partial->excluded) {
            rec.excluded = true;
            rec.reason = "too_short";
            continue;
        }
        rec.prefix = partial->prefix;
        rec.reference = partial->suffix;
        try {
            const auto retrieved = retrieve(plan, rec.target, local, partial->prefix);
            std::vector<std::string> texts;
            for (const auto& r : retrieved) {
                rec.retrieved_ids.push_back(r.node);
                texts.push_back(r.text);
            }
            auto bundle = assemble_prompt(partial->prefix, texts, config.word_budget, kDefaultTemplate, rec.target);
            rec.prompt = bundle.prompt;
            rec.estimated_tokens = bundle.estimated_tokens;
            const auto guard = context_guard(bundle, config.limit_tokens);
            if (!guard.accepted) {
                rec.excluded = true;
                rec.reason = guard.reason;
                continue;
            }
            pending[t] = std::move(bundle);
        } catch (const Error& e) {
            rec.excluded = true;
            rec.reason = std::string("retrieval_error: ") + e.what();
        }
    }

    // Backend calls in waves of max_in_flight; records land in target order.
    const std::size_t wave = backend.is_mock() ? targets.size() : backend.max_in_flight;
    std::size_t next = 0;
    while (next < targets.size()) {
        std::vector<std::pair<std::size_t, std::future<std::string>>> inflight;
        std::size_t end = next;
        while (end < targets.size() && inflight.size() < std::max<std::size_t>(wave, 1)) {
            if (pending[end]) {
                const auto* bundle = &*pending[end];
                inflight.emplace_back(end, std::async(backend.is_mock() ? std::launch::deferred : std::launch::async,
                                                      [&backend, bundle] { return generate(backend, *bundle); }));
            }
            ++end;
        }
        for (auto& [t, fut] : inflight) {
            try {
                records[t].output = fut.get();
            } catch (const std::exception& e) {
                records[t].excluded = true;
                records[t].reason = std::string("backend_error: ") + e.what();
            }
        }
        if (store) {
            for (std::size_t t = next; t < end; ++t) {
                if (!store->contains(records[t].key())) store->append(records[t]);
            }
        }
        next = end;
    }
    return records;
}

std::size_t default_word_budget(std::string_view dataset) {
    static const std::map<std::string, std::size_t, std::less<>> budgets{
        {"cora", 150},    {"pubmed", 250}, {"arxiv", 200},  {"product", 150}, {"book", 300},
        {"epinion", 500}, {"music", 250},  {"pantry", 200}, {"enron", 300}};
    const auto it = budgets.find(dataset);
    if (it == budgets.end()) throw ValidationError("no default word budget for dataset \"" + std::string(dataset) + "\"");
    return it->second;
}

}  // namespace toporag

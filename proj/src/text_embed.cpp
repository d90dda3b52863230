#include "toporag/text_embed.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iterator>
#include <mutex>

namespace toporag {

using json = nlohmann::json;

void EmbeddingProviderSpec::validate() const {
    if (dimension < 1) throw ValidationError("embedding dimension must be >= 1");
    if (batch_size < 1) throw ValidationError("embedding batch size must be >= 1");
    if (is_fallback() && dimension < 8) throw ValidationError("fallback embedding needs dimension >= 8");
}

std::string describe(const EmbeddingProviderSpec& provider) {
    return "text;endpoint=" + provider.endpoint + ";model=" + provider.model +
           ";d=" + std::to_string(provider.dimension) +
           (provider.is_fallback() ? ";seed=" + std::to_string(provider.fallback_seed) : "");
}

namespace {

// Code-point boundaries of a UTF-8 string; malformed bytes count as one unit.
std::vector<std::size_t> code_point_starts(std::string_view s) {
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) starts.push_back(i);
    }
    starts.push_back(s.size());
    return starts;
}

void normalize_rows(Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (norm > 0.0) m.row(i) /= norm;
    }
}

std::mutex& cache_mutex() {
    static std::mutex m;
    return m;
}

std::filesystem::path cache_path(const EmbeddingProviderSpec& p, const std::string& text) {
    std::uint64_t h = fnv1a64(p.model);
    h = fnv1a64(std::string_view("\0", 1), h);
    h = fnv1a64(text, h);
    return std::filesystem::path(*p.cache_dir) / (hex64(h) + ".bin");
}

std::optional<Vector> cache_lookup(const EmbeddingProviderSpec& p, const std::string& text) {
    if (!p.cache_dir) return std::nullopt;
    std::ifstream in(cache_path(p, text), std::ios::binary);
    if (!in) return std::nullopt;
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        const Matrix row = decode_embedding(bytes);
        if (row.rows() != 1 || static_cast<std::size_t>(row.cols()) != p.dimension) return std::nullopt;
        return Vector(row.row(0).transpose());
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

void cache_store(const EmbeddingProviderSpec& p, const std::string& text, const Vector& v) {
    if (!p.cache_dir) return;
    std::lock_guard lock(cache_mutex());
    const auto target = cache_path(p, text);
    std::filesystem::create_directories(target.parent_path());
    const auto tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write embedding cache entry " + tmp);
        const auto bytes = encode_embedding(Matrix(v.transpose()), EmbeddingKind::text);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, target);
}

Matrix request_batch(const EmbeddingProviderSpec& p, const std::vector<std::string>& batch,
                     const char* granularity) {
    json body{{"model", p.model}, {"texts", batch}};
    if (granularity) body["granularity"] = granularity;
    const json reply = post_json(p.endpoint, "/embed", body, p.auth_env, p.timeout, p.retry);
    const auto vectors = reply.find("vectors");
    if (vectors == reply.end() || !vectors->is_array() || vectors->size() != batch.size()) {
        throw RemoteError("embedding reply must carry one vector per input text");
    }
    Matrix out(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(p.dimension));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& vec = (*vectors)[i];
        if (!vec.is_array() || vec.size() != p.dimension) {
            throw ValidationError("provider returned a " + std::to_string(vec.size()) +
                                  "-dimensional vector, expected " + std::to_string(p.dimension));
        }
        for (std::size_t j = 0; j < p.dimension; ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vec[j].get<double>();
        }
    }
    return out;
}

TextEmbeddings embed_remote(const EmbeddingProviderSpec& p, const std::vector<std::string>& texts,
                            const char* granularity) {
    TextEmbeddings result;
    result.rows = Matrix::Zero(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(p.dimension));

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) {
            result.empty_inputs.push_back(i);
        } else if (auto hit = cache_lookup(p, texts[i])) {
            result.rows.row(static_cast<Eigen::Index>(i)) = hit->transpose();
        } else {
            pending.push_back(i);
        }
    }

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < pending.size(); start += p.batch_size) {
        const auto end = std::min(pending.size(), start + p.batch_size);
        batches.emplace_back(pending.begin() + static_cast<std::ptrdiff_t>(start),
                             pending.begin() + static_cast<std::ptrdiff_t>(end));
    }
    const std::size_t in_flight = std::max<std::size_t>(1, p.max_in_flight);
    for (std::size_t wave = 0; wave < batches.size(); wave += in_flight) {
        std::vector<std::future<Matrix>> futures;
        const auto wave_end = std::min(batches.size(), wave + in_flight);
        for (std::size_t b = wave; b < wave_end; ++b) {
            std::vector<std::string> batch_texts;
            for (std::size_t idx : batches[b]) batch_texts.push_back(texts[idx]);
            futures.push_back(std::async(std::launch::async, [&p, granularity, bt = std::move(batch_texts)] {
                return request_batch(p, bt, granularity);
            }));
        }
        for (std::size_t b = wave; b < wave_end; ++b) {
            Matrix got = futures[b - wave].get();
            normalize_rows(got);
            for (std::size_t k = 0; k < batches[b].size(); ++k) {
                const std::size_t idx = batches[b][k];
                result.rows.row(static_cast<Eigen::Index>(idx)) = got.row(static_cast<Eigen::Index>(k));
                cache_store(p, texts[idx], got.row(static_cast<Eigen::Index>(k)).transpose());
            }
            ++result.requests;
        }
    }
    normalize_rows(result.rows);
    return result;
}

}  // namespace

Matrix fallback_embed(const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed) {
    if (dim < 8) throw ValidationError("fallback embedding needs dim >= 8");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim));
    std::string seed_bytes(8, '\0');
    for (int i = 0; i < 8; ++i) seed_bytes[static_cast<std::size_t>(i)] = static_cast<char>((seed >> (8 * i)) & 0xff);
    const std::uint64_t basis = fnv1a64(seed_bytes);

    for (std::size_t r = 0; r < texts.size(); ++r) {
        if (texts[r].empty()) continue;
        const std::string padded = "\x02" + texts[r] + "\x03";
        const auto starts = code_point_starts(padded);
        const std::size_t cps = starts.size() - 1;
        for (std::size_t k = 0; k + 3 <= cps; ++k) {
            const std::string_view gram(padded.data() + starts[k], starts[k + 3] - starts[k]);
            const std::uint64_t h = splitmix64(fnv1a64(gram, basis));
            const auto bucket = static_cast<Eigen::Index>((h >> 1) % dim);
            out(static_cast<Eigen::Index>(r), bucket) += (h & 1) ? 1.0 : -1.0;
        }
    }
    normalize_rows(out);
    return out;
}

TextEmbeddings embed_texts(const EmbeddingProviderSpec& provider, const std::vector<std::string>& texts) {
    provider.validate();
    if (texts.empty()) throw ValidationError("embed_texts needs at least one text");
    if (provider.is_fallback()) {
        TextEmbeddings result;
        result.rows = fallback_embed(texts, provider.dimension, provider.fallback_seed);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (texts[i].empty()) result.empty_inputs.push_back(i);
        }
        return result;
    }
    return embed_remote(provider, texts, nullptr);
}

Matrix embed_tokens(const EmbeddingProviderSpec& provider, const std::vector<std::string>& tokens) {
    provider.validate();
    if (tokens.empty()) return Matrix(0, static_cast<Eigen::Index>(provider.dimension));
    if (provider.is_fallback()) return fallback_embed(tokens, provider.dimension, provider.fallback_seed);
    return embed_remote(provider, tokens, "token").rows;
}

double text_similarity(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
    return cosine(u, v);
}

EmbeddingMatrix node_text_embeddings(const TextAttributedGraph& graph, const EmbeddingProviderSpec& provider,
                                     TextSelection selection) {
    // Flatten every selected text into one request list, then average back per node.
    std::vector<std::string> flat;
    std::vector<std::vector<std::size_t>> owner(graph.node_count());
    for (NodeId i = 0; i < graph.node_count(); ++i) {
        const auto& node = graph.node(i);
        if (node.texts.empty() || selection == TextSelection::primary) {
            if (!node.text_missing && !node.text.empty()) {
                owner[i].push_back(flat.size());
                flat.push_back(node.text);
            }
            continue;
        }
        for (const auto& t : node.texts) {
            const bool take = selection == TextSelection::all ||
                              (selection == TextSelection::sent && t.direction == TextDirection::sent) ||
                              (selection == TextSelection::received && t.direction == TextDirection::received);
            if (take && !t.text.empty()) {
                owner[i].push_back(flat.size());
                flat.push_back(t.text);
            }
        }
    }
    EmbeddingMatrix emb;
    emb.kind = EmbeddingKind::text;
    emb.rows = Matrix::Zero(static_cast<Eigen::Index>(graph.node_count()),
                            static_cast<Eigen::Index>(provider.dimension));
    if (!flat.empty()) {
        const auto rows = embed_texts(provider, flat).rows;
        for (NodeId i = 0; i < graph.node_count(); ++i) {
            if (owner[i].empty()) continue;
            Vector mean = Vector::Zero(rows.cols());
            for (std::size_t k : owner[i]) mean += rows.row(static_cast<Eigen::Index>(k)).transpose();
            const double norm = mean.norm();
            if (norm > 0.0) emb.rows.row(static_cast<Eigen::Index>(i)) = (mean / norm).transpose();
        }
    }
    emb.fingerprint = text_fingerprint(graph, provider, selection);
    return emb;
}

std::string text_fingerprint(const TextAttributedGraph& graph, const EmbeddingProviderSpec& provider,
                             TextSelection selection) {
    const char* sel = selection == TextSelection::primary ? "primary"
                      : selection == TextSelection::all   ? "all"
                      : selection == TextSelection::sent  ? "sent"
                                                          : "received";
    return hex64(fnv1a64(describe(provider) + ";sel=" + sel + ";graph=" + graph_fingerprint(graph)));
}

}  // namespace toporag

#include "toporag/embedding.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

namespace toporag {

std::string_view to_string(EmbeddingKind kind) {
    switch (kind) {
        case EmbeddingKind::proximity: return "proximity";
        case EmbeddingKind::role: return "role";
        case EmbeddingKind::text: return "text";
    }
    return "unknown";
}

EmbeddingKind parse_embedding_kind(std::string_view name) {
    if (name == "proximity") return EmbeddingKind::proximity;
    if (name == "role") return EmbeddingKind::role;
    if (name == "text") return EmbeddingKind::text;
    throw ValidationError("unknown embedding kind \"" + std::string(name) + "\"");
}

double cosine(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
    if (u.size() != v.size()) {
        throw ValidationError("cosine of vectors with different dimensions (" +
                              std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
    }
    return cosine_rows(u, v);
}

namespace {

constexpr char kMagic[4] = {'T', 'P', 'R', 'G'};
constexpr std::size_t kHeaderBytes = 4 + 1 + 8 + 8;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]);
    }
    return v;
}

}  // namespace

std::string encode_embedding(const Matrix& rows, EmbeddingKind kind) {
    std::string out;
    out.reserve(kHeaderBytes + static_cast<std::size_t>(rows.size()) * 8);
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(kind));
    put_u64(out, static_cast<std::uint64_t>(rows.rows()));
    put_u64(out, static_cast<std::uint64_t>(rows.cols()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            put_u64(out, std::bit_cast<std::uint64_t>(rows(i, j)));
        }
    }
    return out;
}

Matrix decode_embedding(std::string_view bytes, EmbeddingKind* kind) {
    if (bytes.size() < kHeaderBytes || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
        throw ValidationError("not a TPRG embedding file");
    }
    const auto kind_byte = static_cast<unsigned char>(bytes[4]);
    if (kind_byte > 2) throw ValidationError("unknown embedding kind byte " + std::to_string(kind_byte));
    const std::uint64_t n = get_u64(bytes, 5);
    const std::uint64_t d = get_u64(bytes, 13);
    if (d != 0 && n > (bytes.size() - kHeaderBytes) / 8 / d) {
        throw ValidationError("embedding payload shorter than its header claims");
    }
    if (bytes.size() != kHeaderBytes + n * d * 8) {
        throw ValidationError("embedding payload size does not match its header");
    }
    Matrix rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::size_t pos = kHeaderBytes;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            rows(i, j) = std::bit_cast<double>(get_u64(bytes, pos));
            pos += 8;
        }
    }
    if (kind) *kind = static_cast<EmbeddingKind>(kind_byte);
    return rows;
}

void write_embedding(const EmbeddingMatrix& emb, const std::filesystem::path& path) {
    if (!emb.rows.allFinite()) throw ValidationError("embedding contains non-finite entries");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        const auto bytes = encode_embedding(emb.rows, emb.kind);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing " + path.string());
    }
    std::ofstream side(path.string() + ".json", std::ios::binary | std::ios::trunc);
    if (!side) throw IoError("cannot write sidecar for " + path.string());
    const nlohmann::json doc{{"kind", to_string(emb.kind)},
                             {"n", emb.size()},
                             {"d", emb.dim()},
                             {"fingerprint", emb.fingerprint}};
    side << doc.dump() << '\n';
}

std::string read_embedding_fingerprint(const std::filesystem::path& path) {
    std::ifstream side(path.string() + ".json", std::ios::binary);
    if (!side) throw IoError("missing sidecar " + path.string() + ".json");
    try {
        return nlohmann::json::parse(side).at("fingerprint").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed sidecar for " + path.string() + ": " + e.what());
    }
}

EmbeddingMatrix read_embedding(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EmbeddingMatrix emb;
    emb.rows = decode_embedding(bytes, &emb.kind);
    emb.fingerprint = read_embedding_fingerprint(path);
    return emb;
}

}  // namespace toporag

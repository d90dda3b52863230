#pragma once

#include "toporag/common.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace toporag {

enum class EmbeddingKind : std::uint8_t { proximity = 0, role = 1, text = 2 };

std::string_view to_string(EmbeddingKind kind);
EmbeddingKind parse_embedding_kind(std::string_view name);

/// N x d embedding rows tagged with their kind and the fingerprint of the
/// configuration that produced them.
struct EmbeddingMatrix {
    Matrix rows;
    EmbeddingKind kind = EmbeddingKind::proximity;
    std::string fingerprint;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(rows.cols()); }
};

/// Cosine similarity; 0 when either vector is zero.
double cosine(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

template <typename A, typename B>
double cosine_rows(const A& u, const B& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return u.dot(v) / (nu * nv);
}

/// Binary format: "TPRG", kind byte, N and d as little-endian u64, then N*d
/// little-endian f64 in row-major order. A JSON sidecar (path + ".json")
/// carries the fingerprint.
void write_embedding(const EmbeddingMatrix& emb, const std::filesystem::path& path);
EmbeddingMatrix read_embedding(const std::filesystem::path& path);

/// Sidecar fingerprint without reading the matrix.
std::string read_embedding_fingerprint(const std::filesystem::path& path);

std::string encode_embedding(const Matrix& rows, EmbeddingKind kind);
Matrix decode_embedding(std::string_view bytes, EmbeddingKind* kind = nullptr);

}  // namespace toporag

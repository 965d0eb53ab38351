#pragma once

// Embedding vectors and the arithmetic the retrieval scores are built from.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "refix/common.hpp"

namespace refix {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dims() const { return values.size(); }

    bool is_zero() const {
        for (double v : values)
            if (v != 0.0) return false;
        return true;
    }
};

namespace detail {
inline void require_same_dims(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dims() != v.dims())
        throw Error(ErrorKind::data, "embedding dimension mismatch: " + std::to_string(u.dims()) +
                                         " vs " + std::to_string(v.dims()));
}
}  // namespace detail

inline EmbeddingVector vec_add(const EmbeddingVector& u, const EmbeddingVector& v) {
    detail::require_same_dims(u, v);
    EmbeddingVector out = u;
    for (std::size_t i = 0; i < v.values.size(); ++i) out.values[i] += v.values[i];
    return out;
}

inline EmbeddingVector vec_sub(const EmbeddingVector& u, const EmbeddingVector& v) {
    detail::require_same_dims(u, v);
    EmbeddingVector out = u;
    for (std::size_t i = 0; i < v.values.size(); ++i) out.values[i] -= v.values[i];
    return out;
}

inline double dot(const EmbeddingVector& u, const EmbeddingVector& v) {
    detail::require_same_dims(u, v);
    double s = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) s += u.values[i] * v.values[i];
    return s;
}

inline double l2_norm(const EmbeddingVector& u) { return std::sqrt(dot(u, u)); }

// Zero vectors stay zero (degenerate, surfaced by is_zero()).
inline EmbeddingVector l2_normalized(const EmbeddingVector& u) {
    double n = l2_norm(u);
    if (n == 0.0) return u;
    EmbeddingVector out = u;
    for (double& v : out.values) v /= n;
    return out;
}

// Cosine similarity mapped affinely onto [0,1]: (1 + cos)/2. Either input
// all-zero makes the cosine undefined; the value is pinned to 0.5 and the
// degenerate flag (when provided) is raised.
inline double similarity(const EmbeddingVector& u, const EmbeddingVector& v,
                         bool* degenerate = nullptr) {
    detail::require_same_dims(u, v);
    const double nu = l2_norm(u), nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.5;
    }
    double c = dot(u, v) / (nu * nv);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return (1.0 + c) / 2.0;
}

// ---------------------------------------------------------------------------
// Deterministic offline embedding: hashed token bag. Tokens are maximal runs
// of ASCII alphanumerics; each token lands in bucket fnv1a64(token) % dims and
// the bucket counts are L2-normalized. Depends only on the text and dims.
// ---------------------------------------------------------------------------

inline bool is_token_char(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline EmbeddingVector mock_embed_raw(std::string_view text, std::size_t dims) {
    EmbeddingVector out;
    out.values.assign(dims, 0.0);
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_token_char(text[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && is_token_char(text[i])) ++i;
        std::uint64_t bucket = fnv1a64(text.substr(start, i - start)) % dims;
        out.values[bucket] += 1.0;
    }
    return out;
}

inline EmbeddingVector mock_embed(std::string_view text, std::size_t dims) {
    return l2_normalized(mock_embed_raw(text, dims));
}

}  // namespace refix

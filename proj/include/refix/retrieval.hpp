#pragma once

// Edit-vector index over repair pairs and the two retrieval modes:
// edit-driven retrieval (rank by similarity of the virtually-fixed buggy code
// to each pair's correct code) and re-retrieval after a failed attempt, which
// adds a deviation term steering away from the direction that already failed.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refix/common.hpp"
#include "refix/corpus.hpp"
#include "refix/embedding.hpp"
#include "refix/gateway.hpp"

namespace refix {

struct EditVectorRecord {
    std::string pair_id;
    EmbeddingVector wrong;  // h of the incorrect code
    EmbeddingVector right;  // h of the correct code
    EmbeddingVector edit;   // right - wrong, componentwise
};

struct VectorIndex {
    std::size_t dims = 0;
    std::string backend_id;
    std::map<std::string, std::vector<EditVectorRecord>> by_problem;

    std::size_t record_count() const {
        std::size_t n = 0;
        for (const auto& [pid, recs] : by_problem) n += recs.size();
        return n;
    }
};

inline EmbeddingVector edit_vector(const EmbeddingVector& wrong, const EmbeddingVector& right) {
    return vec_sub(right, wrong);
}

inline VectorIndex build_vector_index(const std::vector<RepairPair>& pairs, ModelGateway& gateway) {
    VectorIndex index;
    index.backend_id = gateway.embedder().id();
    if (pairs.empty()) return index;
    std::vector<std::string> texts;
    texts.reserve(pairs.size() * 2);
    for (const auto& p : pairs) {
        // Fully-comment submissions strip to nothing; a bare newline keeps the
        // batch legal and embeds to the degenerate zero vector.
        texts.push_back(p.wrong_code.empty() ? "\n" : p.wrong_code);
        texts.push_back(p.right_code.empty() ? "\n" : p.right_code);
    }
    std::vector<EmbeddingVector> vectors = gateway.embed_texts(texts);
    index.dims = vectors[0].dims();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        EditVectorRecord rec;
        rec.pair_id = pairs[i].pair_id;
        rec.wrong = std::move(vectors[2 * i]);
        rec.right = std::move(vectors[2 * i + 1]);
        rec.edit = edit_vector(rec.wrong, rec.right);
        index.by_problem[pairs[i].problem_id].push_back(std::move(rec));
    }
    for (auto& [pid, recs] : index.by_problem)
        std::sort(recs.begin(), recs.end(), [](const EditVectorRecord& a, const EditVectorRecord& b) {
            return a.pair_id < b.pair_id;
        });
    return index;
}

struct ScoredPair {
    std::string pair_id;
    double score = 0.0;
};

struct RetrievalResult {
    std::vector<ScoredPair> ranked;  // descending score, ties by ascending pair_id
    bool shortage = false;           // fewer records existed than requested
};

inline double base_score(const EmbeddingVector& buggy, const EditVectorRecord& rec) {
    return similarity(vec_add(buggy, rec.edit), rec.right);
}

inline double deviation(const EmbeddingVector& buggy, const EmbeddingVector& failed,
                        const EditVectorRecord& rec) {
    EmbeddingVector failed_edit = vec_sub(failed, buggy);
    return 1.0 - similarity(vec_add(rec.wrong, failed_edit), rec.right);
}

inline double iterative_score(const EmbeddingVector& buggy, const EmbeddingVector& failed,
                              const EditVectorRecord& rec) {
    return deviation(buggy, failed, rec) + base_score(buggy, rec);
}

namespace detail {

inline const std::vector<EditVectorRecord>& problem_records(const VectorIndex& index,
                                                            const std::string& problem_id) {
    auto it = index.by_problem.find(problem_id);
    if (it == index.by_problem.end() || it->second.empty())
        throw Error(ErrorKind::data, "no candidate pairs indexed for problem " + problem_id);
    return it->second;
}

template <typename ScoreFn>
RetrievalResult rank_top_k(const std::vector<EditVectorRecord>& records, std::size_t k,
                           ScoreFn&& score_of) {
    if (k < 1) throw Error(ErrorKind::config, "k must be at least 1");
    RetrievalResult result;
    result.ranked.reserve(records.size());
    for (const auto& rec : records) result.ranked.push_back({rec.pair_id, score_of(rec)});
    std::sort(result.ranked.begin(), result.ranked.end(),
              [](const ScoredPair& a, const ScoredPair& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.pair_id < b.pair_id;
              });
    if (result.ranked.size() > k)
        result.ranked.resize(k);
    else if (result.ranked.size() < k)
        result.shortage = true;
    return result;
}

}  // namespace detail

inline RetrievalResult base_retrieve(const VectorIndex& index, const EmbeddingVector& buggy,
                                     const std::string& problem_id, std::size_t k) {
    const auto& records = detail::problem_records(index, problem_id);
    return detail::rank_top_k(records, k,
                              [&](const EditVectorRecord& rec) { return base_score(buggy, rec); });
}

inline RetrievalResult iterative_retrieve(const VectorIndex& index, const EmbeddingVector& buggy,
                                          const EmbeddingVector& failed,
                                          const std::string& problem_id, std::size_t k) {
    const auto& records = detail::problem_records(index, problem_id);
    return detail::rank_top_k(records, k, [&](const EditVectorRecord& rec) {
        return iterative_score(buggy, failed, rec);
    });
}

// ---------------------------------------------------------------------------
// Persistence: binary record file plus a JSON manifest resolving hashed ids.
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kIndexMagic[8] = {'R', 'F', 'X', 'I', 'D', 'X', '0', '1'};

template <typename T>
void write_pod(std::string& out, const T& value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T read_pod(const std::string& data, std::size_t& offset) {
    if (offset + sizeof(T) > data.size())
        throw Error(ErrorKind::data, "truncated index file");
    T value;
    std::memcpy(&value, data.data() + offset, sizeof(T));
    offset += sizeof(T);
    return value;
}

inline void write_vector(std::string& out, const EmbeddingVector& v) {
    for (double x : v.values) write_pod(out, x);
}

inline EmbeddingVector read_vector(const std::string& data, std::size_t& offset,
                                   std::size_t dims) {
    EmbeddingVector v;
    v.values.reserve(dims);
    for (std::size_t i = 0; i < dims; ++i) v.values.push_back(read_pod<double>(data, offset));
    return v;
}

}  // namespace detail

inline void save_index(const VectorIndex& index, const std::filesystem::path& path) {
    std::string out;
    out.append(detail::kIndexMagic, sizeof detail::kIndexMagic);
    detail::write_pod(out, static_cast<std::uint32_t>(index.dims));
    detail::write_pod(out, static_cast<std::uint32_t>(index.backend_id.size()));
    out += index.backend_id;
    detail::write_pod(out, static_cast<std::uint64_t>(index.record_count()));

    nlohmann::json manifest{{"backend_id", index.backend_id},
                            {"dims", index.dims},
                            {"records", nlohmann::json::object()}};
    for (const auto& [problem_id, records] : index.by_problem) {
        for (const auto& rec : records) {
            const std::uint64_t id_hash = fnv1a64(rec.pair_id);
            detail::write_pod(out, id_hash);
            detail::write_vector(out, rec.wrong);
            detail::write_vector(out, rec.right);
            detail::write_vector(out, rec.edit);
            manifest["records"][hex64(id_hash)] = {{"pair_id", rec.pair_id},
                                                   {"problem_id", problem_id}};
        }
    }
    atomic_write_file(path, out);
    atomic_write_file(path.string() + ".manifest.json", manifest.dump(2) + "\n");
}

inline VectorIndex load_index(const std::filesystem::path& path) {
    const std::string data = read_text_file(path);
    std::size_t offset = 0;
    if (data.size() < sizeof detail::kIndexMagic ||
        std::memcmp(data.data(), detail::kIndexMagic, sizeof detail::kIndexMagic) != 0)
        throw Error(ErrorKind::data, "not an index file: " + path.string());
    offset = sizeof detail::kIndexMagic;

    VectorIndex index;
    index.dims = detail::read_pod<std::uint32_t>(data, offset);
    const auto backend_len = detail::read_pod<std::uint32_t>(data, offset);
    if (offset + backend_len > data.size())
        throw Error(ErrorKind::data, "truncated index file");
    index.backend_id = data.substr(offset, backend_len);
    offset += backend_len;
    const auto record_count = detail::read_pod<std::uint64_t>(data, offset);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text_file(path.string() + ".manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::data, std::string("bad index manifest: ") + e.what());
    }
    const auto& names = manifest.at("records");

    for (std::uint64_t i = 0; i < record_count; ++i) {
        const std::uint64_t id_hash = detail::read_pod<std::uint64_t>(data, offset);
        EditVectorRecord rec;
        rec.wrong = detail::read_vector(data, offset, index.dims);
        rec.right = detail::read_vector(data, offset, index.dims);
        rec.edit = detail::read_vector(data, offset, index.dims);
        const std::string key = hex64(id_hash);
        if (!names.contains(key))
            throw Error(ErrorKind::data, "index manifest is missing record " + key);
        rec.pair_id = names[key].at("pair_id").get<std::string>();
        index.by_problem[names[key].at("problem_id").get<std::string>()].push_back(std::move(rec));
    }
    if (offset != data.size())
        throw Error(ErrorKind::data, "trailing bytes in index file");
    for (auto& [pid, recs] : index.by_problem)
        std::sort(recs.begin(), recs.end(), [](const EditVectorRecord& a, const EditVectorRecord& b) {
            return a.pair_id < b.pair_id;
        });
    return index;
}

}  // namespace refix

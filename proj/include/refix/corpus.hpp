#pragma once

// Corpus ingestion and construction of the repair-pair retrieval database:
// per-user submission histories are mined for (incorrect, later-correct) pairs
// and the most line-consistent pair per user and problem is admitted.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "refix/common.hpp"
#include "refix/diff.hpp"
#include "refix/strip.hpp"

namespace refix {

struct TestCase {
    std::string input;
    std::string expected_output;
};

struct Problem {
    std::string id;
    std::string statement;
    std::vector<TestCase> test_cases;
};

enum class Verdict { correct, incorrect };

struct Submission {
    std::string user_id;
    std::string problem_id;
    std::int64_t timestamp = 0;
    Verdict verdict = Verdict::incorrect;
    std::string code;
    std::string language_tag;
};

struct RepairPair {
    std::string pair_id;
    std::string user_id;
    std::string problem_id;
    std::string wrong_code;    // comment-stripped
    std::string right_code;    // comment-stripped
    double consistency = 0.0;
    std::string language_tag;
    std::int64_t wrong_timestamp = 0;
    std::int64_t right_timestamp = 0;
};

struct CorpusStore {
    std::map<std::string, Problem> problems;
    // (user_id, problem_id) -> submissions sorted ascending by timestamp,
    // ties kept in original record order.
    std::map<std::pair<std::string, std::string>, std::vector<Submission>> sequences;
    std::size_t submission_count = 0;
    std::size_t skipped_records = 0;
};

namespace detail {

// Accepts an integer, a digit string, or an ISO-8601 UTC instant.
inline std::optional<std::int64_t> parse_timestamp(const nlohmann::json& value) {
    if (value.is_number_integer()) return value.get<std::int64_t>();
    if (!value.is_string()) return std::nullopt;
    const std::string s = value.get<std::string>();
    if (s.empty()) return std::nullopt;
    if (s.find_first_not_of("0123456789") == std::string::npos) {
        try {
            return std::stoll(s);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    std::tm tm{};
    int year, mon, day, hour, min, sec;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%*1[T ]%2d:%2d:%2d", &year, &mon, &day, &hour, &min,
                    &sec) != 6)
        return std::nullopt;
    tm.tm_year = year - 1900;
    tm.tm_mon = mon - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = min;
    tm.tm_sec = sec;
    return static_cast<std::int64_t>(timegm(&tm));
}

inline std::optional<Problem> parse_problem(const nlohmann::json& rec,
                                            const std::filesystem::path& base_dir) {
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) return std::nullopt;
    Problem p;
    p.id = rec["id"].get<std::string>();
    if (p.id.empty()) return std::nullopt;
    p.statement = rec.value("statement", std::string());
    if (rec.contains("testcases")) {
        if (!rec["testcases"].is_array()) return std::nullopt;
        for (const auto& tc : rec["testcases"]) {
            if (!tc.is_object() || !tc.contains("input") || !tc.contains("output"))
                return std::nullopt;
            p.test_cases.push_back(
                {tc["input"].get<std::string>(), tc["output"].get<std::string>()});
        }
    } else if (rec.contains("testcase_dir")) {
        if (!rec["testcase_dir"].is_string()) return std::nullopt;
        const auto dir = base_dir / rec["testcase_dir"].get<std::string>();
        if (!std::filesystem::is_directory(dir)) return std::nullopt;
        std::vector<std::filesystem::path> inputs;
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.path().extension() == ".in") inputs.push_back(entry.path());
        std::sort(inputs.begin(), inputs.end());
        for (const auto& in_path : inputs) {
            auto out_path = in_path;
            out_path.replace_extension(".out");
            if (!std::filesystem::exists(out_path)) return std::nullopt;
            p.test_cases.push_back({read_text_file(in_path), read_text_file(out_path)});
        }
    }
    return p;
}

inline std::optional<Submission> parse_submission(const nlohmann::json& rec) {
    if (!rec.is_object()) return std::nullopt;
    for (const char* field : {"user_id", "problem_id", "verdict", "code", "language"})
        if (!rec.contains(field) || !rec[field].is_string()) return std::nullopt;
    if (!rec.contains("timestamp")) return std::nullopt;
    auto ts = parse_timestamp(rec["timestamp"]);
    if (!ts) return std::nullopt;
    Submission s;
    s.user_id = rec["user_id"].get<std::string>();
    s.problem_id = rec["problem_id"].get<std::string>();
    s.timestamp = *ts;
    const std::string verdict = rec["verdict"].get<std::string>();
    if (verdict == "correct")
        s.verdict = Verdict::correct;
    else if (verdict == "incorrect")
        s.verdict = Verdict::incorrect;
    else
        return std::nullopt;
    s.code = rec["code"].get<std::string>();
    s.language_tag = rec["language"].get<std::string>();
    if (s.user_id.empty() || s.problem_id.empty()) return std::nullopt;
    return s;
}

template <typename RecordFn>
void for_each_jsonl_record(const std::filesystem::path& path, std::size_t& skipped,
                           RecordFn&& on_record) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::data, "cannot read " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (strip(line).empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            ++skipped;
            continue;
        }
        on_record(rec);
    }
}

}  // namespace detail

inline CorpusStore ingest_corpus(const std::filesystem::path& problems_path,
                                 const std::filesystem::path& submissions_path) {
    CorpusStore store;
    const auto base_dir = problems_path.parent_path();
    detail::for_each_jsonl_record(problems_path, store.skipped_records, [&](const auto& rec) {
        auto problem = detail::parse_problem(rec, base_dir);
        if (!problem) {
            ++store.skipped_records;
            return;
        }
        if (store.problems.count(problem->id))
            throw Error(ErrorKind::data, "duplicate problem id: " + problem->id);
        store.problems.emplace(problem->id, std::move(*problem));
    });
    detail::for_each_jsonl_record(submissions_path, store.skipped_records, [&](const auto& rec) {
        auto submission = detail::parse_submission(rec);
        if (!submission) {
            ++store.skipped_records;
            return;
        }
        auto key = std::make_pair(submission->user_id, submission->problem_id);
        store.sequences[key].push_back(std::move(*submission));
        ++store.submission_count;
    });
    for (auto& [key, seq] : store.sequences)
        std::stable_sort(seq.begin(), seq.end(),
                         [](const Submission& a, const Submission& b) {
                             return a.timestamp < b.timestamp;
                         });
    return store;
}

// Directory form: expects problems.jsonl and submissions.jsonl inside.
inline CorpusStore ingest_corpus(const std::filesystem::path& dir) {
    return ingest_corpus(dir / "problems.jsonl", dir / "submissions.jsonl");
}

inline std::map<std::string, Problem> load_problems_jsonl(const std::filesystem::path& path,
                                                          std::size_t* skipped = nullptr) {
    std::map<std::string, Problem> problems;
    std::size_t local_skipped = 0;
    const auto base_dir = path.parent_path();
    detail::for_each_jsonl_record(path, local_skipped, [&](const auto& rec) {
        auto problem = detail::parse_problem(rec, base_dir);
        if (!problem) {
            ++local_skipped;
            return;
        }
        if (problems.count(problem->id))
            throw Error(ErrorKind::data, "duplicate problem id: " + problem->id);
        problems.emplace(problem->id, std::move(*problem));
    });
    if (skipped) *skipped = local_skipped;
    return problems;
}

// All (wrong, right) index pairs where the right submission is correct and
// strictly later than the incorrect one. `seq` must be sorted by timestamp.
inline std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(
    const std::vector<Submission>& seq) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t w = 0; w < seq.size(); ++w) {
        if (seq[w].verdict != Verdict::incorrect) continue;
        for (std::size_t r = w + 1; r < seq.size(); ++r) {
            if (seq[r].verdict != Verdict::correct) continue;
            if (seq[r].timestamp > seq[w].timestamp) out.emplace_back(w, r);
        }
    }
    return out;
}

inline std::string make_pair_id(const std::string& user_id, const std::string& problem_id,
                                std::int64_t wrong_timestamp, std::int64_t right_timestamp) {
    return content_hash(user_id + '\x1f' + problem_id + '\x1f' +
                        std::to_string(wrong_timestamp) + '\x1f' +
                        std::to_string(right_timestamp));
}

struct RetrievalDbBuild {
    std::vector<RepairPair> pairs;
    std::size_t unsupported_language_records = 0;
    std::size_t unscorable_candidates = 0;  // right code empty after canonicalization
};

// Keeps, per (user, problem), the candidate pair with the highest consistency
// score, admitted only at or above the threshold. Codes are stored stripped.
inline RetrievalDbBuild build_retrieval_db(const CorpusStore& store, double threshold,
                                           const ScoreOptions& opts = {}) {
    if (threshold < 0.0 || threshold > 1.0)
        throw Error(ErrorKind::config, "threshold must lie in [0,1]");
    RetrievalDbBuild result;
    for (const auto& [key, seq] : store.sequences) {
        std::vector<std::string> stripped(seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            StripResult sr = strip_comments(seq[i].code, seq[i].language_tag);
            if (!sr.supported) ++result.unsupported_language_records;
            stripped[i] = std::move(sr.code);
        }
        bool have_best = false;
        double best_score = 0.0;
        std::size_t best_w = 0, best_r = 0;
        for (auto [w, r] : candidate_pairs(seq)) {
            double score;
            try {
                score = consistency_score(stripped[w], stripped[r], opts);
            } catch (const Error&) {
                ++result.unscorable_candidates;
                continue;
            }
            const bool better =
                !have_best || score > best_score ||
                (score == best_score &&
                 (seq[r].timestamp < seq[best_r].timestamp ||
                  (seq[r].timestamp == seq[best_r].timestamp &&
                   seq[w].timestamp < seq[best_w].timestamp)));
            if (better) {
                have_best = true;
                best_score = score;
                best_w = w;
                best_r = r;
            }
        }
        if (!have_best || best_score < threshold) continue;
        RepairPair pair;
        pair.user_id = key.first;
        pair.problem_id = key.second;
        pair.wrong_code = stripped[best_w];
        pair.right_code = stripped[best_r];
        pair.consistency = best_score;
        pair.language_tag = seq[best_r].language_tag;
        pair.wrong_timestamp = seq[best_w].timestamp;
        pair.right_timestamp = seq[best_r].timestamp;
        pair.pair_id = make_pair_id(pair.user_id, pair.problem_id, pair.wrong_timestamp,
                                    pair.right_timestamp);
        result.pairs.push_back(std::move(pair));
    }
    std::sort(result.pairs.begin(), result.pairs.end(),
              [](const RepairPair& a, const RepairPair& b) {
                  return std::tie(a.problem_id, a.user_id) < std::tie(b.problem_id, b.user_id);
              });
    return result;
}

inline void write_pairs_jsonl(const std::filesystem::path& path,
                              const std::vector<RepairPair>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        nlohmann::json rec{{"pair_id", p.pair_id},
                           {"user_id", p.user_id},
                           {"problem_id", p.problem_id},
                           {"c_w", p.wrong_code},
                           {"c_r", p.right_code},
                           {"consistency", p.consistency},
                           {"language", p.language_tag},
                           {"wrong_timestamp", p.wrong_timestamp},
                           {"right_timestamp", p.right_timestamp}};
        out += rec.dump();
        out += '\n';
    }
    atomic_write_file(path, out);
}

inline std::vector<RepairPair> read_pairs_jsonl(const std::filesystem::path& path) {
    std::vector<RepairPair> pairs;
    std::size_t line_no = 0;
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::data, "cannot read " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        try {
            nlohmann::json rec = nlohmann::json::parse(line);
            RepairPair p;
            p.pair_id = rec.at("pair_id").get<std::string>();
            p.user_id = rec.at("user_id").get<std::string>();
            p.problem_id = rec.at("problem_id").get<std::string>();
            p.wrong_code = rec.at("c_w").get<std::string>();
            p.right_code = rec.at("c_r").get<std::string>();
            p.consistency = rec.at("consistency").get<double>();
            p.language_tag = rec.value("language", std::string());
            p.wrong_timestamp = rec.value("wrong_timestamp", std::int64_t{0});
            p.right_timestamp = rec.value("right_timestamp", std::int64_t{0});
            pairs.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::data, path.string() + ":" + std::to_string(line_no) +
                                             ": bad repair pair: " + e.what());
        }
    }
    return pairs;
}

inline std::map<std::string, std::vector<RepairPair>> group_pairs_by_problem(
    const std::vector<RepairPair>& pairs) {
    std::map<std::string, std::vector<RepairPair>> grouped;
    for (const auto& p : pairs) grouped[p.problem_id].push_back(p);
    return grouped;
}

}  // namespace refix

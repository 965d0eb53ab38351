#pragma once

// Bug-description evaluation: an LLM judge decides whether two description
// points refer to the same bug, a one-to-one matching turns the pairwise
// answers into TP counts, and per-sample precision/recall/f1 are macro
// averaged. Samples whose repaired code fails any test score zero.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refix/common.hpp"
#include "refix/corpus.hpp"
#include "refix/gateway.hpp"
#include "refix/generation.hpp"

namespace refix {

inline constexpr std::string_view kDefaultMatchTemplate =
    R"(Two bug descriptions for the same buggy program are given. Decide whether they refer to the same underlying bug. Answer with the single word YES or NO.

Programming Task:
{problem_statement}

Buggy Code:
```
{code}
```

Description A:
{description_a}

Description B:
{description_b}

Do Description A and Description B refer to the same bug? Answer YES or NO.
)";

struct MatchOptions {
    std::string template_text = std::string(kDefaultMatchTemplate);
    double temperature = 0.0;
    bool greedy = false;  // first-fit row-order matching instead of maximum
};

struct MatchAnswer {
    int value = 0;            // 1 = same bug
    bool format_error = false;  // judge would not answer YES/NO
};

namespace detail {

inline std::optional<int> parse_yes_no(const std::string& response) {
    std::string token;
    for (char c : strip(response)) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') break;
        token += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    while (!token.empty() && (token.back() == '.' || token.back() == ',' || token.back() == '!'))
        token.pop_back();
    if (token == "YES") return 1;
    if (token == "NO") return 0;
    return std::nullopt;
}

}  // namespace detail

// Identical texts match without consulting the judge; everything else is one
// judge call, reprompted once with a stricter closing line if the answer is
// not a plain YES/NO.
inline MatchAnswer match_pair(ModelGateway& gateway, const Problem& problem,
                              const std::string& buggy_code, const std::string& a,
                              const std::string& b, const MatchOptions& options = {}) {
    if (a.empty() || b.empty())
        throw Error(ErrorKind::usage, "descriptions must be non-empty");
    if (a == b) return {1, false};
    ChatRequest request;
    request.user_text = substitute(options.template_text, {{"problem_statement", problem.statement},
                                                           {"code", buggy_code},
                                                           {"description_a", a},
                                                           {"description_b", b}});
    request.temperature = options.temperature;
    if (auto parsed = detail::parse_yes_no(gateway.chat(request))) return {*parsed, false};
    // A repeat of the identical request would replay the cached reply, so the
    // reprompt appends a stricter instruction.
    request.user_text += "\nAnswer strictly with the single word YES or NO.";
    if (auto parsed = detail::parse_yes_no(gateway.chat(request))) return {*parsed, false};
    return {0, true};
}

inline std::vector<std::pair<std::size_t, std::size_t>> max_bipartite_matching(
    const std::vector<std::vector<int>>& entries) {
    const std::size_t u = entries.size();
    const std::size_t v = u == 0 ? 0 : entries[0].size();
    std::vector<int> row_of_col(v, -1);
    std::vector<char> visited;
    auto augment = [&](auto&& self, std::size_t row) -> bool {
        for (std::size_t j = 0; j < v; ++j) {
            if (!entries[row][j] || visited[j]) continue;
            visited[j] = 1;
            if (row_of_col[j] < 0 || self(self, static_cast<std::size_t>(row_of_col[j]))) {
                row_of_col[j] = static_cast<int>(row);
                return true;
            }
        }
        return false;
    };
    for (std::size_t i = 0; i < u; ++i) {
        visited.assign(v, 0);
        augment(augment, i);
    }
    std::vector<std::pair<std::size_t, std::size_t>> matching;
    for (std::size_t j = 0; j < v; ++j)
        if (row_of_col[j] >= 0) matching.push_back({static_cast<std::size_t>(row_of_col[j]), j});
    std::sort(matching.begin(), matching.end());
    return matching;
}

inline std::vector<std::pair<std::size_t, std::size_t>> greedy_matching(
    const std::vector<std::vector<int>>& entries) {
    std::vector<std::pair<std::size_t, std::size_t>> matching;
    if (entries.empty()) return matching;
    std::vector<char> col_used(entries[0].size(), 0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (std::size_t j = 0; j < entries[i].size(); ++j) {
            if (entries[i][j] && !col_used[j]) {
                col_used[j] = 1;
                matching.push_back({i, j});
                break;
            }
        }
    }
    return matching;
}

struct MatchMatrix {
    std::size_t u = 0;  // ground-truth count
    std::size_t v = 0;  // generated count
    std::vector<std::vector<int>> entries;
    std::vector<std::pair<std::size_t, std::size_t>> matching;
    std::size_t judge_format_errors = 0;
};

inline MatchMatrix match_sets(ModelGateway& gateway, const Problem& problem,
                              const std::string& buggy_code,
                              const std::vector<std::string>& ground_truth,
                              const std::vector<std::string>& generated,
                              const MatchOptions& options = {}) {
    if (ground_truth.empty())
        throw Error(ErrorKind::usage, "ground-truth description set must be non-empty");
    MatchMatrix matrix;
    matrix.u = ground_truth.size();
    matrix.v = generated.size();
    matrix.entries.assign(matrix.u, std::vector<int>(matrix.v, 0));
    for (std::size_t i = 0; i < matrix.u; ++i) {
        for (std::size_t j = 0; j < matrix.v; ++j) {
            MatchAnswer answer =
                match_pair(gateway, problem, buggy_code, ground_truth[i], generated[j], options);
            matrix.entries[i][j] = answer.value;
            if (answer.format_error) ++matrix.judge_format_errors;
        }
    }
    matrix.matching = options.greedy ? greedy_matching(matrix.entries)
                                     : max_bipartite_matching(matrix.entries);
    return matrix;
}

struct SampleScore {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool gated = false;
};

inline SampleScore sample_score(const MatchMatrix& matrix, bool repaired_all_pass) {
    SampleScore score;
    if (!repaired_all_pass) {
        score.gated = true;
        score.tp = 0;
        score.fp = matrix.v;
        score.fn = matrix.u;
        return score;
    }
    score.tp = matrix.matching.size();
    score.fp = matrix.v - score.tp;
    score.fn = matrix.u - score.tp;
    if (matrix.v == 0)
        score.precision = matrix.u == 0 ? 1.0 : 0.0;
    else
        score.precision = static_cast<double>(score.tp) / static_cast<double>(matrix.v);
    if (matrix.u == 0)
        score.recall = matrix.v == 0 ? 1.0 : 0.0;
    else
        score.recall = static_cast<double>(score.tp) / static_cast<double>(matrix.u);
    const double denom = score.precision + score.recall;
    score.f1 = denom == 0.0 ? 0.0 : 2.0 * score.precision * score.recall / denom;
    return score;
}

struct DescriptionAggregate {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline DescriptionAggregate aggregate(const std::vector<SampleScore>& scores) {
    if (scores.empty())
        throw Error(ErrorKind::metric, "description aggregate over zero samples is undefined");
    DescriptionAggregate agg;
    for (const auto& s : scores) {
        agg.precision += s.precision;
        agg.recall += s.recall;
        agg.f1 += s.f1;
    }
    const auto n = static_cast<double>(scores.size());
    agg.precision /= n;
    agg.recall /= n;
    agg.f1 /= n;
    return agg;
}

}  // namespace refix

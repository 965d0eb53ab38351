#pragma once

// Line-based diffing: LCS edit scripts, the preserved-line consistency score,
// and unified-diff rendering for prompt contexts.

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "refix/common.hpp"

namespace refix {

enum class LineOpKind { keep, del, ins };

struct LineOp {
    LineOpKind kind;
    std::string text;
};

// Replaying keeps+dels reproduces the before lines; keeps+inss the after lines.
struct DiffScript {
    std::vector<LineOp> ops;
};

namespace detail {

// Intern lines so the DP compares ints.
inline std::pair<std::vector<int>, std::vector<int>> intern_lines(
    const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::unordered_map<std::string_view, int> ids;
    ids.reserve(a.size() + b.size());
    auto intern = [&](const std::vector<std::string>& lines) {
        std::vector<int> out;
        out.reserve(lines.size());
        for (const auto& l : lines) {
            auto [it, inserted] = ids.emplace(l, static_cast<int>(ids.size()));
            out.push_back(it->second);
        }
        return out;
    };
    std::vector<int> ia = intern(a);
    std::vector<int> ib = intern(b);
    return {std::move(ia), std::move(ib)};
}

}  // namespace detail

// LCS edit script via the classic quadratic DP. Deterministic: on backtrack
// ties an insert is taken before a delete, which groups each change region as
// deletions followed by insertions when read forward.
inline DiffScript line_diff_lines(const std::vector<std::string>& before,
                                  const std::vector<std::string>& after) {
    const auto [a, b] = detail::intern_lines(before, after);
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::uint32_t> dp((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return dp[i * (m + 1) + j]; };
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            at(i, j) = a[i - 1] == b[j - 1] ? at(i - 1, j - 1) + 1
                                            : std::max(at(i - 1, j), at(i, j - 1));

    std::vector<LineOp> rev;
    rev.reserve(n + m);
    std::size_t i = n, j = m;
    while (i > 0 && j > 0) {
        if (a[i - 1] == b[j - 1]) {
            rev.push_back({LineOpKind::keep, before[i - 1]});
            --i;
            --j;
        } else if (at(i - 1, j) > at(i, j - 1)) {
            rev.push_back({LineOpKind::del, before[i - 1]});
            --i;
        } else {
            rev.push_back({LineOpKind::ins, after[j - 1]});
            --j;
        }
    }
    while (i > 0) rev.push_back({LineOpKind::del, before[--i]});
    while (j > 0) rev.push_back({LineOpKind::ins, after[--j]});
    std::reverse(rev.begin(), rev.end());
    return DiffScript{std::move(rev)};
}

inline DiffScript line_diff(std::string_view before, std::string_view after) {
    return line_diff_lines(split_lines(before), split_lines(after));
}

inline std::size_t preserved_line_count(const DiffScript& script) {
    std::size_t keeps = 0;
    for (const auto& op : script.ops)
        if (op.kind == LineOpKind::keep) ++keeps;
    return keeps;
}

// ---------------------------------------------------------------------------
// Consistency score: preserved lines of the fix over its total line count.
// ---------------------------------------------------------------------------

struct ScoreOptions {
    bool drop_blank_lines = true;  // count code lines only (sensitivity knob)
};

inline std::vector<std::string> canonical_score_lines(std::string_view text,
                                                      const ScoreOptions& opts = {}) {
    std::vector<std::string> out;
    for (const auto& line : split_lines(text)) {
        std::string t = rstrip(line);
        if (opts.drop_blank_lines && t.empty()) continue;
        out.push_back(std::move(t));
    }
    return out;
}

inline double consistency_score(std::string_view c_w, std::string_view c_r,
                                const ScoreOptions& opts = {}) {
    const auto wl = canonical_score_lines(c_w, opts);
    const auto rl = canonical_score_lines(c_r, opts);
    if (rl.empty())
        throw Error(ErrorKind::metric, "consistency undefined: correct code has no lines");
    const auto script = line_diff_lines(wl, rl);
    return static_cast<double>(preserved_line_count(script)) / static_cast<double>(rl.size());
}

// ---------------------------------------------------------------------------
// Unified diff rendering.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kNoChangesSentinel = "(no changes)\n";

namespace detail {

inline std::string format_range(std::size_t start, std::size_t count) {
    if (count == 1) return std::to_string(start);
    return std::to_string(start) + "," + std::to_string(count);
}

}  // namespace detail

// Standard unified-diff text: ---/+++ headers, @@ hunk ranges, `context_lines`
// lines of context. Inputs are treated as newline-terminated line sequences.
// Identical inputs yield the explicit no-changes sentinel.
inline std::string render_unified_diff(std::string_view c_w, std::string_view c_r,
                                       int context_lines = 3,
                                       std::string_view label_before = "a/code",
                                       std::string_view label_after = "b/code") {
    const DiffScript script = line_diff(c_w, c_r);
    bool any_change = false;
    for (const auto& op : script.ops)
        if (op.kind != LineOpKind::keep) any_change = true;
    if (!any_change) return std::string(kNoChangesSentinel);

    const std::size_t ctx = context_lines < 0 ? 0 : static_cast<std::size_t>(context_lines);
    const auto& ops = script.ops;

    // A hunk covers change runs separated by at most 2*ctx keeps.
    struct Hunk {
        std::size_t first_op, last_op;  // inclusive op-index range
    };
    std::vector<Hunk> hunks;
    std::size_t idx = 0;
    while (idx < ops.size()) {
        if (ops[idx].kind == LineOpKind::keep) {
            ++idx;
            continue;
        }
        Hunk h{idx, idx};
        std::size_t scan = idx;
        while (scan < ops.size()) {
            if (ops[scan].kind != LineOpKind::keep) {
                h.last_op = scan;
                ++scan;
                continue;
            }
            std::size_t keep_run = 0;
            while (scan + keep_run < ops.size() && ops[scan + keep_run].kind == LineOpKind::keep)
                ++keep_run;
            if (scan + keep_run >= ops.size() || keep_run > 2 * ctx) break;
            scan += keep_run;  // keeps bridge to the next change run
        }
        h.first_op = h.first_op >= ctx ? h.first_op - ctx : 0;
        h.last_op = std::min(h.last_op + ctx, ops.size() - 1);
        hunks.push_back(h);
        idx = h.last_op + 1;
    }

    std::string out;
    out += "--- ";
    out += label_before;
    out += '\n';
    out += "+++ ";
    out += label_after;
    out += '\n';

    std::size_t old_line = 0, new_line = 0;  // lines consumed before current op
    std::size_t op_pos = 0;
    for (const auto& h : hunks) {
        while (op_pos < h.first_op) {
            if (ops[op_pos].kind != LineOpKind::ins) ++old_line;
            if (ops[op_pos].kind != LineOpKind::del) ++new_line;
            ++op_pos;
        }
        std::size_t old_count = 0, new_count = 0;
        for (std::size_t k = h.first_op; k <= h.last_op; ++k) {
            if (ops[k].kind != LineOpKind::ins) ++old_count;
            if (ops[k].kind != LineOpKind::del) ++new_count;
        }
        const std::size_t old_start = old_count == 0 ? old_line : old_line + 1;
        const std::size_t new_start = new_count == 0 ? new_line : new_line + 1;
        out += "@@ -" + detail::format_range(old_start, old_count) + " +" +
               detail::format_range(new_start, new_count) + " @@\n";
        for (std::size_t k = h.first_op; k <= h.last_op; ++k) {
            switch (ops[k].kind) {
                case LineOpKind::keep: out += ' '; break;
                case LineOpKind::del: out += '-'; break;
                case LineOpKind::ins: out += '+'; break;
            }
            out += ops[k].text;
            out += '\n';
            if (ops[k].kind != LineOpKind::ins) ++old_line;
            if (ops[k].kind != LineOpKind::del) ++new_line;
        }
        op_pos = h.last_op + 1;
    }
    return out;
}

}  // namespace refix

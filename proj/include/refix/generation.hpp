#pragma once

// Reference-context assembly and solution generation: render retrieved pairs
// as annotated diffs, build the repair prompt, call the chat backend, and
// parse the reply into fixed code plus point-wise bug descriptions.

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "refix/common.hpp"
#include "refix/corpus.hpp"
#include "refix/diff.hpp"
#include "refix/gateway.hpp"

namespace refix {

struct SolutionContext {
    std::string pair_id;
    std::string diff_text;
    std::string description;
};

struct GeneratedSolution {
    std::string fixed_code;
    std::vector<std::string> descriptions;
    std::string raw_response;
    std::vector<std::string> parse_warnings;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::string raw)
        : Error(ErrorKind::parse, message), raw_response_(std::move(raw)) {}
    const std::string& raw_response() const { return raw_response_; }

private:
    std::string raw_response_;
};

// ---------------------------------------------------------------------------
// Prompt templates. Plain text with {placeholder} substitution; the embedded
// defaults are used unless a template file overrides them.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDefaultRepairTemplate =
    R"(You are a skilled programmer experienced in debugging and providing optimal code fixes. Given a programming problem and a piece of buggy code, you are required to perform the following tasks:
1. Fix the Buggy Code: fix the buggy code to meet the problem's requirements, ensuring that the changes are minimal to preserve the original structure and logic as much as possible.
2. Provide Bug Descriptions: provide clear and complete point-by-point descriptions of the bugs present in the buggy code.

Answer in exactly this format: first one fenced code block containing the complete fixed program, then a heading `Bug Descriptions:`, then a numbered list with one point per bug.

Programming Task:
{problem_statement}

The top-k program repairs for reference:
{references}

Buggy Code:
```
{buggy_code}
```
)";

inline constexpr std::string_view kDefaultDescribeTemplate =
    R"(A learner submitted incorrect code for the programming task below and later corrected it. Compare the two versions and describe, point by point, the bugs present in the incorrect version. Focus on the underlying cause of each bug, not on how to fix it.

Programming Task:
{problem_statement}

Incorrect Code:
```
{wrong_code}
```

Corrected Code:
```
{right_code}
```

Answer with a numbered list, one point per bug.
)";

struct PromptTemplates {
    std::string repair = std::string(kDefaultRepairTemplate);
    std::string describe = std::string(kDefaultDescribeTemplate);
};

inline std::string substitute(std::string text,
                              const std::map<std::string, std::string>& values) {
    for (const auto& [name, value] : values) {
        const std::string needle = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = text.find(needle, pos)) != std::string::npos) {
            text.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return text;
}

// ---------------------------------------------------------------------------
// List-item extraction, shared by response parsing and diff annotation.
// ---------------------------------------------------------------------------

namespace detail {

// Returns the offset just past a list marker ("1." / "1)" / "-" / "*"), or
// npos if the line starts no list item.
inline std::size_t list_marker_end(const std::string& line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) return std::string::npos;
    if (line[i] == '-' || line[i] == '*') {
        if (i + 1 < line.size() && line[i + 1] == ' ') return i + 2;
        return std::string::npos;
    }
    std::size_t j = i;
    while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
    if (j == i || j >= line.size()) return std::string::npos;
    if (line[j] != '.' && line[j] != ')') return std::string::npos;
    ++j;
    if (j < line.size() && line[j] == ' ') ++j;
    return j;
}

inline std::vector<std::string> extract_list_items(const std::vector<std::string>& lines) {
    std::vector<std::string> items;
    bool in_item = false;
    for (const auto& line : lines) {
        const std::size_t body = list_marker_end(line);
        if (body != std::string::npos) {
            items.push_back(strip(line.substr(body)));
            in_item = true;
        } else if (is_blank(line)) {
            in_item = false;
        } else if (in_item) {
            items.back() += " " + strip(line);
        }
    }
    items.erase(std::remove_if(items.begin(), items.end(),
                               [](const std::string& s) { return s.empty(); }),
                items.end());
    return items;
}

inline bool contains_ci(const std::string& haystack, std::string_view needle) {
    return lowercase(haystack).find(lowercase(std::string(needle))) != std::string::npos;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Context rendering: the pair's diff with its description woven in as
// comment lines above hunk headers.
// ---------------------------------------------------------------------------

// One comment line per description point above its hunk when the point count
// matches the hunk count; otherwise the whole description above the first hunk.
inline std::string annotate_diff(const std::string& diff_text, const std::string& description) {
    std::vector<std::string> diff_lines = split_lines(diff_text);
    std::vector<std::size_t> hunk_positions;
    for (std::size_t i = 0; i < diff_lines.size(); ++i)
        if (diff_lines[i].rfind("@@", 0) == 0) hunk_positions.push_back(i);

    std::vector<std::string> points = detail::extract_list_items(split_lines(description));
    std::vector<std::pair<std::size_t, std::vector<std::string>>> insertions;
    if (!hunk_positions.empty() && points.size() == hunk_positions.size()) {
        for (std::size_t i = 0; i < points.size(); ++i)
            insertions.push_back({hunk_positions[i], {"# bug: " + points[i]}});
    } else {
        std::vector<std::string> block;
        for (const auto& line : split_lines(description))
            if (!is_blank(line)) block.push_back("# bug: " + strip(line));
        const std::size_t at = hunk_positions.empty() ? 0 : hunk_positions.front();
        insertions.push_back({at, std::move(block)});
    }

    std::string out;
    std::size_t next = 0;
    for (std::size_t i = 0; i < diff_lines.size(); ++i) {
        if (next < insertions.size() && insertions[next].first == i) {
            for (const auto& line : insertions[next].second) out += line + "\n";
            ++next;
        }
        out += diff_lines[i] + "\n";
    }
    if (diff_lines.empty())
        for (const auto& ins : insertions)
            for (const auto& line : ins.second) out += line + "\n";
    return out;
}

inline SolutionContext make_context(const RepairPair& pair, const std::string& description) {
    return {pair.pair_id, render_unified_diff(pair.wrong_code, pair.right_code), description};
}

inline std::string render_context(const SolutionContext& context, std::size_t index) {
    std::string out = "Reference repair " + std::to_string(index) + ":\n```diff\n";
    out += annotate_diff(context.diff_text, context.description);
    out += "```\n";
    return out;
}

// ---------------------------------------------------------------------------
// Prompt assembly.
// ---------------------------------------------------------------------------

struct PromptBuild {
    std::string text;
    std::size_t dropped_contexts = 0;
};

inline PromptBuild build_repair_prompt(const Problem& problem,
                                       const std::vector<SolutionContext>& contexts,
                                       const std::string& buggy_code,
                                       const PromptTemplates& templates = {},
                                       std::size_t token_budget = 32768) {
    if (contexts.empty())
        throw Error(ErrorKind::usage, "at least one reference context is required");
    auto render = [&](std::size_t used) {
        std::string references;
        for (std::size_t i = 0; i < used; ++i) {
            references += render_context(contexts[i], i + 1);
            if (i + 1 < used) references += "\n";
        }
        return substitute(templates.repair, {{"problem_statement", problem.statement},
                                             {"references", references},
                                             {"buggy_code", buggy_code}});
    };
    std::size_t used = contexts.size();
    std::string text = render(used);
    while (estimate_tokens(text) > token_budget && used > 1) {
        --used;
        text = render(used);
    }
    if (estimate_tokens(text) > token_budget)
        throw Error(ErrorKind::budget,
                    "prompt exceeds token budget even with a single reference context");
    return {std::move(text), contexts.size() - used};
}

// ---------------------------------------------------------------------------
// Response parsing.
// ---------------------------------------------------------------------------

inline GeneratedSolution parse_solution(const std::string& response) {
    GeneratedSolution solution;
    solution.raw_response = response;

    const std::vector<std::string> lines = split_lines(response);
    std::size_t fence_open = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (strip(lines[i]).rfind("```", 0) == 0) {
            fence_open = i;
            break;
        }
    }
    if (fence_open == lines.size())
        throw ParseError("response contains no fenced code block", response);

    std::size_t fence_close = lines.size();
    for (std::size_t i = fence_open + 1; i < lines.size(); ++i) {
        if (strip(lines[i]) == "```") {
            fence_close = i;
            break;
        }
    }
    std::size_t after_code;
    if (fence_close == lines.size()) {
        solution.parse_warnings.push_back("unterminated code fence");
        after_code = lines.size();
    } else {
        after_code = fence_close + 1;
    }
    std::string code;
    for (std::size_t i = fence_open + 1; i < std::min(fence_close, lines.size()); ++i)
        code += lines[i] + "\n";
    if (strip(code).empty()) throw ParseError("fenced code block is empty", response);
    solution.fixed_code = code;

    std::vector<std::string> tail;
    for (std::size_t i = after_code; i < lines.size(); ++i) {
        if (strip(lines[i]).rfind("```", 0) == 0) {
            solution.parse_warnings.push_back("extra code fence ignored");
            break;
        }
        tail.push_back(lines[i]);
    }

    std::size_t list_start = 0;
    bool heading_found = false;
    for (std::size_t i = 0; i < tail.size(); ++i) {
        if (detail::contains_ci(tail[i], "description") &&
            detail::list_marker_end(tail[i]) == std::string::npos) {
            heading_found = true;
            list_start = i + 1;
            break;
        }
    }
    if (!heading_found)
        list_start = 0;  // fall back to every list item after the code block
    std::vector<std::string> scan(tail.begin() + static_cast<std::ptrdiff_t>(list_start),
                                  tail.end());
    solution.descriptions = detail::extract_list_items(scan);
    if (!heading_found && !solution.descriptions.empty())
        solution.parse_warnings.push_back("no description heading; took all list items");
    if (solution.descriptions.empty())
        solution.parse_warnings.push_back("no descriptions found");
    return solution;
}

// Canonical rendering of a solution in the demanded output format; parsing it
// back recovers the same code and descriptions.
inline std::string render_solution(const std::string& fixed_code,
                                   const std::vector<std::string>& descriptions) {
    std::string out = "```\n" + fixed_code;
    if (!fixed_code.empty() && fixed_code.back() != '\n') out += "\n";
    out += "```\n\nBug Descriptions:\n";
    for (std::size_t i = 0; i < descriptions.size(); ++i)
        out += std::to_string(i + 1) + ". " + descriptions[i] + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Chat-backed operations.
// ---------------------------------------------------------------------------

inline std::string describe_pair(ModelGateway& gateway, const Problem& problem,
                                 const RepairPair& pair, const PromptTemplates& templates = {},
                                 double temperature = 0.2) {
    ChatRequest request;
    request.user_text = substitute(templates.describe, {{"problem_statement", problem.statement},
                                                        {"wrong_code", pair.wrong_code},
                                                        {"right_code", pair.right_code}});
    request.temperature = temperature;
    try {
        return gateway.chat(request);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::model_output) throw;
        return gateway.chat(request);
    }
}

inline GeneratedSolution generate_solution(ModelGateway& gateway, const std::string& prompt,
                                           double temperature = 0.2) {
    ChatRequest request;
    request.user_text = prompt;
    request.temperature = temperature;
    return parse_solution(gateway.chat(request));
}

}  // namespace refix

#pragma once

// Lexical comment stripping. Best-effort by design: the stripper never fails,
// and unsupported language tags pass code through unchanged with a warning.
//
// Guarantees on supported languages:
//   - line and block comments are removed;
//   - string literals that contain comment delimiters are preserved verbatim;
//   - every line that held any non-comment content survives (trailing
//     whitespace left by a removed comment is trimmed);
//   - lines that consisted of comments only are dropped.

#include <string>
#include <string_view>
#include <vector>

#include "refix/common.hpp"

namespace refix {

enum class CommentSyntax { python, c_family, unsupported };

inline CommentSyntax comment_syntax_for(std::string_view language_tag) {
    std::string tag = lowercase(language_tag);
    if (tag == "python" || tag == "python3" || tag == "python2" || tag == "py")
        return CommentSyntax::python;
    if (tag == "c" || tag == "cpp" || tag == "c++" || tag == "cc" || tag == "cxx" ||
        tag == "java" || tag == "javascript" || tag == "js" || tag == "typescript" ||
        tag == "ts" || tag == "go" || tag == "rust" || tag == "cs" || tag == "c#" ||
        tag == "kotlin" || tag == "scala")
        return CommentSyntax::c_family;
    return CommentSyntax::unsupported;
}

struct StripResult {
    std::string code;
    bool supported = true;  // false: unknown tag, code returned unchanged
};

namespace detail {

// Scanner state shared by both syntaxes.
struct StripScan {
    std::string out;           // emitted chars for the current line
    bool line_has_comment = false;
    bool line_all_comment_candidate = true;  // no non-ws, non-comment char yet
    std::vector<std::string> lines;

    void emit(char c) {
        if (c != ' ' && c != '\t' && c != '\r') line_all_comment_candidate = false;
        out.push_back(c);
    }

    void end_line() {
        bool drop = line_has_comment && line_all_comment_candidate;
        if (!drop) lines.push_back(line_has_comment ? rstrip(out) : out);
        out.clear();
        line_has_comment = false;
        line_all_comment_candidate = true;
    }
};

inline std::string strip_python(std::string_view code) {
    StripScan scan;
    enum class St { code, str1, str2, triple1, triple2 } st = St::code;
    std::size_t i = 0;
    const std::size_t n = code.size();
    auto starts_triple = [&](char q) {
        return i + 2 < n && code[i] == q && code[i + 1] == q && code[i + 2] == q;
    };
    while (i < n) {
        char c = code[i];
        if (c == '\n') {
            scan.end_line();
            ++i;
            continue;
        }
        switch (st) {
            case St::code:
                if (c == '#') {
                    scan.line_has_comment = true;
                    while (i < n && code[i] != '\n') ++i;
                    continue;
                }
                if (starts_triple('\'')) {
                    st = St::triple1;
                    scan.emit(c); scan.emit(c); scan.emit(c);
                    i += 3;
                    continue;
                }
                if (starts_triple('"')) {
                    st = St::triple2;
                    scan.emit(c); scan.emit(c); scan.emit(c);
                    i += 3;
                    continue;
                }
                if (c == '\'') st = St::str1;
                if (c == '"') st = St::str2;
                scan.emit(c);
                ++i;
                break;
            case St::str1:
            case St::str2: {
                if (c == '\\' && i + 1 < n) {
                    scan.emit(c);
                    scan.emit(code[i + 1]);
                    i += 2;
                    continue;
                }
                if ((st == St::str1 && c == '\'') || (st == St::str2 && c == '"')) st = St::code;
                scan.emit(c);
                ++i;
                break;
            }
            case St::triple1:
            case St::triple2: {
                char q = st == St::triple1 ? '\'' : '"';
                if (c == '\\' && i + 1 < n) {
                    scan.emit(c);
                    scan.emit(code[i + 1]);
                    i += 2;
                    continue;
                }
                if (starts_triple(q)) {
                    st = St::code;
                    scan.emit(c); scan.emit(c); scan.emit(c);
                    i += 3;
                    continue;
                }
                scan.emit(c);
                ++i;
                break;
            }
        }
    }
    if (!scan.out.empty() || scan.line_has_comment) scan.end_line();
    std::string result = join_lines(scan.lines);
    // Inputs without a trailing newline keep that shape.
    if (!result.empty() && !code.empty() && code.back() != '\n') result.pop_back();
    return result;
}

inline std::string strip_c_family(std::string_view code) {
    StripScan scan;
    enum class St { code, str, chr, block } st = St::code;
    std::size_t i = 0;
    const std::size_t n = code.size();
    while (i < n) {
        char c = code[i];
        if (c == '\n') {
            // A block comment spanning the newline keeps the comment state;
            // the line itself ends either way.
            scan.end_line();
            ++i;
            if (st == St::block) scan.line_has_comment = true;
            continue;
        }
        switch (st) {
            case St::code:
                if (c == '/' && i + 1 < n && code[i + 1] == '/') {
                    scan.line_has_comment = true;
                    while (i < n && code[i] != '\n') ++i;
                    continue;
                }
                if (c == '/' && i + 1 < n && code[i + 1] == '*') {
                    scan.line_has_comment = true;
                    st = St::block;
                    i += 2;
                    continue;
                }
                if (c == '"') st = St::str;
                if (c == '\'') st = St::chr;
                scan.emit(c);
                ++i;
                break;
            case St::str:
            case St::chr:
                if (c == '\\' && i + 1 < n) {
                    scan.emit(c);
                    scan.emit(code[i + 1]);
                    i += 2;
                    continue;
                }
                if ((st == St::str && c == '"') || (st == St::chr && c == '\'')) st = St::code;
                scan.emit(c);
                ++i;
                break;
            case St::block:
                if (c == '*' && i + 1 < n && code[i + 1] == '/') {
                    st = St::code;
                    i += 2;
                    // Comment acts as a token separator.
                    if (i < n && code[i] != '\n' && !scan.out.empty() &&
                        scan.out.back() != ' ' && scan.out.back() != '\t')
                        scan.out.push_back(' ');
                    continue;
                }
                ++i;
                break;
        }
    }
    if (!scan.out.empty() || scan.line_has_comment) scan.end_line();
    std::string result = join_lines(scan.lines);
    if (!result.empty() && !code.empty() && code.back() != '\n') result.pop_back();
    return result;
}

}  // namespace detail

inline StripResult strip_comments(std::string_view code, std::string_view language_tag) {
    switch (comment_syntax_for(language_tag)) {
        case CommentSyntax::python: return {detail::strip_python(code), true};
        case CommentSyntax::c_family: return {detail::strip_c_family(code), true};
        case CommentSyntax::unsupported: break;
    }
    return {std::string(code), false};
}

}  // namespace refix

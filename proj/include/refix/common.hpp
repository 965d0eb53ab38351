#pragma once

// Shared plumbing: error type, stable hashing, line utilities, file helpers.

#include <unistd.h>

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace refix {

enum class ErrorKind {
    config,        // bad or missing configuration
    data,          // unreadable or malformed input data
    transport,     // backend/network failure after retries
    model_output,  // backend answered but the payload is unusable
    parse,         // structured text could not be parsed
    budget,        // prompt exceeds the token budget
    metric,        // metric undefined for the given inputs
    sandbox,       // judge infrastructure failure (not a program failure)
    usage          // CLI misuse
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::config: return "config";
        case ErrorKind::data: return "data";
        case ErrorKind::transport: return "transport";
        case ErrorKind::model_output: return "model_output";
        case ErrorKind::parse: return "parse";
        case ErrorKind::budget: return "budget";
        case ErrorKind::metric: return "metric";
        case ErrorKind::sandbox: return "sandbox";
        case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Hashing. FNV-1a 64-bit: stable across runs and platforms, used for cache
// keys, pair ids and the index record ids.
// ---------------------------------------------------------------------------

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline std::string content_hash(std::string_view s) { return hex64(fnv1a64(s)); }

// ---------------------------------------------------------------------------
// Line utilities.
// ---------------------------------------------------------------------------

// Splits on '\n'; a trailing newline does not produce an empty final element.
// "\r\n" endings are tolerated (the '\r' is kept; rstrip removes it).
inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

inline std::string rstrip(std::string_view s) {
    std::size_t end = s.size();
    while (end > 0 && (s[end - 1] == ' ' || s[end - 1] == '\t' || s[end - 1] == '\r' ||
                       s[end - 1] == '\f' || s[end - 1] == '\v'))
        --end;
    return std::string(s.substr(0, end));
}

inline std::string strip(std::string_view s) {
    std::size_t begin = 0;
    while (begin < s.size() && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    std::size_t end = s.size();
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

inline bool is_blank(std::string_view s) {
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

inline std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// ---------------------------------------------------------------------------
// File helpers.
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::data, "cannot read file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "cannot write file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::data, "short write: " + path.string());
}

// Write-temp-then-rename so concurrent readers never observe partial content.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    write_text_file(tmp, content);
    std::filesystem::rename(tmp, path);
}

}  // namespace refix

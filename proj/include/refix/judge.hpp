#pragma once

// Sandboxed program execution against problem test suites, plus the two
// program-level metrics: accuracy (all tests pass) and per-sample improvement.

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "refix/common.hpp"
#include "refix/corpus.hpp"

namespace refix {

enum class Outcome { pass, wrong_answer, runtime_error, timeout, memory_exceeded, compile_error };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::pass: return "pass";
        case Outcome::wrong_answer: return "wrong_answer";
        case Outcome::runtime_error: return "runtime_error";
        case Outcome::timeout: return "timeout";
        case Outcome::memory_exceeded: return "memory_exceeded";
        case Outcome::compile_error: return "compile_error";
    }
    return "?";
}

struct TestVerdict {
    std::size_t case_index = 0;
    Outcome outcome = Outcome::runtime_error;
    double wall_time_seconds = 0.0;
    std::int64_t peak_memory_kb = 0;  // best-effort, from rusage
};

using PassVector = std::vector<bool>;

struct ResourceLimits {
    double wall_time_seconds = 5.0;
    std::size_t memory_bytes = 256ull * 1024 * 1024;
    std::size_t output_cap_bytes = 8ull * 1024 * 1024;
    bool strict_output = false;  // byte comparison instead of normalized
};

struct RunnerSpec {
    std::string file_name;
    std::vector<std::string> compile_argv;  // empty = nothing to compile
    std::vector<std::string> run_argv;
};

using RunnerRegistry = std::map<std::string, RunnerSpec>;

inline RunnerRegistry default_runner_registry() {
    RunnerRegistry reg;
    RunnerSpec python{"main.py", {}, {"python3", "main.py"}};
    reg["python"] = python;
    reg["python3"] = python;
    reg["cpp"] = {"main.cpp", {"g++", "-O2", "-std=c++17", "-o", "prog", "main.cpp"}, {"./prog"}};
    return reg;
}

inline RunnerRegistry load_runner_registry(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, "bad runner config " + path.string() + ": " + e.what());
    }
    RunnerRegistry reg;
    for (const auto& [tag, spec] : doc.items()) {
        RunnerSpec r;
        r.file_name = spec.at("file").get<std::string>();
        if (spec.contains("compile"))
            r.compile_argv = spec.at("compile").get<std::vector<std::string>>();
        r.run_argv = spec.at("run").get<std::vector<std::string>>();
        if (r.run_argv.empty())
            throw Error(ErrorKind::config, "runner for " + tag + " has an empty run command");
        reg[tag] = r;
    }
    return reg;
}

// Strip trailing whitespace per line and trailing blank lines; judge output
// comparisons are insensitive to both.
inline std::string normalize_output(std::string_view text) {
    std::vector<std::string> lines = split_lines(text);
    for (auto& line : lines) line = rstrip(line);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    std::string out;
    for (const auto& line : lines) {
        out += line;
        out += '\n';
    }
    return out;
}

namespace detail {

struct ChildResult {
    bool deadline_killed = false;
    int status = 0;
    double wall_seconds = 0.0;
    std::int64_t max_rss_kb = 0;
};

// fork/exec with stdin/stdout/stderr redirected to files in `dir`, its own
// process group, and address-space, cpu and file-size rlimits. The parent
// polls for exit and kills the whole group at the deadline.
inline ChildResult run_child(const std::filesystem::path& dir,
                             const std::vector<std::string>& argv, const ResourceLimits& limits,
                             double wall_limit_seconds) {
    std::vector<char*> c_argv;
    for (const auto& arg : argv) c_argv.push_back(const_cast<char*>(arg.c_str()));
    c_argv.push_back(nullptr);

    const auto start = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) throw Error(ErrorKind::sandbox, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        setpgid(0, 0);
        if (chdir(dir.c_str()) != 0) _exit(125);
        int in_fd = open("stdin.txt", O_RDONLY);
        int out_fd = open("stdout.txt", O_WRONLY | O_CREAT | O_TRUNC, 0644);
        int err_fd = open("stderr.txt", O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (in_fd < 0 || out_fd < 0 || err_fd < 0) _exit(125);
        dup2(in_fd, 0);
        dup2(out_fd, 1);
        dup2(err_fd, 2);
        rlimit as_limit{limits.memory_bytes, limits.memory_bytes};
        setrlimit(RLIMIT_AS, &as_limit);
        const rlim_t cpu = static_cast<rlim_t>(wall_limit_seconds) + 1;
        rlimit cpu_limit{cpu, cpu + 1};
        setrlimit(RLIMIT_CPU, &cpu_limit);
        rlimit fsize_limit{limits.output_cap_bytes, limits.output_cap_bytes};
        setrlimit(RLIMIT_FSIZE, &fsize_limit);
        rlimit core_limit{0, 0};
        setrlimit(RLIMIT_CORE, &core_limit);
        execvp(c_argv[0], c_argv.data());
        _exit(126);
    }

    setpgid(pid, pid);  // also done in the child; whichever runs first wins
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(wall_limit_seconds));
    ChildResult result;
    rusage usage{};
    int status = 0;
    for (;;) {
        pid_t done = wait4(pid, &status, WNOHANG, &usage);
        if (done == pid) break;
        if (done < 0 && errno != EINTR)
            throw Error(ErrorKind::sandbox, std::string("wait4: ") + std::strerror(errno));
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            result.deadline_killed = true;
            while (wait4(pid, &status, 0, &usage) < 0 && errno == EINTR) {}
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    if (!result.deadline_killed) kill(-pid, SIGKILL);  // sweep stray descendants
    result.status = status;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.max_rss_kb = usage.ru_maxrss;
    return result;
}

inline std::string read_capped(const std::filesystem::path& path, std::size_t cap) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::string data(cap + 1, '\0');
    in.read(data.data(), static_cast<std::streamsize>(data.size()));
    data.resize(static_cast<std::size_t>(in.gcount()));
    return data;
}

class ScratchDir {
public:
    ScratchDir() {
        std::string tmpl =
            (std::filesystem::temp_directory_path() / "refix-run-XXXXXX").string();
        if (!mkdtemp(tmpl.data()))
            throw Error(ErrorKind::sandbox, std::string("mkdtemp: ") + std::strerror(errno));
        path_ = tmpl;
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace detail

// Compiles once, then runs the program against any number of test cases, each
// with fresh stdin/stdout files in the same scratch directory.
class ProgramRunner {
public:
    ProgramRunner(const std::string& code, const std::string& language_tag,
                  const RunnerRegistry& registry, ResourceLimits limits = {})
        : limits_(limits) {
        auto it = registry.find(language_tag);
        if (it == registry.end())
            throw Error(ErrorKind::config, "no runner configured for language " + language_tag);
        spec_ = it->second;
        write_text_file(scratch_.path() / spec_.file_name, code);
        if (!spec_.compile_argv.empty()) {
            write_text_file(scratch_.path() / "stdin.txt", "");
            ResourceLimits compile_limits = limits_;
            compile_limits.memory_bytes = std::max<std::size_t>(compile_limits.memory_bytes,
                                                                2048ull * 1024 * 1024);
            auto res = detail::run_child(scratch_.path(), spec_.compile_argv, compile_limits,
                                         std::max(30.0, limits_.wall_time_seconds));
            compile_failed_ = res.deadline_killed || !WIFEXITED(res.status) ||
                              WEXITSTATUS(res.status) != 0;
        }
    }

    bool compile_failed() const { return compile_failed_; }

    TestVerdict run(const TestCase& test_case, std::size_t case_index = 0) {
        TestVerdict verdict;
        verdict.case_index = case_index;
        if (compile_failed_) {
            verdict.outcome = Outcome::compile_error;
            return verdict;
        }
        write_text_file(scratch_.path() / "stdin.txt", test_case.input);
        auto res = detail::run_child(scratch_.path(), spec_.run_argv, limits_,
                                     limits_.wall_time_seconds);
        verdict.wall_time_seconds = res.wall_seconds;
        verdict.peak_memory_kb = res.max_rss_kb;
        const bool over_memory =
            res.max_rss_kb > 0 &&
            static_cast<std::size_t>(res.max_rss_kb) * 1024 >= limits_.memory_bytes;
        if (res.deadline_killed) {
            verdict.outcome = Outcome::timeout;
        } else if (WIFEXITED(res.status) && WEXITSTATUS(res.status) == 0) {
            const std::string produced = detail::read_capped(scratch_.path() / "stdout.txt",
                                                             limits_.output_cap_bytes);
            const bool equal = limits_.strict_output
                                   ? produced == test_case.expected_output
                                   : normalize_output(produced) ==
                                         normalize_output(test_case.expected_output);
            verdict.outcome = equal ? Outcome::pass : Outcome::wrong_answer;
        } else if (WIFSIGNALED(res.status) && WTERMSIG(res.status) == SIGXCPU) {
            verdict.outcome = Outcome::timeout;
        } else if (over_memory) {
            verdict.outcome = Outcome::memory_exceeded;
        } else {
            verdict.outcome = Outcome::runtime_error;
        }
        return verdict;
    }

private:
    detail::ScratchDir scratch_;
    RunnerSpec spec_;
    ResourceLimits limits_;
    bool compile_failed_ = false;
};

inline TestVerdict run_program(const std::string& code, const std::string& language_tag,
                               const TestCase& test_case, const RunnerRegistry& registry,
                               ResourceLimits limits = {}) {
    ProgramRunner runner(code, language_tag, registry, limits);
    return runner.run(test_case);
}

struct EvaluationResult {
    PassVector passes;
    std::vector<TestVerdict> verdicts;
    bool compile_error = false;

    bool all_pass() const {
        return !passes.empty() &&
               std::all_of(passes.begin(), passes.end(), [](bool b) { return b; });
    }
};

// Runs every test case; no short-circuit on the first failure.
inline EvaluationResult evaluate_code(const std::string& code, const std::string& language_tag,
                                      const Problem& problem, const RunnerRegistry& registry,
                                      ResourceLimits limits = {}) {
    if (problem.test_cases.empty())
        throw Error(ErrorKind::data, "problem " + problem.id + " has no test cases");
    EvaluationResult result;
    ProgramRunner runner(code, language_tag, registry, limits);
    result.compile_error = runner.compile_failed();
    for (std::size_t i = 0; i < problem.test_cases.size(); ++i) {
        TestVerdict v = runner.run(problem.test_cases[i], i);
        result.passes.push_back(v.outcome == Outcome::pass);
        result.verdicts.push_back(std::move(v));
    }
    return result;
}

inline double accuracy(const std::vector<PassVector>& final_vectors) {
    if (final_vectors.empty())
        throw Error(ErrorKind::metric, "accuracy over zero samples is undefined");
    std::size_t all_pass = 0;
    for (const auto& pv : final_vectors)
        if (!pv.empty() && std::all_of(pv.begin(), pv.end(), [](bool b) { return b; }))
            ++all_pass;
    return static_cast<double>(all_pass) / static_cast<double>(final_vectors.size());
}

struct Improvement {
    double value = 0.0;
    bool degenerate = false;  // buggy code already passed everything
};

// Fraction of the originally-failing cases that now pass, zeroed when any
// originally-passing case regresses.
inline Improvement improvement(const PassVector& buggy, const PassVector& fixed) {
    if (buggy.size() != fixed.size())
        throw Error(ErrorKind::metric, "pass vectors differ in length");
    bool no_regression = true;
    std::size_t newly_passing = 0;
    std::size_t originally_failing = 0;
    for (std::size_t i = 0; i < buggy.size(); ++i) {
        if (buggy[i] && !fixed[i]) no_regression = false;
        if (!buggy[i]) {
            ++originally_failing;
            if (fixed[i]) ++newly_passing;
        }
    }
    Improvement result;
    if (originally_failing == 0) {
        result.degenerate = true;
        result.value = no_regression ? 1.0 : 0.0;
        return result;
    }
    result.value = no_regression ? static_cast<double>(newly_passing) /
                                       static_cast<double>(originally_failing)
                                 : 0.0;
    return result;
}

}  // namespace refix

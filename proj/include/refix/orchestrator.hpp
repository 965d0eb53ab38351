#pragma once

// End-to-end pipeline: configuration, the per-sample repair loop with
// re-retrieval after failed attempts, benchmark execution over a dataset, and
// deterministic JSON reporting.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "refix/common.hpp"
#include "refix/corpus.hpp"
#include "refix/descmetric.hpp"
#include "refix/generation.hpp"
#include "refix/judge.hpp"
#include "refix/retrieval.hpp"

namespace refix {

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

struct EmbeddingBackendSettings {
    std::string kind = "mock";  // mock | http
    std::size_t dims = 64;
    HttpBackendConfig http;
};

struct ChatBackendSettings {
    std::string kind = "scripted";  // scripted | http
    std::filesystem::path script;
    HttpBackendConfig http;
};

struct RunConfig {
    double threshold_a = 0.65;
    std::size_t k = 5;
    std::size_t max_iterations = 3;
    double gen_temperature = 0.2;
    double judge_temperature = 0.0;
    std::size_t token_budget = 32768;
    std::filesystem::path cache_dir;
    bool deterministic = true;  // keep wall-clock data out of reports
    std::size_t workers = 4;
    std::size_t judge_workers = 4;
    std::string default_language = "python";
    ResourceLimits limits;
    EmbeddingBackendSettings embedding;
    ChatBackendSettings chat;
    PromptTemplates templates;
    MatchOptions match_options;
    RunnerRegistry runners = default_runner_registry();
    std::filesystem::path problems_path;
    std::filesystem::path submissions_path;
    std::filesystem::path pairs_path;
    std::filesystem::path index_path;
};

namespace detail {

inline std::filesystem::path resolve_path(const std::filesystem::path& base,
                                          const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

inline HttpBackendConfig parse_http_settings(const nlohmann::json& obj) {
    HttpBackendConfig http;
    http.base_url = obj.value("base_url", http.base_url);
    http.model = obj.value("model", http.model);
    http.api_key_env = obj.value("api_key_env", http.api_key_env);
    http.embed_path = obj.value("embed_path", http.embed_path);
    http.chat_path = obj.value("chat_path", http.chat_path);
    http.dims = obj.value("dims", http.dims);
    http.timeout_seconds = obj.value("timeout_seconds", http.timeout_seconds);
    return http;
}

}  // namespace detail

inline RunConfig load_run_config(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, "bad config " + path.string() + ": " + e.what());
    }
    const auto base = std::filesystem::absolute(path).parent_path();
    RunConfig cfg;
    cfg.threshold_a = doc.value("threshold_a", cfg.threshold_a);
    cfg.k = doc.value("k", cfg.k);
    cfg.max_iterations = doc.value("max_iterations", cfg.max_iterations);
    cfg.gen_temperature = doc.value("gen_temperature", cfg.gen_temperature);
    cfg.judge_temperature = doc.value("judge_temperature", cfg.judge_temperature);
    cfg.token_budget = doc.value("token_budget", cfg.token_budget);
    cfg.deterministic = doc.value("deterministic", cfg.deterministic);
    cfg.workers = doc.value("workers", cfg.workers);
    cfg.judge_workers = doc.value("judge_workers", cfg.judge_workers);
    cfg.default_language = doc.value("language", cfg.default_language);
    if (doc.contains("cache_dir"))
        cfg.cache_dir = detail::resolve_path(base, doc["cache_dir"].get<std::string>());
    if (doc.contains("limits")) {
        const auto& lim = doc["limits"];
        cfg.limits.wall_time_seconds = lim.value("wall_time_seconds", cfg.limits.wall_time_seconds);
        if (lim.contains("memory_mb"))
            cfg.limits.memory_bytes = lim["memory_mb"].get<std::size_t>() * 1024 * 1024;
        if (lim.contains("output_cap_mb"))
            cfg.limits.output_cap_bytes = lim["output_cap_mb"].get<std::size_t>() * 1024 * 1024;
        cfg.limits.strict_output = lim.value("strict_output", cfg.limits.strict_output);
    }
    if (doc.contains("embedding")) {
        const auto& emb = doc["embedding"];
        cfg.embedding.kind = emb.value("backend", cfg.embedding.kind);
        cfg.embedding.dims = emb.value("dims", cfg.embedding.dims);
        cfg.embedding.http = detail::parse_http_settings(emb);
        if (cfg.embedding.http.dims == 0) cfg.embedding.http.dims = cfg.embedding.dims;
    }
    if (doc.contains("chat")) {
        const auto& chat = doc["chat"];
        cfg.chat.kind = chat.value("backend", cfg.chat.kind);
        if (chat.contains("script"))
            cfg.chat.script = detail::resolve_path(base, chat["script"].get<std::string>());
        cfg.chat.http = detail::parse_http_settings(chat);
    }
    if (doc.contains("templates")) {
        const auto& tpl = doc["templates"];
        if (tpl.contains("repair"))
            cfg.templates.repair =
                read_text_file(detail::resolve_path(base, tpl["repair"].get<std::string>()));
        if (tpl.contains("describe"))
            cfg.templates.describe =
                read_text_file(detail::resolve_path(base, tpl["describe"].get<std::string>()));
        if (tpl.contains("match"))
            cfg.match_options.template_text =
                read_text_file(detail::resolve_path(base, tpl["match"].get<std::string>()));
    }
    if (doc.contains("runners"))
        cfg.runners = load_runner_registry(detail::resolve_path(base, doc["runners"].get<std::string>()));
    if (doc.contains("paths")) {
        const auto& paths = doc["paths"];
        if (paths.contains("problems"))
            cfg.problems_path = detail::resolve_path(base, paths["problems"].get<std::string>());
        if (paths.contains("submissions"))
            cfg.submissions_path =
                detail::resolve_path(base, paths["submissions"].get<std::string>());
        if (paths.contains("pairs"))
            cfg.pairs_path = detail::resolve_path(base, paths["pairs"].get<std::string>());
        if (paths.contains("index"))
            cfg.index_path = detail::resolve_path(base, paths["index"].get<std::string>());
    }
    cfg.match_options.temperature = cfg.judge_temperature;
    return cfg;
}

inline nlohmann::json config_echo(const RunConfig& cfg) {
    nlohmann::json runners = nlohmann::json::array();
    for (const auto& [tag, spec] : cfg.runners) runners.push_back(tag);
    return {{"threshold_a", cfg.threshold_a},
            {"k", cfg.k},
            {"max_iterations", cfg.max_iterations},
            {"gen_temperature", cfg.gen_temperature},
            {"judge_temperature", cfg.judge_temperature},
            {"token_budget", cfg.token_budget},
            {"deterministic", cfg.deterministic},
            {"workers", cfg.workers},
            {"judge_workers", cfg.judge_workers},
            {"language", cfg.default_language},
            {"limits",
             {{"wall_time_seconds", cfg.limits.wall_time_seconds},
              {"memory_bytes", cfg.limits.memory_bytes},
              {"output_cap_bytes", cfg.limits.output_cap_bytes},
              {"strict_output", cfg.limits.strict_output}}},
            {"embedding", {{"backend", cfg.embedding.kind}, {"dims", cfg.embedding.dims}}},
            {"chat",
             {{"backend", cfg.chat.kind},
              {"script_hash",
               cfg.chat.script.empty() ? "" : content_hash(read_text_file(cfg.chat.script))}}},
            {"templates",
             {{"repair_hash", content_hash(cfg.templates.repair)},
              {"describe_hash", content_hash(cfg.templates.describe)},
              {"match_hash", content_hash(cfg.match_options.template_text)}}},
            {"runner_languages", runners}};
}

inline std::unique_ptr<ModelGateway> make_gateway(const RunConfig& cfg) {
    std::unique_ptr<EmbeddingBackend> embedder;
    if (cfg.embedding.kind == "mock")
        embedder = std::make_unique<MockEmbeddingBackend>(cfg.embedding.dims);
    else if (cfg.embedding.kind == "http")
        embedder = std::make_unique<HttpEmbeddingBackend>(cfg.embedding.http);
    else
        throw Error(ErrorKind::config, "unknown embedding backend: " + cfg.embedding.kind);
    std::unique_ptr<ChatBackend> chatter;
    if (cfg.chat.kind == "scripted") {
        if (cfg.chat.script.empty())
            throw Error(ErrorKind::config, "scripted chat backend needs a script file");
        chatter = std::make_unique<ScriptedChatBackend>(
            ScriptedChatBackend::parse_script(cfg.chat.script));
    } else if (cfg.chat.kind == "http") {
        chatter = std::make_unique<HttpChatBackend>(cfg.chat.http);
    } else {
        throw Error(ErrorKind::config, "unknown chat backend: " + cfg.chat.kind);
    }
    GatewayConfig gw;
    gw.cache_dir = cfg.cache_dir;
    gw.token_budget = cfg.token_budget;
    gw.max_in_flight = static_cast<int>(std::max<std::size_t>(cfg.workers, 1));
    return std::make_unique<ModelGateway>(std::move(embedder), std::move(chatter), gw);
}

// ---------------------------------------------------------------------------
// Per-sample repair loop.
// ---------------------------------------------------------------------------

enum class RepairStatus { repaired, exhausted, error };

inline const char* to_string(RepairStatus s) {
    switch (s) {
        case RepairStatus::repaired: return "repaired";
        case RepairStatus::exhausted: return "exhausted";
        case RepairStatus::error: return "error";
    }
    return "?";
}

struct IterationRecord {
    std::size_t index = 0;
    std::string mode;  // "base" or "iterative"
    std::vector<ScoredPair> retrieved;
    bool shortage = false;
    std::size_t overlap_with_previous = 0;
    std::string prompt_hash;
    std::size_t dropped_contexts = 0;
    bool generated = false;
    bool parse_failed = false;
    GeneratedSolution solution;
    bool judged = false;
    PassVector passes;
    bool compile_error = false;
    std::string error;
};

struct RepairTrace {
    std::string sample_id;
    std::string problem_id;
    std::vector<IterationRecord> iterations;
    RepairStatus status = RepairStatus::error;
    std::string error;
    double wall_seconds = 0.0;
    bool has_final = false;  // at least one attempt was generated and judged
    std::string final_code;
    std::vector<std::string> final_descriptions;
    PassVector final_passes;
};

class RepairEngine {
public:
    RepairEngine(ModelGateway& gateway, const VectorIndex& index,
                 const std::vector<RepairPair>& pairs, const RunConfig& config)
        : gateway_(gateway),
          index_(index),
          config_(config),
          judge_slots_(static_cast<std::ptrdiff_t>(
              std::clamp<std::size_t>(config.judge_workers, 1, 64))) {
        for (const auto& p : pairs) pair_by_id_.emplace(p.pair_id, &p);
    }

    // Judge entry point shared by the repair loop and baseline evaluation so
    // one semaphore bounds all concurrent program runs.
    EvaluationResult judge_code(const std::string& code, const std::string& language,
                                const Problem& problem) {
        judge_slots_.acquire();
        struct Release {
            std::counting_semaphore<64>& s;
            ~Release() { s.release(); }
        } release{judge_slots_};
        return evaluate_code(code, language, problem, config_.runners, config_.limits);
    }

    RepairTrace repair_sample(const Problem& problem, const std::string& buggy_code,
                              const std::string& language, const std::string& sample_id) {
        if (buggy_code.empty()) throw Error(ErrorKind::usage, "buggy code must be non-empty");
        const auto start = std::chrono::steady_clock::now();
        RepairTrace trace;
        trace.sample_id = sample_id;
        trace.problem_id = problem.id;
        gateway_.set_scope(sample_id);

        EmbeddingVector h_c = embed_code(buggy_code, language);
        // Until an attempt is judged and fails, the failed-attempt embedding
        // falls back to the buggy code itself (a zero edit).
        EmbeddingVector h_yw = h_c;

        for (std::size_t t = 0; t <= config_.max_iterations; ++t) {
            IterationRecord rec;
            rec.index = t;
            rec.mode = t == 0 ? "base" : "iterative";
            RetrievalResult retrieved;
            try {
                retrieved = t == 0
                                ? base_retrieve(index_, h_c, problem.id, config_.k)
                                : iterative_retrieve(index_, h_c, h_yw, problem.id, config_.k);
            } catch (const Error& e) {
                rec.error = e.what();
                trace.iterations.push_back(std::move(rec));
                trace.status = RepairStatus::error;
                trace.error = e.what();
                trace.wall_seconds = elapsed(start);
                return trace;
            }
            rec.retrieved = retrieved.ranked;
            rec.shortage = retrieved.shortage;
            if (t > 0) {
                const auto& prev = trace.iterations.back().retrieved;
                for (const auto& sp : rec.retrieved)
                    for (const auto& old : prev)
                        if (sp.pair_id == old.pair_id) {
                            ++rec.overlap_with_previous;
                            break;
                        }
            }

            GeneratedSolution solution;
            try {
                std::vector<SolutionContext> contexts;
                for (const auto& sp : rec.retrieved) {
                    auto it = pair_by_id_.find(sp.pair_id);
                    if (it == pair_by_id_.end())
                        throw Error(ErrorKind::data, "index refers to unknown pair " + sp.pair_id);
                    contexts.push_back(make_context(
                        *it->second, describe_pair(gateway_, problem, *it->second,
                                                   config_.templates, config_.gen_temperature)));
                }
                PromptBuild prompt = build_repair_prompt(problem, contexts, buggy_code,
                                                         config_.templates, config_.token_budget);
                rec.prompt_hash = content_hash(prompt.text);
                rec.dropped_contexts = prompt.dropped_contexts;
                solution = generate_solution(gateway_, prompt.text, config_.gen_temperature);
            } catch (const ParseError& e) {
                rec.parse_failed = true;
                rec.solution.raw_response = e.raw_response();
                rec.error = e.what();
                trace.iterations.push_back(std::move(rec));
                continue;  // iteration consumed, failed-attempt embedding unchanged
            } catch (const Error& e) {
                rec.error = e.what();
                trace.iterations.push_back(std::move(rec));
                continue;
            }
            rec.generated = true;
            rec.solution = solution;

            EvaluationResult evaluation;
            try {
                evaluation = judge_code(solution.fixed_code, language, problem);
            } catch (const Error& e) {
                rec.error = e.what();
                trace.iterations.push_back(std::move(rec));
                trace.status = RepairStatus::error;
                trace.error = e.what();
                trace.wall_seconds = elapsed(start);
                return trace;
            }
            rec.judged = true;
            rec.passes = evaluation.passes;
            rec.compile_error = evaluation.compile_error;
            trace.has_final = true;
            trace.final_code = solution.fixed_code;
            trace.final_descriptions = solution.descriptions;
            trace.final_passes = evaluation.passes;

            const bool all_pass = evaluation.all_pass();
            trace.iterations.push_back(std::move(rec));
            if (all_pass) {
                trace.status = RepairStatus::repaired;
                trace.wall_seconds = elapsed(start);
                return trace;
            }
            h_yw = embed_code(solution.fixed_code, language);
        }
        if (trace.has_final) {
            trace.status = RepairStatus::exhausted;
        } else {
            trace.status = RepairStatus::error;
            trace.error = trace.iterations.empty() ? "no iterations ran"
                                                   : trace.iterations.back().error;
        }
        trace.wall_seconds = elapsed(start);
        return trace;
    }

private:
    static double elapsed(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    EmbeddingVector embed_code(const std::string& code, const std::string& language) {
        std::string canonical = strip_comments(code, language).code;
        if (canonical.empty()) canonical = "\n";
        return gateway_.embed_text(canonical);
    }

    ModelGateway& gateway_;
    const VectorIndex& index_;
    const RunConfig& config_;
    std::map<std::string, const RepairPair*> pair_by_id_;
    std::counting_semaphore<64> judge_slots_;
};

// ---------------------------------------------------------------------------
// Benchmark.
// ---------------------------------------------------------------------------

struct BenchSample {
    std::string sample_id;
    std::string problem_id;
    std::string buggy_code;
    std::string language;
    std::vector<std::string> ground_truth;
};

inline std::vector<BenchSample> load_dataset(const std::filesystem::path& path,
                                             const std::string& default_language) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::data, "cannot read " + path.string());
    std::vector<BenchSample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::data, where + ": " + e.what());
        }
        BenchSample s;
        try {
            s.sample_id = rec.at("sample_id").get<std::string>();
            s.problem_id = rec.at("problem_id").get<std::string>();
            s.buggy_code = rec.at("buggy_code").get<std::string>();
            s.ground_truth =
                rec.at("ground_truth_descriptions").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::data, where + ": " + e.what());
        }
        s.language = rec.value("language", default_language);
        if (s.buggy_code.empty())
            throw Error(ErrorKind::data, where + ": buggy_code is empty");
        if (s.ground_truth.empty())
            throw Error(ErrorKind::data, where + ": ground_truth_descriptions is empty");
        for (const auto& g : s.ground_truth)
            if (g.empty())
                throw Error(ErrorKind::data, where + ": empty ground-truth description");
        samples.push_back(std::move(s));
    }
    return samples;
}

struct SampleResult {
    RepairTrace trace;
    PassVector buggy_passes;
    Improvement improve;
    MatchMatrix matrix;
    SampleScore desc_score;
    std::string error;
};

namespace detail {

inline nlohmann::json passes_json(const PassVector& pv) {
    nlohmann::json arr = nlohmann::json::array();
    for (bool b : pv) arr.push_back(b ? 1 : 0);
    return arr;
}

inline nlohmann::json iteration_json(const IterationRecord& rec, bool include_code) {
    nlohmann::json retrieved = nlohmann::json::array();
    for (const auto& sp : rec.retrieved)
        retrieved.push_back({{"pair_id", sp.pair_id}, {"score", sp.score}});
    nlohmann::json out{{"index", rec.index},
                       {"mode", rec.mode},
                       {"retrieved", retrieved},
                       {"shortage", rec.shortage},
                       {"overlap_with_previous", rec.overlap_with_previous},
                       {"prompt_hash", rec.prompt_hash},
                       {"dropped_contexts", rec.dropped_contexts},
                       {"generated", rec.generated},
                       {"parse_failed", rec.parse_failed},
                       {"judged", rec.judged},
                       {"passes", passes_json(rec.passes)},
                       {"compile_error", rec.compile_error},
                       {"descriptions", rec.solution.descriptions},
                       {"parse_warnings", rec.solution.parse_warnings},
                       {"error", rec.error}};
    if (include_code) out["code"] = rec.solution.fixed_code;
    return out;
}

inline nlohmann::json trace_json(const RepairTrace& trace, bool include_code,
                                 bool with_timing) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& rec : trace.iterations)
        iterations.push_back(iteration_json(rec, include_code));
    nlohmann::json out{{"sample_id", trace.sample_id},
                       {"problem_id", trace.problem_id},
                       {"status", to_string(trace.status)},
                       {"error", trace.error},
                       {"iterations", iterations},
                       {"final",
                        {{"present", trace.has_final},
                         {"passes", passes_json(trace.final_passes)},
                         {"descriptions", trace.final_descriptions}}}};
    if (include_code) out["final"]["code"] = trace.final_code;
    if (with_timing) out["wall_seconds"] = trace.wall_seconds;
    return out;
}

inline nlohmann::json matrix_json(const MatchMatrix& matrix) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& row : matrix.entries) entries.push_back(row);
    nlohmann::json matching = nlohmann::json::array();
    for (const auto& [i, j] : matrix.matching) matching.push_back({i, j});
    return {{"u", matrix.u},
            {"v", matrix.v},
            {"entries", entries},
            {"matching", matching},
            {"judge_format_errors", matrix.judge_format_errors}};
}

inline nlohmann::json sample_json(const BenchSample& sample, const SampleResult& result,
                                  bool with_timing) {
    return {{"sample_id", sample.sample_id},
            {"problem_id", sample.problem_id},
            {"error", result.error},
            {"trace", trace_json(result.trace, false, with_timing)},
            {"buggy_passes", passes_json(result.buggy_passes)},
            {"improvement",
             {{"value", result.improve.value}, {"degenerate", result.improve.degenerate}}},
            {"description_score",
             {{"tp", result.desc_score.tp},
              {"fp", result.desc_score.fp},
              {"fn", result.desc_score.fn},
              {"precision", result.desc_score.precision},
              {"recall", result.desc_score.recall},
              {"f1", result.desc_score.f1},
              {"gated", result.desc_score.gated},
              {"matrix", matrix_json(result.matrix)}}}};
}

}  // namespace detail

inline nlohmann::json run_benchmark(const std::map<std::string, Problem>& problems,
                                    const std::vector<RepairPair>& pairs,
                                    const VectorIndex& index,
                                    const std::vector<BenchSample>& dataset,
                                    ModelGateway& gateway, const RunConfig& config) {
    RepairEngine engine(gateway, index, pairs, config);
    std::vector<SampleResult> results(dataset.size());
    std::atomic<std::size_t> next{0};

    auto process = [&](std::size_t i) {
        const BenchSample& sample = dataset[i];
        SampleResult& result = results[i];
        auto problem_it = problems.find(sample.problem_id);
        if (problem_it == problems.end()) {
            result.error = "unknown problem " + sample.problem_id;
            result.trace.sample_id = sample.sample_id;
            result.trace.problem_id = sample.problem_id;
            result.trace.status = RepairStatus::error;
            result.trace.error = result.error;
            result.matrix.u = sample.ground_truth.size();
            result.desc_score = sample_score(result.matrix, false);
            return;
        }
        const Problem& problem = problem_it->second;
        try {
            result.trace =
                engine.repair_sample(problem, sample.buggy_code, sample.language, sample.sample_id);
            result.buggy_passes =
                engine.judge_code(sample.buggy_code, sample.language, problem).passes;
            PassVector final_passes = result.trace.final_passes;
            if (final_passes.size() != result.buggy_passes.size())
                final_passes.assign(result.buggy_passes.size(), false);
            result.improve = improvement(result.buggy_passes, final_passes);
            gateway.set_scope(sample.sample_id);
            result.matrix = match_sets(gateway, problem, sample.buggy_code, sample.ground_truth,
                                       result.trace.final_descriptions, config.match_options);
            const bool all_pass = result.trace.status == RepairStatus::repaired;
            result.desc_score = sample_score(result.matrix, all_pass);
        } catch (const Error& e) {
            result.error = e.what();
            if (result.trace.sample_id.empty()) {
                result.trace.sample_id = sample.sample_id;
                result.trace.problem_id = sample.problem_id;
                result.trace.status = RepairStatus::error;
                result.trace.error = e.what();
            }
            result.matrix.u = sample.ground_truth.size();
            result.desc_score = sample_score(result.matrix, false);
        }
    };

    const std::size_t worker_count =
        std::clamp<std::size_t>(config.workers, 1, std::max<std::size_t>(dataset.size(), 1));
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < worker_count; ++w)
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= dataset.size()) return;
                process(i);
            }
        });
    for (auto& t : workers) t.join();

    std::vector<PassVector> final_vectors;
    std::vector<SampleScore> desc_scores;
    double improve_sum = 0.0;
    std::size_t repaired = 0, exhausted = 0, errored = 0, degenerate_improve = 0;
    for (const auto& r : results) {
        final_vectors.push_back(r.trace.final_passes);
        desc_scores.push_back(r.desc_score);
        improve_sum += r.improve.value;
        if (r.improve.degenerate) ++degenerate_improve;
        switch (r.trace.status) {
            case RepairStatus::repaired: ++repaired; break;
            case RepairStatus::exhausted: ++exhausted; break;
            case RepairStatus::error: ++errored; break;
        }
    }
    const DescriptionAggregate agg = aggregate(desc_scores);
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < dataset.size(); ++i)
        samples.push_back(detail::sample_json(dataset[i], results[i], !config.deterministic));

    return {{"config", config_echo(config)},
            {"summary",
             {{"samples", dataset.size()},
              {"accuracy", accuracy(final_vectors)},
              {"improve", improve_sum / static_cast<double>(dataset.size())},
              {"b_precision", agg.precision},
              {"b_recall", agg.recall},
              {"b_f1", agg.f1},
              {"repaired", repaired},
              {"exhausted", exhausted},
              {"errors", errored},
              {"degenerate_improve", degenerate_improve}}},
            {"samples", samples}};
}

inline nlohmann::json repair_trace_json(const RepairTrace& trace, bool with_timing = false) {
    return detail::trace_json(trace, true, with_timing);
}

inline std::string report_summary_text(const nlohmann::json& report) {
    const auto& s = report.at("summary");
    std::string out;
    out += "samples:     " + std::to_string(s.at("samples").get<std::size_t>()) + "\n";
    auto pct = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
        return std::string(buf);
    };
    out += "accuracy:    " + pct(s.at("accuracy").get<double>()) + "\n";
    out += "improve:     " + pct(s.at("improve").get<double>()) + "\n";
    out += "b-precision: " + pct(s.at("b_precision").get<double>()) + "\n";
    out += "b-recall:    " + pct(s.at("b_recall").get<double>()) + "\n";
    out += "b-f1:        " + pct(s.at("b_f1").get<double>()) + "\n";
    out += "status:      " + std::to_string(s.at("repaired").get<std::size_t>()) + " repaired, " +
           std::to_string(s.at("exhausted").get<std::size_t>()) + " exhausted, " +
           std::to_string(s.at("errors").get<std::size_t>()) + " errors\n";
    for (const auto& row : report.at("samples")) {
        out += "  " + row.at("sample_id").get<std::string>() + " [" +
               row.at("problem_id").get<std::string>() + "] " +
               row.at("trace").at("status").get<std::string>() + ", improve " +
               pct(row.at("improvement").at("value").get<double>()) + ", f1 " +
               pct(row.at("description_score").at("f1").get<double>()) + "\n";
    }
    return out;
}

}  // namespace refix

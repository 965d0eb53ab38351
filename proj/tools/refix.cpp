// Command-line front end: database construction, index embedding, single-sample
// repair, judging, description evaluation, benchmarking and report printing.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "refix/orchestrator.hpp"

namespace {

using namespace refix;

int error_exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::usage:
        case ErrorKind::config: return 2;
        default: return 1;
    }
}

struct ConfigOverrides {
    std::string config_path;
    std::string cache_dir;
    long long iterations = -1;
    long long k = -1;
    long long workers = -1;
    std::string language;

    void attach(CLI::App* cmd, bool with_loop_knobs = true) {
        cmd->add_option("--config", config_path, "run configuration file (JSON)");
        cmd->add_option("--cache-dir", cache_dir, "model response cache directory");
        if (with_loop_knobs) {
            cmd->add_option("--iterations", iterations, "max re-retrieval iterations");
            cmd->add_option("--k", k, "retrieved references per generation");
            cmd->add_option("--workers", workers, "parallel sample workers");
            cmd->add_option("--language", language, "default language tag");
        }
    }

    RunConfig resolve() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
        if (iterations >= 0) cfg.max_iterations = static_cast<std::size_t>(iterations);
        if (k > 0) cfg.k = static_cast<std::size_t>(k);
        if (workers > 0) cfg.workers = static_cast<std::size_t>(workers);
        if (!language.empty()) cfg.default_language = language;
        return cfg;
    }
};

std::string pick_path(const std::string& flag_value, const std::filesystem::path& config_value,
                      const char* what) {
    if (!flag_value.empty()) return flag_value;
    if (!config_value.empty()) return config_value.string();
    throw Error(ErrorKind::usage, std::string("no path given for ") + what);
}

const Problem& find_problem(const std::map<std::string, Problem>& problems,
                            const std::string& id) {
    auto it = problems.find(id);
    if (it == problems.end()) throw Error(ErrorKind::data, "unknown problem id: " + id);
    return it->second;
}

std::vector<std::string> read_string_array(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
        return doc.get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::data,
                    path.string() + " is not a JSON string array: " + e.what());
    }
}

int run(int argc, char** argv) {
    CLI::App app{"retrieval-backed program repair pipeline"};
    app.require_subcommand(1);

    // build-db
    auto* build_db = app.add_subcommand("build-db", "mine repair pairs from a submission corpus");
    std::string bd_problems, bd_submissions, bd_out;
    double bd_threshold = 0.65;
    bool bd_count_blank = false;
    ConfigOverrides bd_over;
    bd_over.attach(build_db, false);
    build_db->add_option("--problems", bd_problems, "problems.jsonl");
    build_db->add_option("--submissions", bd_submissions, "submissions.jsonl");
    build_db->add_option("--threshold", bd_threshold, "consistency admission threshold")
        ->check(CLI::Range(0.0, 1.0));
    build_db->add_option("--out", bd_out, "output pairs.jsonl")->required();
    build_db->add_flag("--count-blank-lines", bd_count_blank,
                       "include blank lines in consistency scoring");
    build_db->callback([&] {
        RunConfig cfg = bd_over.resolve();
        if (build_db->count("--threshold") == 0) bd_threshold = cfg.threshold_a;
        CorpusStore store =
            ingest_corpus(pick_path(bd_problems, cfg.problems_path, "--problems"),
                          pick_path(bd_submissions, cfg.submissions_path, "--submissions"));
        ScoreOptions opts;
        opts.drop_blank_lines = !bd_count_blank;
        RetrievalDbBuild build = build_retrieval_db(store, bd_threshold, opts);
        write_pairs_jsonl(bd_out, build.pairs);
        std::printf("problems: %zu\nsubmissions: %zu\nskipped records: %zu\n",
                    store.problems.size(), store.submission_count, store.skipped_records);
        if (build.unsupported_language_records)
            std::printf("warning: %zu submissions in languages without comment stripping\n",
                        build.unsupported_language_records);
        if (build.unscorable_candidates)
            std::printf("unscorable candidates: %zu\n", build.unscorable_candidates);
        std::printf("pairs kept: %zu -> %s\n", build.pairs.size(), bd_out.c_str());
    });

    // embed-index
    auto* embed_index = app.add_subcommand("embed-index", "embed repair pairs into a vector index");
    std::string ei_pairs, ei_out;
    ConfigOverrides ei_over;
    ei_over.attach(embed_index, false);
    embed_index->add_option("--pairs", ei_pairs, "pairs.jsonl");
    embed_index->add_option("--out", ei_out, "output index file")->required();
    embed_index->callback([&] {
        RunConfig cfg = ei_over.resolve();
        auto pairs = read_pairs_jsonl(pick_path(ei_pairs, cfg.pairs_path, "--pairs"));
        auto gateway = make_gateway(cfg);
        VectorIndex index = build_vector_index(pairs, *gateway);
        save_index(index, ei_out);
        std::printf("indexed %zu pairs over %zu problems (dims %zu, backend %s) -> %s\n",
                    index.record_count(), index.by_problem.size(), index.dims,
                    index.backend_id.c_str(), ei_out.c_str());
    });

    // repair
    auto* repair = app.add_subcommand("repair", "repair one buggy program");
    std::string rp_problems, rp_pairs, rp_index, rp_problem_id, rp_code, rp_out;
    std::string rp_sample_id = "sample";
    ConfigOverrides rp_over;
    rp_over.attach(repair);
    repair->add_option("--problems", rp_problems, "problems.jsonl");
    repair->add_option("--pairs", rp_pairs, "pairs.jsonl");
    repair->add_option("--index", rp_index, "vector index file");
    repair->add_option("--problem-id", rp_problem_id, "problem the code answers")->required();
    repair->add_option("--code", rp_code, "file with the buggy code")->required();
    repair->add_option("--sample-id", rp_sample_id, "label used in the trace");
    repair->add_option("--out", rp_out, "write the trace JSON here instead of stdout");
    repair->callback([&] {
        RunConfig cfg = rp_over.resolve();
        auto problems =
            load_problems_jsonl(pick_path(rp_problems, cfg.problems_path, "--problems"));
        auto pairs = read_pairs_jsonl(pick_path(rp_pairs, cfg.pairs_path, "--pairs"));
        VectorIndex index = load_index(pick_path(rp_index, cfg.index_path, "--index"));
        auto gateway = make_gateway(cfg);
        RepairEngine engine(*gateway, index, pairs, cfg);
        RepairTrace trace =
            engine.repair_sample(find_problem(problems, rp_problem_id),
                                 read_text_file(rp_code), cfg.default_language, rp_sample_id);
        nlohmann::json doc = repair_trace_json(trace, !cfg.deterministic);
        if (rp_out.empty())
            std::cout << doc.dump(2) << "\n";
        else
            atomic_write_file(rp_out, doc.dump(2) + "\n");
        std::fprintf(stderr, "status: %s after %zu generation(s)\n", to_string(trace.status),
                     trace.iterations.size());
    });

    // judge
    auto* judge = app.add_subcommand("judge", "run a program against a problem's test suite");
    std::string jd_problems, jd_problem_id, jd_code;
    bool jd_json = false;
    ConfigOverrides jd_over;
    jd_over.attach(judge);
    judge->add_option("--problems", jd_problems, "problems.jsonl");
    judge->add_option("--problem-id", jd_problem_id, "problem to judge against")->required();
    judge->add_option("--code", jd_code, "file with the program")->required();
    judge->add_flag("--json", jd_json, "print the verdicts as JSON");
    judge->callback([&] {
        RunConfig cfg = jd_over.resolve();
        auto problems =
            load_problems_jsonl(pick_path(jd_problems, cfg.problems_path, "--problems"));
        const Problem& problem = find_problem(problems, jd_problem_id);
        EvaluationResult result = evaluate_code(read_text_file(jd_code), cfg.default_language,
                                                problem, cfg.runners, cfg.limits);
        if (jd_json) {
            nlohmann::json verdicts = nlohmann::json::array();
            for (const auto& v : result.verdicts)
                verdicts.push_back({{"case", v.case_index}, {"outcome", to_string(v.outcome)}});
            nlohmann::json passes = nlohmann::json::array();
            for (bool b : result.passes) passes.push_back(b ? 1 : 0);
            std::cout << nlohmann::json{{"passes", passes},
                                        {"verdicts", verdicts},
                                        {"compile_error", result.compile_error},
                                        {"all_pass", result.all_pass()}}
                             .dump(2)
                      << "\n";
        } else {
            std::size_t passed = 0;
            for (const auto& v : result.verdicts) {
                std::printf("case %zu: %s (%.3fs)\n", v.case_index, to_string(v.outcome),
                            v.wall_time_seconds);
                if (v.outcome == Outcome::pass) ++passed;
            }
            std::printf("passed %zu/%zu%s\n", passed, result.verdicts.size(),
                        result.compile_error ? " (compile error)" : "");
        }
    });

    // eval-desc
    auto* eval_desc = app.add_subcommand("eval-desc",
                                         "match generated bug descriptions against ground truth");
    std::string ed_problems, ed_problem_id, ed_code, ed_truth, ed_generated;
    bool ed_gated = false;
    ConfigOverrides ed_over;
    ed_over.attach(eval_desc);
    eval_desc->add_option("--problems", ed_problems, "problems.jsonl");
    eval_desc->add_option("--problem-id", ed_problem_id, "problem the code answers")->required();
    eval_desc->add_option("--code", ed_code, "file with the buggy code")->required();
    eval_desc->add_option("--truth", ed_truth, "JSON array of ground-truth descriptions")
        ->required();
    eval_desc->add_option("--generated", ed_generated, "JSON array of generated descriptions")
        ->required();
    eval_desc->add_flag("--gated", ed_gated, "score as a sample whose repair failed the tests");
    eval_desc->callback([&] {
        RunConfig cfg = ed_over.resolve();
        auto problems =
            load_problems_jsonl(pick_path(ed_problems, cfg.problems_path, "--problems"));
        auto gateway = make_gateway(cfg);
        MatchMatrix matrix = match_sets(*gateway, find_problem(problems, ed_problem_id),
                                        read_text_file(ed_code), read_string_array(ed_truth),
                                        read_string_array(ed_generated), cfg.match_options);
        SampleScore score = sample_score(matrix, !ed_gated);
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& row : matrix.entries) entries.push_back(row);
        std::cout << nlohmann::json{{"matrix", entries},
                                    {"tp", score.tp},
                                    {"fp", score.fp},
                                    {"fn", score.fn},
                                    {"precision", score.precision},
                                    {"recall", score.recall},
                                    {"f1", score.f1},
                                    {"gated", score.gated}}
                         .dump(2)
                  << "\n";
    });

    // bench
    auto* bench = app.add_subcommand("bench", "repair and score a whole benchmark dataset");
    std::string bn_problems, bn_pairs, bn_index, bn_dataset, bn_out;
    bool bn_quiet = false;
    ConfigOverrides bn_over;
    bn_over.attach(bench);
    bench->add_option("--problems", bn_problems, "problems.jsonl");
    bench->add_option("--pairs", bn_pairs, "pairs.jsonl");
    bench->add_option("--index", bn_index, "vector index file");
    bench->add_option("--dataset", bn_dataset, "benchmark dataset JSONL")->required();
    bench->add_option("--out", bn_out, "output report JSON")->required();
    bench->add_flag("--quiet", bn_quiet, "suppress the summary printout");
    bench->callback([&] {
        RunConfig cfg = bn_over.resolve();
        auto problems =
            load_problems_jsonl(pick_path(bn_problems, cfg.problems_path, "--problems"));
        auto pairs = read_pairs_jsonl(pick_path(bn_pairs, cfg.pairs_path, "--pairs"));
        VectorIndex index = load_index(pick_path(bn_index, cfg.index_path, "--index"));
        auto dataset = load_dataset(bn_dataset, cfg.default_language);
        auto gateway = make_gateway(cfg);
        nlohmann::json report =
            run_benchmark(problems, pairs, index, dataset, *gateway, cfg);
        atomic_write_file(bn_out, report.dump(2) + "\n");
        if (!bn_quiet) std::cout << report_summary_text(report);
    });

    // report
    auto* report_cmd = app.add_subcommand("report", "print the summary of a benchmark report");
    std::string rr_in;
    report_cmd->add_option("--in", rr_in, "report JSON file")->required();
    report_cmd->callback([&] {
        nlohmann::json report;
        try {
            report = nlohmann::json::parse(read_text_file(rr_in));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::data, rr_in + " is not a report: " + e.what());
        }
        std::cout << report_summary_text(report);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const refix::Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", refix::to_string(e.kind()), e.what());
        return error_exit_code(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

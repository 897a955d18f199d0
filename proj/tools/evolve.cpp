// evolve: command-line client for the knowledge lifecycle.
#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "evolve/errors.hpp"
#include "evolve/eval/harness.hpp"
#include "evolve/service/runtime.hpp"
#include "evolve/service/server.hpp"

namespace fs = std::filesystem;
using namespace evolve;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::string config_path;
    bool mock = false;
    std::vector<std::string> sets;
    std::optional<double> threshold;
    std::string mode;
    std::string retrieval;
    std::string db;
    std::optional<int> port;
    std::string log_level = "warn";
};

Config build_config(const GlobalOptions& g) {
    std::vector<std::string> overrides = g.sets;
    if (g.threshold) overrides.push_back("thresholds.similarity=" + std::to_string(*g.threshold));
    if (!g.mode.empty()) overrides.push_back("generation.mode=\"" + g.mode + "\"");
    if (!g.retrieval.empty()) overrides.push_back("retrieval.mode=\"" + g.retrieval + "\"");
    if (!g.db.empty()) {
        overrides.push_back("paths.db=\"" + g.db + "\"");
        const bool explicit_vectors = std::any_of(g.sets.begin(), g.sets.end(),
                                                  [](const std::string& s) { return s.rfind("paths.vectors=", 0) == 0; });
        if (!explicit_vectors) overrides.push_back("paths.vectors=\"" + g.db + ".vectors\"");
    }
    if (g.port) overrides.push_back("service.port=" + std::to_string(*g.port));

    std::optional<fs::path> path;
    if (!g.config_path.empty()) {
        if (!fs::exists(g.config_path)) throw UsageError("config file not found: " + g.config_path);
        path = g.config_path;
    }
    Config c = load_config(path, overrides);
    if (g.mock) {
        const Config m = mock_config();
        c.local = m.local;
        c.embedder = m.embedder;
        c.judge = m.judge;
        c.default_teacher = m.default_teacher;
        for (auto& t : c.teachers) t.endpoint = m.default_teacher;
        if (!path && g.db.empty()) {
            c.db_path = m.db_path;
            c.vector_path.clear();
        }
    }
    return c;
}

RuntimeOptions runtime_options(const GlobalOptions& g) {
    RuntimeOptions o;
    o.mock = g.mock;
    return o;
}

void print_response(const QueryResponse& r, bool as_json) {
    if (as_json) {
        std::cout << to_json(r).dump(2) << "\n";
        return;
    }
    std::cout << r.answer << "\n";
    if (!r.references.empty()) {
        std::cout << "\nReferences:\n";
        for (std::size_t i = 0; i < r.references.size(); ++i)
            std::cout << "  [" << i + 1 << "] " << r.references[i].topic << " (" << r.references[i].section_id
                      << ")\n";
    }
    const auto& m = r.metrics;
    std::cout << "\n-- route " << to_string(r.route) << ", cache " << (m.cache_hit ? "hit" : "miss") << ", teacher calls "
              << m.teacher_calls << ", blocks " << m.blocks << ", " << m.latency_ms << " ms";
    for (const auto& f : r.flags) std::cout << ", " << f;
    std::cout << "\n";
}

void print_report(const ConsolidationReport& r) {
    const std::pair<const char*, std::size_t> rows[] = {
        {"staging in", r.staging_in},           {"discarded (ttl)", r.discarded},
        {"moved directly", r.direct_moves},     {"compile calls", r.compile_calls},
        {"compiled sections", r.compiled_out},  {"canonical consumed", r.canonical_consumed},
        {"redundant", r.redundant},             {"deferred", r.deferred},
        {"canonical before", r.canonical_before}, {"canonical after", r.canonical_after},
        {"staging after", r.staging_after},
    };
    for (const auto& [label, value] : rows) std::cout << std::left << std::setw(20) << label << value << "\n";
}

std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty()) out.push_back(trim(item));
    return out;
}

int run_bench(const GlobalOptions& g, const std::string& fixture, const std::string& conditions_raw,
              const std::string& modes_raw, const std::string& out_dir) {
    if (!fs::is_regular_file(fixture)) throw UsageError("fixture not found: " + fixture);
    eval::LifecycleOptions opts;
    opts.conditions.clear();
    opts.modes.clear();
    try {
        for (const auto& c : split_list(conditions_raw)) opts.conditions.push_back(eval::parse_condition(c));
        for (const auto& m : split_list(modes_raw)) opts.modes.push_back(parse_generation_mode(m));
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (opts.conditions.empty()) throw UsageError("--condition needs at least one condition");
    if (opts.modes.empty()) throw UsageError("--modes needs at least one mode");

    const auto questions = eval::load_questions(fixture);
    Config config = build_config(g);
    opts.sleep.overlap_threshold = config.overlap_threshold;
    Runtime rt(config, runtime_options(g));
    if (auto* mock = rt.mock()) script_questions(*mock, questions, runtime_options(g).mock_options.default_category);

    const auto result = eval::run_lifecycle(questions, opts, rt.orchestrator(), rt.judge(), rt.kb(), rt.teachers(),
                                            rt.clock());
    fs::create_directories(out_dir);
    const std::string stem = fs::path(fixture).stem().string();
    for (const auto& run : result.runs) {
        const auto base = fs::path(out_dir) / (stem + "_" + std::string(eval::to_string(run.condition)));
        std::ofstream csv(base.string() + ".csv", std::ios::binary);
        eval::write_csv(run, csv);
        const auto summary = eval::summarize(run);
        std::ofstream(base.string() + ".summary.json") << summary.dump(2) << "\n";
        std::cout << eval::to_string(run.condition) << ": " << run.records.size() << " questions -> " << base.string()
                  << ".csv\n";
        for (const auto& [mode, s] : summary["modes"].items()) {
            std::cout << "  " << mode << " accuracy ";
            if (s["score_accuracy"].is_null())
                std::cout << "n/a\n";
            else
                std::cout << std::fixed << std::setprecision(1) << 100.0 * s["score_accuracy"].get<double>()
                          << "% strict " << 100.0 * s["strict_rate"].get<double>() << "% ["
                          << 100.0 * s["wilson_95"][0].get<double>() << ", " << 100.0 * s["wilson_95"][1].get<double>()
                          << "]\n";
        }
    }
    if (result.consolidation) {
        std::ofstream(fs::path(out_dir) / (stem + "_consolidation.json")) << to_json(*result.consolidation).dump(2)
                                                                           << "\n";
        std::cout << "consolidation:\n";
        print_report(*result.consolidation);
    }
    return kExitOk;
}

int run_chat(const GlobalOptions& g) {
    Runtime rt(build_config(g), runtime_options(g));
    ConversationHistory history;
    std::cout << "evolve chat. /sleep consolidates, /stats shows counts, /quit exits.\n";
    std::string line;
    while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line == "/quit" || line == "/exit") break;
        if (line == "/sleep") {
            print_report(rt.consolidate());
            continue;
        }
        if (line == "/stats") {
            std::cout << "staging " << rt.metadata().count(StoreKind::staging) << ", canonical "
                      << rt.metadata().count(StoreKind::canonical) << "\n";
            continue;
        }
        try {
            print_response(rt.orchestrator().answer_query(line, history), false);
        } catch (const StageError& e) {
            std::cout << "error in " << e.stage() << ": " << e.message() << "\n";
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evolve: persistent knowledge lifecycle for small local models"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("-c,--config", g.config_path, "JSON config file");
    app.add_flag("--mock", g.mock, "Use the deterministic offline model stack");
    app.add_option("--set", g.sets, "Override a config key: dotted.key=value")->take_all();
    app.add_option("--threshold", g.threshold, "Similarity threshold")->check(CLI::Range(0.0, 1.0));
    app.add_option("--mode", g.mode, "Generation mode: suppress or augment");
    app.add_option("--retrieval", g.retrieval, "Retrieval mode: section or chunk");
    app.add_option("--db", g.db, "Metadata database path");
    app.add_option("--port", g.port, "Service port");
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error");

    auto* chat = app.add_subcommand("chat", "Interactive session with history");

    std::string question;
    bool ask_json = false;
    auto* ask = app.add_subcommand("ask", "Answer one question");
    ask->add_option("question", question, "Question text")->required();
    ask->add_flag("--json", ask_json, "Print the full response as JSON");

    std::string fixture, conditions = "cold,warm,post_consolidation", modes = "suppress,augment", out_dir = "bench_out";
    auto* bench = app.add_subcommand("bench", "Run the benchmark over a question fixture");
    bench->add_option("fixture", fixture, "JSON array of questions")->required();
    bench->add_option("--condition", conditions, "Comma list of baseline, cold, warm, post_consolidation");
    bench->add_option("--modes", modes, "Comma list of suppress, augment");
    bench->add_option("-o,--out", out_dir, "Output directory for CSV and summary files");

    auto* sleep = app.add_subcommand("sleep", "Consolidate staging into canonical");
    bool sleep_json = false;
    sleep->add_flag("--json", sleep_json, "Print the report as JSON");
    auto* stats = app.add_subcommand("stats", "Store counts");
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        spdlog::set_level(spdlog::level::from_str(g.log_level));
        if (*chat) return run_chat(g);
        if (*ask) {
            Runtime rt(build_config(g), runtime_options(g));
            ConversationHistory history;
            print_response(rt.orchestrator().answer_query(question, history), ask_json);
            return kExitOk;
        }
        if (*bench) return run_bench(g, fixture, conditions, modes, out_dir);
        if (*sleep) {
            Runtime rt(build_config(g), runtime_options(g));
            const auto report = rt.consolidate();
            if (sleep_json)
                std::cout << to_json(report).dump(2) << "\n";
            else
                print_report(report);
            return kExitOk;
        }
        if (*stats) {
            Runtime rt(build_config(g), runtime_options(g));
            std::cout << nlohmann::json{{"staging_count", rt.metadata().count(StoreKind::staging)},
                                        {"canonical_count", rt.metadata().count(StoreKind::canonical)},
                                        {"index_records", rt.index().record_count()}}
                             .dump(2)
                      << "\n";
            return kExitOk;
        }
        if (*serve) {
            Runtime rt(build_config(g), runtime_options(g));
            Service service(rt);
            if (!service.listen(rt.config().host, rt.config().port)) {
                std::cerr << "could not bind " << rt.config().host << ":" << rt.config().port << "\n";
                return kExitRuntime;
            }
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const StageError& e) {
        std::cerr << "error in " << e.stage() << ": " << e.message() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

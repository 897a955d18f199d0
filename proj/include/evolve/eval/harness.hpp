#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evolve/consolidation/sleep_cycle.hpp"
#include "evolve/core/clock.hpp"
#include "evolve/llm/gateway.hpp"
#include "evolve/pipeline/orchestrator.hpp"
#include "evolve/prompt/template.hpp"

namespace evolve::eval {

enum class Bucket { specialist, synthesis, control, external };

std::string_view to_string(Bucket bucket);
Bucket parse_bucket(std::string_view raw);

struct BenchmarkQuestion {
    std::string id;
    std::string question;
    std::string gold;
    std::string source;
    Bucket bucket = Bucket::external;
    std::string category;  // optional hint, used only when scripting the offline models
};

/// Accepts `question`/`query` for the text and `gold`/`answer`/`gold_answer`
/// for the reference answer. Throws ParseError on missing fields, empty gold,
/// or duplicate ids.
std::vector<BenchmarkQuestion> parse_questions(const nlohmann::json& doc);
std::vector<BenchmarkQuestion> load_questions(const std::filesystem::path& path);

enum class Condition { baseline, cold, warm, post_consolidation };

std::string_view to_string(Condition condition);
Condition parse_condition(std::string_view raw);

enum class Judgment { correct, partial, wrong, refused, judge_error };

std::string_view to_string(Judgment judgment);
Judgment parse_judgment(std::string_view raw);

/// LLM judge at temperature 0. Output that still fails to parse after
/// `attempts` calls becomes judge_error.
class Judge {
public:
    Judge(LlmGateway& gateway, PromptLibrary& prompts, ModelEndpoint endpoint, int attempts = 3);

    Judgment judge(const std::string& question, const std::string& gold, const std::string& response);

private:
    LlmGateway& gateway_;
    PromptLibrary& prompts_;
    ModelEndpoint endpoint_;
    int attempts_;
};

struct ModeResult {
    std::string mode;  // suppress, augment, or baseline
    std::string response;
    Judgment judgment = Judgment::wrong;
    std::int64_t latency_ms = 0;
};

struct RunRecord {
    std::string question_id;
    Condition condition = Condition::baseline;
    std::vector<ModeResult> modes;
    bool cache_hit = false;
    std::size_t teacher_calls = 0;
    std::size_t blocks = 0;
    std::optional<std::string> error;
};

struct BenchmarkRun {
    Condition condition = Condition::baseline;
    std::vector<std::string> modes;
    std::vector<RunRecord> records;
};

/// Baseline asks the bare local model once per question. Every other
/// condition runs one pipeline pass per question then one generation per
/// mode. Per-question failures become `wrong` rows tagged with the error.
/// Questions are independent: each starts with an empty history.
BenchmarkRun run_benchmark(const std::vector<BenchmarkQuestion>& questions, Condition condition,
                           const std::vector<GenerationMode>& modes, Orchestrator& orchestrator, Judge& judge,
                           const Clock& clock);

inline const std::vector<std::string> kCsvColumns{"id",     "mode",          "response", "judgment",
                                                  "cache_hit", "teacher_calls", "blocks", "latency_ms"};

/// One row per (question, mode), RFC 4180 quoting, LF line endings.
void write_csv(const BenchmarkRun& run, std::ostream& out);
std::string to_csv(const BenchmarkRun& run);

struct ModeSummary {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t partial = 0;
    std::size_t wrong = 0;
    std::size_t refused = 0;
    std::size_t judge_error = 0;
};

/// Accuracies per mode (refused and judge_error score 0 but stay in the
/// denominator; an accuracy without judge errors is reported beside it),
/// Wilson interval on the strict rate, and per-question cost metrics.
nlohmann::json summarize(const BenchmarkRun& run);

struct LifecycleOptions {
    std::vector<Condition> conditions{Condition::cold, Condition::warm, Condition::post_consolidation};
    std::vector<GenerationMode> modes{GenerationMode::suppress, GenerationMode::augment};
    SleepOptions sleep;
};

struct LifecycleResult {
    std::vector<BenchmarkRun> runs;  // requested conditions only, in lifecycle order
    std::optional<ConsolidationReport> consolidation;
};

/// cold -> warm -> sleep cycle -> post_consolidation, run up to the last
/// requested stage. Cold requires empty stores. Baseline, when requested,
/// runs first and touches no store.
LifecycleResult run_lifecycle(const std::vector<BenchmarkQuestion>& questions, const LifecycleOptions& options,
                              Orchestrator& orchestrator, Judge& judge, KnowledgeBase& kb,
                              TeacherService& teachers, const Clock& clock);

}  // namespace evolve::eval

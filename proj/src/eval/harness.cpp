#include "evolve/eval/harness.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <set>
#include <sstream>

#include "evolve/errors.hpp"
#include "evolve/eval/stats.hpp"
#include "evolve/llm/json_extract.hpp"

namespace evolve::eval {
namespace {

std::string first_string(const nlohmann::json& obj, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        auto it = obj.find(k);
        if (it == obj.end() || it->is_null()) continue;
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number()) return it->dump();
        throw ParseError(std::string("benchmark field '") + k + "' must be a string");
    }
    return {};
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::int64_t elapsed_ms(const Clock& clock, Timestamp since) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(clock.now() - since).count();
}

}  // namespace

std::string_view to_string(Bucket bucket) {
    switch (bucket) {
        case Bucket::specialist: return "specialist";
        case Bucket::synthesis: return "synthesis";
        case Bucket::control: return "control";
        case Bucket::external: return "external";
    }
    return "external";
}

Bucket parse_bucket(std::string_view raw) {
    const auto v = to_lower(trim(raw));
    if (v == "specialist") return Bucket::specialist;
    if (v == "synthesis") return Bucket::synthesis;
    if (v == "control") return Bucket::control;
    if (v == "external" || v.empty()) return Bucket::external;
    throw ParseError("unknown bucket '" + std::string(raw) + "'");
}

std::vector<BenchmarkQuestion> parse_questions(const nlohmann::json& doc) {
    const nlohmann::json* items = &doc;
    if (doc.is_object() && doc.contains("questions")) items = &doc.at("questions");
    if (!items->is_array()) throw ParseError("benchmark fixture must be a JSON array of questions");

    std::vector<BenchmarkQuestion> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < items->size(); ++i) {
        const auto& q = (*items)[i];
        if (!q.is_object()) throw ParseError("benchmark entry " + std::to_string(i) + " is not an object");
        BenchmarkQuestion b;
        b.id = first_string(q, {"id", "question_id"});
        if (b.id.empty()) b.id = "q" + std::to_string(i + 1);
        b.question = first_string(q, {"question", "query", "text"});
        b.gold = first_string(q, {"gold", "answer", "gold_answer"});
        b.source = first_string(q, {"source"});
        b.bucket = parse_bucket(first_string(q, {"bucket"}));
        b.category = first_string(q, {"category"});
        if (trim(b.question).empty()) throw ParseError("benchmark entry " + b.id + " has no question text");
        if (trim(b.gold).empty()) throw ParseError("benchmark entry " + b.id + " has an empty gold answer");
        if (!seen.insert(b.id).second) throw ParseError("duplicate benchmark id " + b.id);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<BenchmarkQuestion> load_questions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open benchmark fixture " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("benchmark fixture " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_questions(doc);
}

std::string_view to_string(Condition condition) {
    switch (condition) {
        case Condition::baseline: return "baseline";
        case Condition::cold: return "cold";
        case Condition::warm: return "warm";
        case Condition::post_consolidation: return "post_consolidation";
    }
    return "baseline";
}

Condition parse_condition(std::string_view raw) {
    auto v = to_lower(trim(raw));
    std::replace(v.begin(), v.end(), '-', '_');
    if (v == "baseline") return Condition::baseline;
    if (v == "cold") return Condition::cold;
    if (v == "warm") return Condition::warm;
    if (v == "post_consolidation" || v == "post") return Condition::post_consolidation;
    throw ParseError("unknown condition '" + std::string(raw) + "'");
}

std::string_view to_string(Judgment judgment) {
    switch (judgment) {
        case Judgment::correct: return "correct";
        case Judgment::partial: return "partial";
        case Judgment::wrong: return "wrong";
        case Judgment::refused: return "refused";
        case Judgment::judge_error: return "judge_error";
    }
    return "judge_error";
}

Judgment parse_judgment(std::string_view raw) {
    const auto v = to_lower(trim(raw));
    if (v == "correct") return Judgment::correct;
    if (v == "partial" || v == "partially correct") return Judgment::partial;
    if (v == "wrong" || v == "incorrect") return Judgment::wrong;
    if (v == "refused" || v == "refusal") return Judgment::refused;
    if (v == "judge_error") return Judgment::judge_error;
    throw ParseError("unknown judgment '" + std::string(raw) + "'");
}

Judge::Judge(LlmGateway& gateway, PromptLibrary& prompts, ModelEndpoint endpoint, int attempts)
    : gateway_(gateway), prompts_(prompts), endpoint_(std::move(endpoint)), attempts_(std::max(1, attempts)) {}

Judgment Judge::judge(const std::string& question, const std::string& gold, const std::string& response) {
    const std::string prompt =
        prompts_.render("judge", {{"question", question}, {"gold", gold}, {"response", response}});
    const nlohmann::json context{{"question", question}, {"gold", gold}, {"response", response}};
    for (int attempt = 1; attempt <= attempts_; ++attempt) {
        std::string raw;
        try {
            raw = gateway_.chat(endpoint_, {{"user", prompt}}, RoleKind::judge, "judge", context);
        } catch (const TransportError& e) {
            spdlog::warn("judge call failed: {}", e.what());
            return Judgment::judge_error;
        }
        try {
            const auto doc = extract_json(raw);
            if (doc.is_object()) {
                for (const char* key : {"judgment", "verdict", "label"})
                    if (doc.contains(key) && doc.at(key).is_string()) return parse_judgment(doc.at(key).get<std::string>());
            } else if (doc.is_string()) {
                return parse_judgment(doc.get<std::string>());
            }
            spdlog::warn("judge output has no judgment field (attempt {}/{})", attempt, attempts_);
        } catch (const Error& e) {
            spdlog::warn("judge output unparseable (attempt {}/{}): {}", attempt, attempts_, e.what());
        }
    }
    return Judgment::judge_error;
}

BenchmarkRun run_benchmark(const std::vector<BenchmarkQuestion>& questions, Condition condition,
                           const std::vector<GenerationMode>& modes, Orchestrator& orchestrator, Judge& judge,
                           const Clock& clock) {
    BenchmarkRun run;
    run.condition = condition;
    if (condition == Condition::baseline) {
        run.modes = {"baseline"};
    } else {
        if (modes.empty()) throw ConfigError("benchmark needs at least one generation mode");
        for (auto m : modes) run.modes.emplace_back(to_string(m));
    }

    for (const auto& q : questions) {
        RunRecord rec;
        rec.question_id = q.id;
        rec.condition = condition;
        try {
            if (condition == Condition::baseline) {
                const auto start = clock.now();
                ModeResult m{"baseline", orchestrator.answer_baseline(q.question), Judgment::wrong, 0};
                m.latency_ms = elapsed_ms(clock, start);
                m.judgment = judge.judge(q.question, q.gold, m.response);
                rec.modes.push_back(std::move(m));
            } else {
                const auto prepared = orchestrator.prepare(q.question, ConversationHistory{});
                rec.cache_hit = prepared.metrics.cache_hit;
                rec.teacher_calls = prepared.metrics.teacher_calls;
                rec.blocks = prepared.sections.size();
                for (auto mode : modes) {
                    auto response = orchestrator.finish(prepared, mode);
                    ModeResult m{std::string(to_string(mode)), std::move(response.answer), Judgment::wrong,
                                 response.metrics.latency_ms};
                    m.judgment = judge.judge(q.question, q.gold, m.response);
                    rec.modes.push_back(std::move(m));
                }
            }
        } catch (const std::exception& e) {
            spdlog::warn("question {} failed under {}: {}", q.id, to_string(condition), e.what());
            if (const auto* se = dynamic_cast<const StageError*>(&e))
                rec.error = "ERROR[" + se->stage() + "]: " + se->message();
            else
                rec.error = std::string("ERROR: ") + e.what();
            rec.modes.clear();
            for (const auto& name : run.modes) rec.modes.push_back({name, *rec.error, Judgment::wrong, 0});
        }
        run.records.push_back(std::move(rec));
    }
    return run;
}

void write_csv(const BenchmarkRun& run, std::ostream& out) {
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) out << (i ? "," : "") << kCsvColumns[i];
    out << '\n';
    for (const auto& rec : run.records) {
        for (const auto& m : rec.modes) {
            out << csv_field(rec.question_id) << ',' << csv_field(m.mode) << ',' << csv_field(m.response) << ','
                << to_string(m.judgment) << ',' << (rec.cache_hit ? "true" : "false") << ',' << rec.teacher_calls
                << ',' << rec.blocks << ',' << m.latency_ms << '\n';
        }
    }
}

std::string to_csv(const BenchmarkRun& run) {
    std::ostringstream out;
    write_csv(run, out);
    return out.str();
}

nlohmann::json summarize(const BenchmarkRun& run) {
    nlohmann::json modes = nlohmann::json::object();
    for (const auto& name : run.modes) {
        ModeSummary s;
        for (const auto& rec : run.records)
            for (const auto& m : rec.modes) {
                if (m.mode != name) continue;
                ++s.total;
                switch (m.judgment) {
                    case Judgment::correct: ++s.correct; break;
                    case Judgment::partial: ++s.partial; break;
                    case Judgment::wrong: ++s.wrong; break;
                    case Judgment::refused: ++s.refused; break;
                    case Judgment::judge_error: ++s.judge_error; break;
                }
            }
        nlohmann::json m{{"total", s.total},     {"correct", s.correct}, {"partial", s.partial},
                         {"wrong", s.wrong},     {"refused", s.refused}, {"judge_error", s.judge_error}};
        if (s.total > 0) {
            const auto n = static_cast<std::int64_t>(s.total);
            const auto ci = wilson_interval(static_cast<std::int64_t>(s.correct), n);
            m["score_accuracy"] = score_accuracy(static_cast<std::int64_t>(s.correct),
                                                 static_cast<std::int64_t>(s.partial), n);
            m["strict_rate"] = static_cast<double>(s.correct) / static_cast<double>(s.total);
            m["wilson_95"] = {ci.lo, ci.hi};
            const auto judged = n - static_cast<std::int64_t>(s.judge_error);
            m["score_accuracy_excluding_judge_errors"] =
                judged > 0 ? nlohmann::json(score_accuracy(static_cast<std::int64_t>(s.correct),
                                                           static_cast<std::int64_t>(s.partial), judged))
                           : nlohmann::json(nullptr);
        } else {
            m["score_accuracy"] = nullptr;
            m["strict_rate"] = nullptr;
            m["wilson_95"] = nullptr;
            m["score_accuracy_excluding_judge_errors"] = nullptr;
        }
        modes[name] = m;
    }

    const std::size_t n = run.records.size();
    std::size_t hits = 0, teacher = 0, blocks = 0, errors = 0, latency_samples = 0;
    std::int64_t latency = 0;
    for (const auto& rec : run.records) {
        hits += rec.cache_hit ? 1 : 0;
        teacher += rec.teacher_calls;
        blocks += rec.blocks;
        errors += rec.error ? 1 : 0;
        for (const auto& m : rec.modes) {
            latency += m.latency_ms;
            ++latency_samples;
        }
    }
    auto ratio = [&](double num, std::size_t den) {
        return den == 0 ? nlohmann::json(nullptr) : nlohmann::json(num / static_cast<double>(den));
    };
    return {{"condition", std::string(to_string(run.condition))},
            {"questions", n},
            {"question_errors", errors},
            {"modes", modes},
            {"cache_hit_rate", ratio(static_cast<double>(hits), n)},
            {"teacher_calls_per_query", ratio(static_cast<double>(teacher), n)},
            {"blocks_per_query", ratio(static_cast<double>(blocks), n)},
            {"mean_latency_ms", ratio(static_cast<double>(latency), latency_samples)},
            {"denominator_policy", "refused and judge_error count in total with score 0"}};
}

LifecycleResult run_lifecycle(const std::vector<BenchmarkQuestion>& questions, const LifecycleOptions& options,
                              Orchestrator& orchestrator, Judge& judge, KnowledgeBase& kb,
                              TeacherService& teachers, const Clock& clock) {
    auto wanted = [&](Condition c) {
        return std::find(options.conditions.begin(), options.conditions.end(), c) != options.conditions.end();
    };
    LifecycleResult result;
    if (wanted(Condition::baseline))
        result.runs.push_back(run_benchmark(questions, Condition::baseline, {}, orchestrator, judge, clock));

    int last = -1;
    for (auto c : options.conditions)
        if (c != Condition::baseline) last = std::max(last, static_cast<int>(c));
    if (last < 0) return result;

    if (kb.metadata().count() != 0)
        throw ConfigError("the cold condition needs empty stores; found " + std::to_string(kb.metadata().count()) +
                          " sections");
    auto cold = run_benchmark(questions, Condition::cold, options.modes, orchestrator, judge, clock);
    if (wanted(Condition::cold)) result.runs.push_back(std::move(cold));
    if (last < static_cast<int>(Condition::warm)) return result;

    auto warm = run_benchmark(questions, Condition::warm, options.modes, orchestrator, judge, clock);
    if (wanted(Condition::warm)) result.runs.push_back(std::move(warm));
    if (last < static_cast<int>(Condition::post_consolidation)) return result;

    result.consolidation = sleep_cycle(kb, teachers, clock, options.sleep);
    result.runs.push_back(run_benchmark(questions, Condition::post_consolidation, options.modes, orchestrator, judge,
                                        clock));
    return result;
}

}  // namespace evolve::eval

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "evolve/errors.hpp"
#include "evolve/eval/harness.hpp"
#include "evolve/eval/stats.hpp"
#include "evolve/service/runtime.hpp"
#include "support/support.hpp"

using namespace evolve;
using namespace evolve::eval;
using namespace evolve::testing;

namespace {

BenchmarkQuestion question(std::string id, std::string text, std::string gold, std::string category = "History") {
    BenchmarkQuestion q;
    q.id = std::move(id);
    q.question = std::move(text);
    q.gold = std::move(gold);
    q.category = std::move(category);
    return q;
}

}  // namespace

TEST_CASE("score_accuracy examples") {
    CHECK(score_accuracy(250, 0, 250) == doctest::Approx(1.0));
    CHECK(score_accuracy(0, 250, 250) == doctest::Approx(0.5));
    CHECK(score_accuracy(208, 9, 250) == doctest::Approx(0.850));
    CHECK(score_accuracy(0, 0, 10) == 0.0);
    CHECK_THROWS_AS(score_accuracy(0, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(score_accuracy(6, 5, 10), std::invalid_argument);
}

TEST_CASE("wilson interval examples and edges") {
    const auto half = wilson_interval(50, 100);
    CHECK(half.lo == doctest::Approx(0.404).epsilon(0.002));
    CHECK(half.hi == doctest::Approx(0.596).epsilon(0.002));
    CHECK(half.lo + half.hi == doctest::Approx(1.0));
    CHECK(wilson_interval(0, 40).lo == 0.0);
    CHECK(wilson_interval(40, 40).hi == doctest::Approx(1.0));
    CHECK_THROWS_AS(wilson_interval(0, 0), std::invalid_argument);
    CHECK_THROWS_AS(wilson_interval(5, 4), std::invalid_argument);
}

TEST_CASE("wilson interval properties") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng() % 1000);
        const std::int64_t k = static_cast<std::int64_t>(rng() % (n + 1));
        const auto ci = wilson_interval(k, n);
        const double p = static_cast<double>(k) / static_cast<double>(n);
        CHECK(ci.lo >= 0.0);
        CHECK(ci.hi <= 1.0);
        CHECK(ci.lo <= p + 1e-12);
        CHECK(p <= ci.hi + 1e-12);
        const auto mirror = wilson_interval(n - k, n);
        CHECK(std::fabs(ci.lo - (1.0 - mirror.hi)) < 1e-9);
    }
    double previous = 1.0;
    for (std::int64_t n : {10, 40, 160, 640, 2560}) {
        const auto ci = wilson_interval(n / 2, n);
        CHECK(ci.hi - ci.lo < previous);
        previous = ci.hi - ci.lo;
    }
}

TEST_CASE("judge verdicts through the offline judge") {
    Runtime rt(mock_config(), mock_options());
    auto& judge = rt.judge();
    CHECK(judge.judge("Half-life of C-14?", "5,730 years", "It is 5,730 years.") == Judgment::correct);
    CHECK(judge.judge("Who?", "Alfred Wegener", "Probably Wegener.") == Judgment::partial);
    CHECK(judge.judge("Who?", "Alfred Wegener", "Isaac Newton") == Judgment::wrong);
    CHECK(judge.judge("Who?", "Alfred Wegener", "I don't know.") == Judgment::refused);

    rt.mock()->set_judgment("ambiguous", "__garbage__");
    CHECK(judge.judge("Who?", "Alfred Wegener", "ambiguous") == Judgment::judge_error);
    CHECK(rt.mock()->calls("judge") == 4 + 3);

    rt.mock()->set_judgment("forced", "partially correct");
    CHECK(judge.judge("Who?", "x", "forced") == Judgment::partial);
}

TEST_CASE("judge transport failure becomes judge_error") {
    Runtime rt(mock_config(), mock_options());
    rt.mock()->fail_task("judge");
    CHECK(rt.judge().judge("q", "gold", "gold") == Judgment::judge_error);
}

TEST_CASE("parse helpers") {
    CHECK(parse_condition("post-consolidation") == Condition::post_consolidation);
    CHECK(parse_condition(" Warm ") == Condition::warm);
    CHECK_THROWS_AS(parse_condition("lukewarm"), ParseError);
    CHECK(parse_judgment("Incorrect") == Judgment::wrong);
    CHECK(parse_judgment("refusal") == Judgment::refused);
    CHECK_THROWS_AS(parse_judgment("maybe"), ParseError);
    CHECK(parse_bucket("") == Bucket::external);
    CHECK(parse_bucket("Specialist") == Bucket::specialist);
    CHECK_THROWS_AS(parse_bucket("misc"), ParseError);
}

TEST_CASE("parse_questions accepts aliases and rejects bad fixtures") {
    const auto qs = parse_questions(nlohmann::json::parse(R"({"questions": [
        {"id": "a", "question": "Q1", "gold": "G1", "bucket": "control"},
        {"id": "b", "query": "Q2", "answer": "G2"},
        {"id": "c", "question": "Q3", "gold_answer": "G3", "category": "Physics"}
    ]})"));
    REQUIRE(qs.size() == 3);
    CHECK(qs[0].bucket == Bucket::control);
    CHECK(qs[1].question == "Q2");
    CHECK(qs[1].gold == "G2");
    CHECK(qs[2].gold == "G3");
    CHECK(qs[2].category == "Physics");

    CHECK_THROWS_AS(parse_questions(nlohmann::json::parse(R"([{"id": "a", "question": "Q", "gold": " "}])")),
                    ParseError);
    CHECK_THROWS_AS(parse_questions(nlohmann::json::parse(
                        R"([{"id": "a", "question": "Q", "gold": "G"}, {"id": "a", "question": "Q", "gold": "G"}])")),
                    ParseError);
    CHECK_THROWS_AS(parse_questions(nlohmann::json::parse(R"([{"id": "a", "gold": "G"}])")), ParseError);
    CHECK_THROWS_AS(parse_questions(nlohmann::json::parse(R"({"id": "a"})")), ParseError);
    CHECK_THROWS_AS(load_questions("/nonexistent/fixture.json"), ConfigError);
    CHECK(load_questions(std::filesystem::path(EVOLVE_TEST_FIXTURES) / "benchmark_20.json").size() == 20);
}

TEST_CASE("empty benchmark writes only the header") {
    Runtime rt(mock_config(), mock_options());
    const auto run = run_benchmark({}, Condition::cold, {GenerationMode::suppress, GenerationMode::augment},
                                   rt.orchestrator(), rt.judge(), rt.clock());
    const auto rows = parse_csv(to_csv(run));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == kCsvColumns);
    const auto s = summarize(run);
    CHECK(s["questions"] == 0);
    CHECK(s["cache_hit_rate"].is_null());
}

TEST_CASE("baseline asks the local model once per question and never the teacher") {
    Runtime rt(mock_config(), mock_options());
    const std::vector<BenchmarkQuestion> qs{question("q1", "Who signed the Magna Carta?", "King John"),
                                            question("q2", "When did Rome fall?", "476")};
    script_questions(*rt.mock(), qs, "History");
    const auto run = run_benchmark(qs, Condition::baseline, {}, rt.orchestrator(), rt.judge(), rt.clock());
    REQUIRE(run.records.size() == 2);
    for (const auto& rec : run.records) {
        CHECK(rec.teacher_calls == 0);
        CHECK_FALSE(rec.cache_hit);
        REQUIRE(rec.modes.size() == 1);
        CHECK(rec.modes[0].mode == "baseline");
    }
    CHECK(rt.teachers().calls() == 0);
    CHECK(rt.metadata().count() == 0);
    const auto s = summarize(run);
    CHECK(s["teacher_calls_per_query"] == 0.0);
    CHECK(s["modes"]["baseline"]["total"] == 2);
}

TEST_CASE("cold then warm: rows per mode and cache behaviour") {
    Runtime rt(mock_config(), mock_options());
    const std::vector<BenchmarkQuestion> qs{question("q1", "Who signed the Magna Carta?", "King John"),
                                            question("q2", "When did the Western Roman Empire fall?", "476 AD")};
    script_questions(*rt.mock(), qs, "History");
    const std::vector<GenerationMode> modes{GenerationMode::suppress, GenerationMode::augment};
    const auto cold = run_benchmark(qs, Condition::cold, modes, rt.orchestrator(), rt.judge(), rt.clock());
    const auto warm = run_benchmark(qs, Condition::warm, modes, rt.orchestrator(), rt.judge(), rt.clock());
    for (const auto& rec : cold.records) {
        CHECK_FALSE(rec.cache_hit);
        CHECK(rec.teacher_calls > 0);
        CHECK(rec.modes.size() == 2);
    }
    for (const auto& rec : warm.records) {
        CHECK(rec.cache_hit);
        CHECK(rec.teacher_calls == 0);
    }
    const auto rows = parse_csv(to_csv(cold));
    CHECK(rows.size() == 1 + qs.size() * modes.size());
    const auto s = summarize(warm);
    CHECK(s["condition"] == "warm");
    CHECK(s["cache_hit_rate"] == 1.0);
    for (const char* m : {"suppress", "augment"}) {
        const auto& ms = s["modes"][m];
        CHECK(ms["total"] == 2);
        const auto sum = ms["correct"].get<int>() + ms["partial"].get<int>() + ms["wrong"].get<int>() +
                         ms["refused"].get<int>() + ms["judge_error"].get<int>();
        CHECK(sum == 2);
        CHECK(ms.contains("wilson_95"));
    }
}

TEST_CASE("csv quoting round-trips awkward responses") {
    BenchmarkRun run;
    run.condition = Condition::warm;
    run.modes = {"augment"};
    const std::vector<std::string> texts{"plain", "with, comma", "with \"quotes\"", "multi\nline\nanswer", ""};
    for (std::size_t i = 0; i < texts.size(); ++i) {
        RunRecord rec;
        rec.question_id = "q" + std::to_string(i);
        rec.condition = Condition::warm;
        rec.modes.push_back({"augment", texts[i], Judgment::partial, 12});
        rec.teacher_calls = i;
        run.records.push_back(rec);
    }
    const auto csv = to_csv(run);
    CHECK(csv.find("\r\n") == std::string::npos);
    const auto rows = parse_csv(csv);
    REQUIRE(rows.size() == 1 + texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto& row = rows[i + 1];
        REQUIRE(row.size() == kCsvColumns.size());
        CHECK(row[0] == "q" + std::to_string(i));
        CHECK(row[1] == "augment");
        CHECK(row[2] == texts[i]);
        CHECK(row[3] == "partial");
        CHECK(row[5] == std::to_string(i));
        CHECK(row[7] == "12");
    }
}

TEST_CASE("summarize counts refused and judge_error in the denominator") {
    BenchmarkRun run;
    run.condition = Condition::cold;
    run.modes = {"suppress"};
    const std::vector<Judgment> verdicts{Judgment::correct, Judgment::correct, Judgment::partial, Judgment::refused,
                                         Judgment::judge_error};
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        RunRecord rec;
        rec.question_id = std::to_string(i);
        rec.modes.push_back({"suppress", "r", verdicts[i], 0});
        run.records.push_back(rec);
    }
    const auto m = summarize(run)["modes"]["suppress"];
    CHECK(m["total"] == 5);
    CHECK(m["score_accuracy"].get<double>() == doctest::Approx(score_accuracy(2, 1, 5)));
    CHECK(m["score_accuracy_excluding_judge_errors"].get<double>() == doctest::Approx(score_accuracy(2, 1, 4)));
    CHECK(m["strict_rate"].get<double>() == doctest::Approx(0.4));
    const auto ci = wilson_interval(2, 5);
    CHECK(m["wilson_95"][0].get<double>() == doctest::Approx(ci.lo));
    CHECK(m["wilson_95"][1].get<double>() == doctest::Approx(ci.hi));
}

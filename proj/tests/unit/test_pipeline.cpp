#include <doctest.h>

#include <set>

#include "evolve/errors.hpp"
#include "evolve/service/runtime.hpp"
#include "support/support.hpp"

using namespace evolve;
using namespace evolve::testing;
using namespace std::chrono_literals;

namespace {

std::size_t count_task(const std::vector<HttpRequest>& reqs, const std::string& task) {
    return static_cast<std::size_t>(
        std::count_if(reqs.begin(), reqs.end(), [&](const HttpRequest& r) { return r.tag.task == task; }));
}

std::size_t count_path(const std::vector<HttpRequest>& reqs, const std::string& path) {
    return static_cast<std::size_t>(
        std::count_if(reqs.begin(), reqs.end(), [&](const HttpRequest& r) { return r.path == path; }));
}

// Mock stack whose chosen tasks are answered by `override` instead.
struct Intercepted {
    eval::MockModelServer mock;
    std::function<std::optional<HttpResponse>(const HttpRequest&)> override;
    FunctionTransport transport{[this](const HttpRequest& r) {
        if (override)
            if (auto reply = override(r)) return *reply;
        return mock.post(r);
    }};
    std::unique_ptr<Runtime> rt;

    Intercepted() {
        RuntimeOptions o = mock_options(true);
        o.transport = &transport;
        rt = std::make_unique<Runtime>(mock_config(), o);
    }
};

}  // namespace

TEST_CASE("strip_interrogatives") {
    CHECK(strip_interrogatives("What is the capital of France?") == "capital of France");
    CHECK(strip_interrogatives("Who wrote Hamlet") == "wrote Hamlet");
    CHECK(strip_interrogatives("Tell me about the Treaty of Westphalia.") == "Treaty of Westphalia");
    CHECK(strip_interrogatives("photosynthesis") == "photosynthesis");
    CHECK(strip_interrogatives("What is?") == "What is?");
}

TEST_CASE("greeting bypasses retrieval and teachers") {
    Runtime rt(mock_config(), mock_options(true));
    ConversationHistory h;
    const auto cls = rt.orchestrator().classify("hello!", h);
    CHECK(cls.query_type == QueryType::conversational);
    CHECK(cls.pairs.empty());
    rt.recorder()->clear();
    const auto r = rt.orchestrator().answer_query("hello!", h);
    CHECK(r.route == Route::conversational_bypass);
    CHECK(r.metrics.teacher_calls == 0);
    CHECK(r.references.empty());
    CHECK_FALSE(r.answer.empty());
    const auto reqs = rt.recorder()->requests();
    CHECK(count_path(reqs, "/v1/embeddings") == 0);
    CHECK(count_task(reqs, "classify") == 1);
    CHECK(count_task(reqs, "direct") == 1);
    CHECK(reqs.size() == 2);
    CHECK(rt.metadata().count() == 0);
}

TEST_CASE("coding queries bypass too") {
    Runtime rt(mock_config(), mock_options(true));
    ConversationHistory h;
    const auto r = rt.orchestrator().answer_query("Write a python function to reverse a list", h);
    CHECK(r.route == Route::coding_bypass);
    const auto reqs = rt.recorder()->requests();
    CHECK(count_path(reqs, "/v1/embeddings") == 0);
    CHECK(count_task(reqs, "direct_coding") == 1);
    CHECK(rt.teachers().calls() == 0);
}

TEST_CASE("classifier categories are normalized per pair") {
    Runtime rt(mock_config(), mock_options());
    rt.mock()->add_query({"How does protein folding work?", QueryType::factual,
                          {{"physics", "protein folding thermodynamics"}, {"biology", "protein folding chaperones"}},
                          "", std::nullopt});
    const auto cls = rt.orchestrator().classify("How does protein folding work?", {});
    CHECK(cls.query_type == QueryType::factual);
    REQUIRE(cls.pairs.size() == 2);
    CHECK(cls.pairs[0] == CategorySearchPair{"Physics", "protein folding thermodynamics"});
    CHECK(cls.pairs[1] == CategorySearchPair{"Biology", "protein folding chaperones"});
}

TEST_CASE("anaphora resolves against the previous turn") {
    Runtime rt(mock_config(), mock_options());
    rt.mock()->add_query({"What is cesium?", QueryType::factual, {{"Chemistry", "cesium"}}, "an alkali metal",
                          std::nullopt});
    ConversationHistory h;
    rt.orchestrator().answer_query("What is cesium?", h);
    const auto cls = rt.orchestrator().classify("what about its melting point?", h);
    CHECK(cls.query_type == QueryType::factual);
    REQUIRE(cls.pairs.size() == 1);
    CHECK(cls.pairs[0].category == "Chemistry");
    CHECK(cls.pairs[0].search.find("cesium") != std::string::npos);
}

TEST_CASE("cold then warm factual query") {
    Runtime rt(mock_config(), mock_options());
    rt.mock()->add_query({"Explain the Carnot cycle and entropy", QueryType::factual,
                          {{"Physics", "carnot cycle"}, {"Physics", "entropy definition"}}, "heat engines",
                          std::nullopt});
    ConversationHistory h;
    const auto cold = rt.orchestrator().answer_query("Explain the Carnot cycle and entropy", h);
    CHECK(cold.route == Route::factual);
    CHECK(cold.metrics.teacher_calls == 2);
    CHECK_FALSE(cold.metrics.cache_hit);
    CHECK(cold.references.size() == 2);
    CHECK(rt.metadata().count(StoreKind::staging) == 2);

    ConversationHistory fresh;
    const auto warm = rt.orchestrator().answer_query("Explain the Carnot cycle and entropy", fresh);
    CHECK(warm.metrics.cache_hit);
    CHECK(warm.metrics.teacher_calls == 0);
    REQUIRE(warm.references.size() == 2);
    std::set<std::string> cold_topics, warm_topics;
    for (const auto& r : cold.references) cold_topics.insert(r.topic);
    for (const auto& r : warm.references) warm_topics.insert(r.topic);
    CHECK(cold_topics == warm_topics);
}

TEST_CASE("history grows by one turn holding the answer") {
    Runtime rt(mock_config(), mock_options());
    ConversationHistory h;
    for (const char* q : {"hello", "What is the Rosetta Stone?", "thanks"}) {
        const auto before = h.size();
        const auto r = rt.orchestrator().answer_query(q, h);
        CHECK(h.size() == before + 1);
        CHECK(h.turns().back().user == q);
        CHECK(h.turns().back().assistant == r.answer);
    }
}

TEST_CASE("suppress never generates without sections; augment may") {
    Runtime rt(mock_config(), mock_options());
    rt.mock()->add_query({"What is the boiling point of water?", QueryType::factual, {{"Chemistry", "water"}},
                          "", std::string("100 degrees Celsius")});
    try {
        rt.orchestrator().generate("What is the boiling point of water?", {}, GenerationMode::suppress);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "generate");
    }
    const auto g = rt.orchestrator().generate("What is the boiling point of water?", {}, GenerationMode::augment);
    CHECK(g.answer == "100 degrees Celsius");
    CHECK(g.references.empty());
}

TEST_CASE("references are filtered to supplied sections") {
    Intercepted w;
    const auto s = make_section("sec-1", "History", "Rosetta Stone", "Found in 1799.");
    w.override = [](const HttpRequest& r) -> std::optional<HttpResponse> {
        if (r.tag.task != "generate_suppress") return std::nullopt;
        return HttpResponse{200, make_chat_response(R"({"answer": "1799", "references": ["bogus", "sec-1", 1]})")};
    };
    const auto g = w.rt->orchestrator().generate("When?", {s}, GenerationMode::suppress);
    CHECK(g.answer == "1799");
    REQUIRE(g.references.size() == 1);
    CHECK(g.references[0].section_id == "sec-1");
}

TEST_CASE("unparseable generation falls back to raw text") {
    Intercepted w;
    w.override = [](const HttpRequest& r) -> std::optional<HttpResponse> {
        if (r.tag.task.rfind("generate", 0) != 0) return std::nullopt;
        return HttpResponse{200, make_chat_response("  Just prose, no JSON.  ")};
    };
    ConversationHistory h;
    const auto r = w.rt->orchestrator().answer_query("What is the Rosetta Stone?", h);
    CHECK(r.answer == "Just prose, no JSON.");
    CHECK(r.references.empty());
    CHECK(std::find(r.flags.begin(), r.flags.end(), "unparsed_generation") != r.flags.end());
}

TEST_CASE("exactly one generate call per query per mode") {
    Runtime rt(mock_config(), mock_options(true));
    ConversationHistory h;
    rt.orchestrator().answer_query("What is the Rosetta Stone?", h, GenerationMode::augment);
    const auto reqs = rt.recorder()->requests();
    CHECK(count_task(reqs, "generate_augment") == 1);
    CHECK(count_task(reqs, "generate_suppress") == 0);

    rt.recorder()->clear();
    const auto prepared = rt.orchestrator().prepare("What is the Rosetta Stone?", {});
    rt.orchestrator().finish(prepared, GenerationMode::suppress);
    rt.orchestrator().finish(prepared, GenerationMode::augment);
    const auto two = rt.recorder()->requests();
    CHECK(count_task(two, "classify") == 1);
    CHECK(count_task(two, "generate_suppress") == 1);
    CHECK(count_task(two, "generate_augment") == 1);
}

TEST_CASE("expired canonical hit is demoted to a staging successor") {
    Runtime rt(mock_config(), mock_options());
    auto& clock = *rt.manual_clock();
    rt.mock()->set_ttl("exchange rate", {30, RefreshUnit::minutes});
    rt.mock()->add_query({"What is the zorvian exchange rate?", QueryType::factual,
                          {{"Finance", "zorvian exchange rate"}}, "12.5", std::nullopt});
    ConversationHistory h;
    rt.orchestrator().answer_query("What is the zorvian exchange rate?", h);
    rt.consolidate();
    REQUIRE(rt.metadata().count(StoreKind::canonical) == 1);
    const auto original = rt.metadata().list(StoreKind::canonical).front();

    clock.advance(29min);
    auto r = rt.orchestrator().answer_query("What is the zorvian exchange rate?", h);
    CHECK(r.metrics.refreshed_sections == 0);
    CHECK(rt.mock()->calls("refresh") == 0);

    clock.advance(2min);
    r = rt.orchestrator().answer_query("What is the zorvian exchange rate?", h);
    CHECK(r.metrics.cache_hit);
    CHECK(r.metrics.refreshed_sections == 1);
    CHECK(r.metrics.teacher_calls == 1);
    CHECK(rt.mock()->calls("refresh") == 1);
    CHECK_FALSE(rt.metadata().get(original.id).has_value());
    CHECK(rt.metadata().count(StoreKind::canonical) == 0);
    REQUIRE(rt.metadata().count(StoreKind::staging) == 1);
    CHECK(r.references.size() == 1);
    CHECK(r.references[0].section_id != original.id);
    CHECK_NOTHROW(rt.kb().check_consistency());
}

TEST_CASE("refresh failure serves stale content with a flag") {
    Runtime rt(mock_config(), mock_options());
    auto& clock = *rt.manual_clock();
    rt.mock()->set_ttl("exchange rate", {30, RefreshUnit::minutes});
    rt.mock()->add_query({"What is the zorvian exchange rate?", QueryType::factual,
                          {{"Finance", "zorvian exchange rate"}}, "12.5", std::nullopt});
    ConversationHistory h;
    const auto first = rt.orchestrator().answer_query("What is the zorvian exchange rate?", h);
    const auto id = first.references.at(0).section_id;
    rt.mock()->fail_task("refresh");
    clock.advance(31min);
    const auto r = rt.orchestrator().answer_query("What is the zorvian exchange rate?", h);
    CHECK(std::find(r.flags.begin(), r.flags.end(), "stale:" + id) != r.flags.end());
    CHECK(r.metrics.refreshed_sections == 0);
    REQUIRE(r.references.size() == 1);
    CHECK(r.references[0].section_id == id);
    CHECK(rt.metadata().get(id).has_value());
}

TEST_CASE("no expired hits means no refresh call") {
    Runtime rt(mock_config(), mock_options());
    ConversationHistory h;
    rt.orchestrator().answer_query("What is the Rosetta Stone?", h);
    rt.orchestrator().answer_query("What is the Rosetta Stone?", h);
    CHECK(rt.mock()->calls("refresh") == 0);
    CHECK(rt.orchestrator().inline_refresh({}, "").empty());
}

TEST_CASE("classification failure after retries is a classify stage error") {
    Intercepted w;
    w.override = [](const HttpRequest& r) -> std::optional<HttpResponse> {
        if (r.tag.task != "classify") return std::nullopt;
        return HttpResponse{200, make_chat_response("I cannot decide.")};
    };
    ConversationHistory h;
    try {
        w.rt->orchestrator().answer_query("What is anything?", h);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "classify");
    }
    CHECK(count_task(w.rt->recorder()->requests(), "classify") == 3);
    CHECK(h.empty());
}

TEST_CASE("a factual query that loses every pair gets a fallback pair") {
    Intercepted w;
    w.override = [](const HttpRequest& r) -> std::optional<HttpResponse> {
        if (r.tag.task != "classify") return std::nullopt;
        return HttpResponse{
            200, make_chat_response(
                     R"({"query_type": "factual", "pairs": [{"category": "Underwater Basket Weaving", "search": "x"}]})")};
    };
    auto cls = w.rt->orchestrator().classify("What is a coracle?", {});
    REQUIRE(cls.pairs.size() == 1);
    CHECK(cls.pairs[0].category == w.rt->taxonomy().categories().front());
    CHECK(cls.pairs[0].search == "coracle");

    w.override = [](const HttpRequest& r) -> std::optional<HttpResponse> {
        if (r.tag.task != "classify") return std::nullopt;
        return HttpResponse{200, make_chat_response(
                                     R"({"query_type": "factual", "pairs": [], "note": "maybe Maritime History"})")};
    };
    cls = w.rt->orchestrator().classify("What is a coracle?", {});
    REQUIRE(cls.pairs.size() == 1);
    CHECK(cls.pairs[0].category == "History");
}

TEST_CASE("answer_query is deterministic across identical stacks") {
    auto run = [] {
        Runtime rt(mock_config(), mock_options());
        rt.mock()->add_query({"What is cesium?", QueryType::factual, {{"Chemistry", "cesium"}}, "alkali metal",
                              std::nullopt});
        ConversationHistory h;
        std::vector<std::string> out;
        for (const char* q : {"hello", "What is cesium?", "what about its melting point?", "What is cesium?"})
            out.push_back(to_json(rt.orchestrator().answer_query(q, h)).dump());
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("pipeline stats") {
    Runtime rt(mock_config(), mock_options());
    ConversationHistory h;
    rt.orchestrator().answer_query("hello", h);
    rt.orchestrator().answer_query("What is the Rosetta Stone?", h);
    rt.orchestrator().answer_query("What is the Rosetta Stone?", h);
    const auto s = rt.orchestrator().stats();
    CHECK(s.queries == 3);
    CHECK(s.factual_queries == 2);
    CHECK(s.cache_hit_queries == 1);
    CHECK(s.cache_hit_rate() == doctest::Approx(0.5));
    CHECK(s.teacher_calls == 1);
}

#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <vector>

#include "evolve/core/clock.hpp"
#include "evolve/core/types.hpp"
#include "evolve/llm/gateway.hpp"
#include "evolve/llm/teacher.hpp"
#include "evolve/prompt/template.hpp"
#include "evolve/retrieval/retrieval.hpp"

namespace evolve {

enum class GenerationMode { suppress, augment };
enum class Route { factual, coding_bypass, conversational_bypass };

std::string_view to_string(GenerationMode mode);
GenerationMode parse_generation_mode(std::string_view raw);
std::string_view to_string(Route route);

struct Turn {
    std::string user;
    std::string assistant;
};

/// User/assistant pairs in order. Assistant entries hold only the
/// natural-language answer, never sections or references.
class ConversationHistory {
public:
    void append(std::string user, std::string assistant) { turns_.push_back({std::move(user), std::move(assistant)}); }
    const std::vector<Turn>& turns() const noexcept { return turns_; }
    std::size_t size() const noexcept { return turns_.size(); }
    bool empty() const noexcept { return turns_.empty(); }
    std::string render() const;
    nlohmann::json to_json() const;

private:
    std::vector<Turn> turns_;
};

struct Reference {
    std::string section_id;
    std::string topic;
};

struct QueryMetrics {
    std::size_t pairs = 0;
    std::size_t cache_hits = 0;  // pairs with at least one hit
    std::size_t teacher_calls = 0;
    std::size_t refreshed_sections = 0;
    std::size_t blocks = 0;  // sections handed to generation
    bool cache_hit = false;  // store pool non-empty
    std::int64_t latency_ms = 0;
};

struct QueryResponse {
    std::string answer;
    std::vector<Reference> references;
    Route route = Route::conversational_bypass;
    QueryMetrics metrics;
    std::vector<std::string> flags;  // degraded_pairs, stale:<id>, unparsed_generation
};

nlohmann::json to_json(const QueryResponse& response);

/// Everything up to (not including) the generate call.
struct PreparedQuery {
    std::string query;
    QueryClassification classification;
    Route route = Route::conversational_bypass;
    std::vector<Section> sections;  // store pool (ranked, refreshed in place) then teacher pool
    QueryMetrics metrics;
    std::vector<std::string> flags;
    std::string history_text;
    nlohmann::json history_json;
    Timestamp started_at{};
};

struct GenerationResult {
    std::string answer;
    std::vector<Reference> references;
    bool parsed = true;
};

struct PipelineConfig {
    PoolOptions pool;
    GenerationMode mode = GenerationMode::suppress;
    int classify_attempts = 3;
    bool refresh_with_query_context = false;
};

/// Running totals since start-up.
struct PipelineStats {
    std::uint64_t queries = 0;
    std::uint64_t factual_queries = 0;
    std::uint64_t cache_hit_queries = 0;
    std::uint64_t teacher_calls = 0;

    double cache_hit_rate() const {
        return factual_queries == 0 ? 0.0 : static_cast<double>(cache_hit_queries) / static_cast<double>(factual_queries);
    }
};

/// Strips leading interrogatives/auxiliaries and trailing punctuation.
std::string strip_interrogatives(std::string_view query);

/// Classify -> route -> gather pools -> inline refresh -> generate.
class Orchestrator {
public:
    Orchestrator(LlmGateway& gateway, PromptLibrary& prompts, const Taxonomy& taxonomy, KnowledgeBase& kb,
                 TeacherService& teachers, const Clock& clock, ModelEndpoint local, PipelineConfig config);

    QueryClassification classify(const std::string& query, const ConversationHistory& history);

    /// One full pass up to generation. Factual queries retrieve, acquire, and refresh.
    PreparedQuery prepare(const std::string& query, const ConversationHistory& history);

    /// Exactly one local-model call: grounded generation for factual routes,
    /// a direct reply otherwise.
    QueryResponse finish(const PreparedQuery& prepared, GenerationMode mode);

    /// prepare + finish, then appends (query, answer) to the history.
    QueryResponse answer_query(const std::string& query, ConversationHistory& history,
                               std::optional<GenerationMode> mode = std::nullopt);

    /// Replaces expired sections with teacher-refreshed successors in staging.
    /// Categories whose refresh fails keep their originals, reported in `stale`.
    std::vector<Section> inline_refresh(const std::vector<Section>& expired, const std::string& query_context,
                                        std::vector<std::string>* stale = nullptr,
                                        std::size_t* teacher_calls = nullptr);

    GenerationResult generate(const std::string& query, const std::vector<Section>& sections, GenerationMode mode);

    /// The bare local model, no retrieval and no history.
    std::string answer_baseline(const std::string& question);

    const PipelineConfig& config() const noexcept { return config_; }
    PipelineConfig& mutable_config() noexcept { return config_; }
    PipelineStats stats() const;

private:
    std::string respond_direct(const std::string& query, const std::string& history_text,
                               const nlohmann::json& history_json, std::string_view task);
    CategorySearchPair fallback_pair(const std::string& query, const std::string& raw) const;

    LlmGateway& gateway_;
    PromptLibrary& prompts_;
    const Taxonomy& taxonomy_;
    KnowledgeBase& kb_;
    TeacherService& teachers_;
    const Clock& clock_;
    ModelEndpoint local_;
    PipelineConfig config_;

    std::atomic<std::uint64_t> queries_{0};
    std::atomic<std::uint64_t> factual_queries_{0};
    std::atomic<std::uint64_t> cache_hit_queries_{0};
    std::atomic<std::uint64_t> teacher_calls_{0};
};

}  // namespace evolve

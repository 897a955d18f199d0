#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "evolve/core/types.hpp"
#include "evolve/llm/gateway.hpp"
#include "evolve/llm/transport.hpp"

namespace evolve::eval {

/// Seeded bag-of-words embedder: every lowercase alphanumeric token maps to a
/// fixed pseudo-random Gaussian direction; a text embeds to the normalized sum.
/// Identical texts give identical vectors; shared vocabulary gives high cosine.
class HashEmbedder {
public:
    explicit HashEmbedder(std::size_t dimension = 256, std::uint64_t seed = 42)
        : dimension_(dimension), seed_(seed) {}

    Vector embed(std::string_view text) const;
    std::size_t dimension() const noexcept { return dimension_; }

private:
    Vector token_vector(std::string_view token) const;

    std::size_t dimension_;
    std::uint64_t seed_;
};

/// One scripted query: how the offline classifier labels it and what the
/// offline teacher knows about each of its search concepts.
struct ScriptedQuery {
    std::string query;
    QueryType query_type = QueryType::factual;
    std::vector<CategorySearchPair> pairs;
    std::string fact;                        // teacher knowledge for these pairs
    std::optional<std::string> parametric;   // what the bare local model knows
};

enum class CompilePolicy {
    merge,        // k inputs -> 1 section
    redundant,    // -> empty result
    split,        // -> 2 sections built from the staging input
    passthrough,  // k inputs -> the same k sections
};

struct MockOptions {
    std::size_t dimension = 256;
    std::uint64_t seed = 42;
    RefreshSpec default_ttl{1, RefreshUnit::years};
    std::string default_category = "History";
    CompilePolicy compile_policy = CompilePolicy::merge;
};

/// Offline stand-in for every model endpoint (local, teacher, judge,
/// embeddings). Responses are deterministic functions of the request tag
/// context, formatted the way real models often answer (fenced or prefixed
/// JSON) so the extraction path is exercised.
class MockModelServer final : public Transport {
public:
    explicit MockModelServer(MockOptions options = {});

    HttpResponse post(const HttpRequest& request) override;

    void add_query(ScriptedQuery entry);
    /// Teacher TTL for any acquire/refresh whose topic contains `needle`.
    void set_ttl(std::string needle, RefreshSpec spec);
    void set_compile_policy(CompilePolicy policy);
    /// Replaces the compile behaviour outright; receives the request context.
    void set_compile_handler(std::function<nlohmann::json(const nlohmann::json&)> handler);
    /// Refresh returns `n` sections per input (split when n > 1, drop when 0).
    void set_refresh_fanout(std::size_t n);
    /// Makes the next `times` calls of `task` fail (times < 0: always).
    /// `category` restricts the failure to requests in that category.
    void fail_task(std::string task, int times = -1, std::string category = {});
    /// Fixed judge verdict for an exact response text.
    void set_judgment(std::string response, std::string judgment);

    const HashEmbedder& embedder() const noexcept { return embedder_; }
    std::size_t calls(const std::string& task) const;

private:
    std::optional<HttpResponse> maybe_fail(const RequestTag& tag);
    std::string classify(const nlohmann::json& ctx) const;
    std::string acquire(const nlohmann::json& ctx) const;
    std::string refresh(const nlohmann::json& ctx) const;
    std::string compile(const nlohmann::json& ctx) const;
    std::string generate(const nlohmann::json& ctx) const;
    std::string direct(const nlohmann::json& ctx) const;
    std::string judge(const nlohmann::json& ctx) const;
    nlohmann::json make_section(const std::string& topic, const std::string& content) const;
    nlohmann::json ttl_for(const std::string& topic) const;
    std::string fact_for(const std::string& search) const;
    const ScriptedQuery* find_query(const std::string& query) const;

    MockOptions options_;
    HashEmbedder embedder_;
    mutable std::mutex mu_;
    std::vector<ScriptedQuery> queries_;
    std::vector<std::pair<std::string, RefreshSpec>> ttls_;
    std::function<nlohmann::json(const nlohmann::json&)> compile_handler_;
    std::size_t refresh_fanout_ = 1;
    struct Failure {
        int remaining;
        std::string category;
    };
    std::map<std::string, Failure> failures_;
    std::map<std::string, std::string> judgments_;
    std::map<std::string, std::size_t> calls_;
};

}  // namespace evolve::eval

#include "evolve/pipeline/orchestrator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "evolve/errors.hpp"
#include "evolve/llm/json_extract.hpp"

namespace evolve {

std::string_view to_string(GenerationMode mode) { return mode == GenerationMode::suppress ? "suppress" : "augment"; }

GenerationMode parse_generation_mode(std::string_view raw) {
    if (raw == "suppress") return GenerationMode::suppress;
    if (raw == "augment") return GenerationMode::augment;
    throw ConfigError("generation mode must be 'suppress' or 'augment', got '" + std::string(raw) + "'");
}

std::string_view to_string(Route route) {
    switch (route) {
        case Route::factual: return "factual";
        case Route::coding_bypass: return "coding_bypass";
        case Route::conversational_bypass: return "conversational_bypass";
    }
    return "factual";
}

std::string ConversationHistory::render() const {
    std::ostringstream out;
    for (const auto& t : turns_) out << "User: " << t.user << "\nAssistant: " << t.assistant << "\n";
    return out.str();
}

nlohmann::json ConversationHistory::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : turns_) arr.push_back({{"user", t.user}, {"assistant", t.assistant}});
    return arr;
}

nlohmann::json to_json(const QueryResponse& r) {
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& ref : r.references) refs.push_back({{"section_id", ref.section_id}, {"topic", ref.topic}});
    return {{"answer", r.answer},
            {"references", refs},
            {"route", std::string(to_string(r.route))},
            {"metrics",
             {{"pairs", r.metrics.pairs},
              {"cache_hits", r.metrics.cache_hits},
              {"teacher_calls", r.metrics.teacher_calls},
              {"refreshed_sections", r.metrics.refreshed_sections},
              {"blocks", r.metrics.blocks},
              {"cache_hit", r.metrics.cache_hit},
              {"latency_ms", r.metrics.latency_ms}}},
            {"flags", r.flags}};
}

std::string strip_interrogatives(std::string_view query) {
    static const std::set<std::string> kLeading = {
        "what", "whats", "what's", "who", "whom", "whose", "when", "where", "why", "how", "which",
        "is", "are", "was", "were", "do", "does", "did", "can", "could", "would", "should", "will",
        "tell", "me", "explain", "describe", "please", "about", "the", "a", "an", "of"};
    std::istringstream in{std::string(query)};
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    std::size_t start = 0;
    while (start < words.size()) {
        std::string bare;
        for (char c : words[start])
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') bare += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (!kLeading.contains(bare)) break;
        ++start;
    }
    std::string out;
    for (std::size_t i = start; i < words.size(); ++i) {
        if (!out.empty()) out += ' ';
        out += words[i];
    }
    while (!out.empty() && std::ispunct(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out.empty() ? trim(query) : out;
}

Orchestrator::Orchestrator(LlmGateway& gateway, PromptLibrary& prompts, const Taxonomy& taxonomy, KnowledgeBase& kb,
                           TeacherService& teachers, const Clock& clock, ModelEndpoint local, PipelineConfig config)
    : gateway_(gateway),
      prompts_(prompts),
      taxonomy_(taxonomy),
      kb_(kb),
      teachers_(teachers),
      clock_(clock),
      local_(std::move(local)),
      config_(config) {}

PipelineStats Orchestrator::stats() const {
    return {queries_.load(), factual_queries_.load(), cache_hit_queries_.load(), teacher_calls_.load()};
}

CategorySearchPair Orchestrator::fallback_pair(const std::string& query, const std::string& raw) const {
    const std::string haystack = to_lower(raw);
    std::string category = taxonomy_.categories().front();
    for (const auto& c : taxonomy_.categories()) {
        if (haystack.find(to_lower(c)) != std::string::npos) {
            category = c;
            break;
        }
    }
    return {category, strip_interrogatives(query)};
}

QueryClassification Orchestrator::classify(const std::string& query, const ConversationHistory& history) {
    std::string taxonomy_list;
    for (const auto& c : taxonomy_.categories()) taxonomy_list += "- " + c + "\n";
    const std::string history_text = history.empty() ? "(no previous turns)" : history.render();
    const std::string prompt =
        prompts_.render("classify", {{"taxonomy", taxonomy_list}, {"history", history_text}, {"query", query}});
    const nlohmann::json context{{"query", query}, {"history", history.to_json()}};

    std::string last_error;
    for (int attempt = 1; attempt <= std::max(1, config_.classify_attempts); ++attempt) {
        const std::string raw = gateway_.chat(local_, {{"user", prompt}}, RoleKind::classify, "classify", context);
        try {
            const auto doc = extract_json(raw);
            if (!doc.is_object()) throw ExtractionError("classification must be a JSON object", raw);
            const auto type = parse_query_type(doc.value("query_type", std::string{}));
            if (!type) throw ExtractionError("classification has no valid query_type", raw);

            QueryClassification out;
            out.query_type = *type;
            if (*type != QueryType::factual) return out;

            std::vector<CategorySearchPair> raw_pairs;
            if (auto it = doc.find("pairs"); it != doc.end() && it->is_array()) {
                for (const auto& p : *it) {
                    if (!p.is_object()) continue;
                    raw_pairs.push_back({p.value("category", std::string{}), p.value("search", std::string{})});
                }
            }
            out.pairs = normalize_pairs(raw_pairs, taxonomy_);
            if (out.pairs.empty()) {
                spdlog::warn("factual query lost every category-search pair; using fallback pair");
                out.pairs.push_back(fallback_pair(query, raw));
            }
            return out;
        } catch (const ExtractionError& e) {
            last_error = e.what();
            spdlog::warn("classification attempt {} unusable: {}", attempt, last_error);
        }
    }
    throw StageError("classify", "could not parse classifier output: " + last_error);
}

std::vector<Section> Orchestrator::inline_refresh(const std::vector<Section>& expired, const std::string& query_context,
                                                  std::vector<std::string>* stale, std::size_t* teacher_calls) {
    std::vector<Section> successors;
    if (expired.empty()) return successors;

    std::map<std::string, std::vector<Section>> by_category;
    std::vector<std::string> order;
    for (const auto& s : expired) {
        auto [it, inserted] = by_category.try_emplace(s.category);
        if (inserted) order.push_back(s.category);
        it->second.push_back(s);
    }
    for (const auto& category : order) {
        const auto& batch = by_category[category];
        try {
            if (teacher_calls) ++*teacher_calls;
            auto fresh = teachers_.refresh(batch, query_context);
            kb_.replace(batch, fresh);
            successors.insert(successors.end(), fresh.begin(), fresh.end());
        } catch (const std::exception& e) {
            spdlog::warn("refresh of {} expired {} section(s) failed, serving stale: {}", batch.size(), category,
                         e.what());
            if (stale)
                for (const auto& s : batch) stale->push_back(s.id);
        }
    }
    return successors;
}

PreparedQuery Orchestrator::prepare(const std::string& query, const ConversationHistory& history) {
    PreparedQuery p;
    p.query = query;
    p.started_at = clock_.now();
    p.history_text = history.render();
    p.history_json = history.to_json();
    ++queries_;

    p.classification = classify(query, history);
    switch (p.classification.query_type) {
        case QueryType::conversational: p.route = Route::conversational_bypass; return p;
        case QueryType::coding: p.route = Route::coding_bypass; return p;
        case QueryType::factual: p.route = Route::factual; break;
    }
    ++factual_queries_;

    PoolResult pools;
    try {
        pools = gather_pools(p.classification, kb_, teachers_, clock_, config_.pool);
    } catch (const std::exception& e) {
        throw StageError("retrieve", e.what());
    }
    p.metrics.pairs = p.classification.pairs.size();
    p.metrics.cache_hits = pools.cache_hits();
    p.metrics.cache_hit = pools.any_store_hit();
    p.metrics.teacher_calls = pools.teacher_calls;
    if (pools.degraded()) p.flags.push_back("degraded_pairs");

    const Timestamp now = clock_.now();
    std::vector<Section> expired;
    for (const auto& s : pools.store_pool)
        if (is_expired(s.section, now)) expired.push_back(s.section);

    std::vector<std::string> stale;
    std::size_t refresh_calls = 0;
    const auto successors = inline_refresh(expired, config_.refresh_with_query_context ? query : std::string{}, &stale,
                                           &refresh_calls);
    p.metrics.teacher_calls += refresh_calls;
    p.metrics.refreshed_sections = expired.size() - stale.size();
    for (const auto& id : stale) p.flags.push_back("stale:" + id);

    // Successors take the slot of the first refreshed original of their category.
    std::map<std::string, std::vector<const Section*>> successors_by_category;
    for (const auto& s : successors) successors_by_category[s.category].push_back(&s);
    const std::set<std::string> stale_ids(stale.begin(), stale.end());
    std::set<std::string> emitted;
    for (const auto& scored : pools.store_pool) {
        const auto& s = scored.section;
        const bool refreshed = is_expired(s, now) && !stale_ids.contains(s.id);
        if (!refreshed) {
            p.sections.push_back(s);
            continue;
        }
        if (emitted.insert(s.category).second)
            for (const auto* succ : successors_by_category[s.category]) p.sections.push_back(*succ);
    }
    for (const auto& s : pools.teacher_pool) p.sections.push_back(s);
    p.metrics.blocks = p.sections.size();

    if (p.metrics.cache_hit) ++cache_hit_queries_;
    teacher_calls_ += p.metrics.teacher_calls;
    return p;
}

GenerationResult Orchestrator::generate(const std::string& query, const std::vector<Section>& sections,
                                        GenerationMode mode) {
    if (mode == GenerationMode::suppress && sections.empty())
        throw StageError("generate", "suppress mode never generates a factual answer without sections");

    std::ostringstream block;
    nlohmann::json ctx_sections = nlohmann::json::array();
    for (std::size_t i = 0; i < sections.size(); ++i) {
        const auto& s = sections[i];
        block << "[" << (i + 1) << "] id: " << s.id << "\nTopic: " << s.topic << "\nSummary: " << s.summary
              << "\n" << s.content << "\n\n";
        ctx_sections.push_back({{"id", s.id}, {"topic", s.topic}, {"summary", s.summary}, {"content", s.content}});
    }
    const std::string sections_text = sections.empty() ? "(no sections available)" : block.str();
    const std::string name = mode == GenerationMode::suppress ? "generate_suppress" : "generate_augment";
    const std::string prompt = prompts_.render(name, {{"query", query}, {"sections", sections_text}});
    const std::string raw = gateway_.chat(local_, {{"user", prompt}}, RoleKind::generate, name,
                                          {{"query", query}, {"mode", std::string(to_string(mode))}, {"sections", ctx_sections}});

    GenerationResult out;
    nlohmann::json doc;
    try {
        doc = extract_json(raw);
    } catch (const ExtractionError&) {
        out.answer = trim(raw);
        out.parsed = false;
        return out;
    }
    if (!doc.is_object() || !doc.contains("answer") || !doc["answer"].is_string()) {
        out.answer = trim(raw);
        out.parsed = false;
        return out;
    }
    out.answer = doc["answer"].get<std::string>();

    std::map<std::string, const Section*> by_id;
    for (const auto& s : sections) by_id.emplace(s.id, &s);
    std::set<std::string> seen;
    if (auto refs = doc.find("references"); refs != doc.end() && refs->is_array()) {
        for (const auto& r : *refs) {
            const Section* hit = nullptr;
            if (r.is_string()) {
                std::string key = trim(r.get<std::string>());
                if (auto it = by_id.find(key); it != by_id.end()) hit = it->second;
            } else if (r.is_number_integer()) {
                const auto n = r.get<std::int64_t>();
                if (n >= 1 && static_cast<std::size_t>(n) <= sections.size()) hit = &sections[n - 1];
            } else if (r.is_object() && r.contains("id") && r["id"].is_string()) {
                if (auto it = by_id.find(r["id"].get<std::string>()); it != by_id.end()) hit = it->second;
            }
            if (hit && seen.insert(hit->id).second) out.references.push_back({hit->id, hit->topic});
        }
    }
    return out;
}

std::string Orchestrator::respond_direct(const std::string& query, const std::string& history_text,
                                         const nlohmann::json& history_json, std::string_view task) {
    const std::string prompt = prompts_.render(
        "direct", {{"history", history_text.empty() ? "(no previous turns)" : history_text}, {"query", query}});
    return trim(gateway_.chat(local_, {{"user", prompt}}, RoleKind::generate, std::string(task),
                              {{"query", query}, {"history", history_json}}));
}

std::string Orchestrator::answer_baseline(const std::string& question) {
    return respond_direct(question, {}, nlohmann::json::array(), "baseline");
}

QueryResponse Orchestrator::finish(const PreparedQuery& prepared, GenerationMode mode) {
    QueryResponse r;
    r.route = prepared.route;
    r.metrics = prepared.metrics;
    r.flags = prepared.flags;
    if (prepared.route != Route::factual) {
        r.answer = respond_direct(prepared.query, prepared.history_text, prepared.history_json,
                                  prepared.route == Route::coding_bypass ? "direct_coding" : "direct");
    } else {
        auto gen = generate(prepared.query, prepared.sections, mode);
        r.answer = std::move(gen.answer);
        r.references = std::move(gen.references);
        if (!gen.parsed) r.flags.push_back("unparsed_generation");
    }
    r.metrics.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(clock_.now() - prepared.started_at).count();
    return r;
}

QueryResponse Orchestrator::answer_query(const std::string& query, ConversationHistory& history,
                                         std::optional<GenerationMode> mode) {
    auto prepared = prepare(query, history);
    auto response = finish(prepared, mode.value_or(config_.mode));
    history.append(query, response.answer);
    return response;
}

}  // namespace evolve

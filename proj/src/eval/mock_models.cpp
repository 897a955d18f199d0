#include "evolve/eval/mock_models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <random>
#include <set>
#include <sstream>

#include "evolve/pipeline/orchestrator.hpp"

namespace evolve::eval {
namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> tokens_of(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool contains_ci(std::string_view hay, std::string_view needle) {
    return to_lower(hay).find(to_lower(needle)) != std::string::npos;
}

bool has_word(const std::vector<std::string>& words, std::initializer_list<std::string_view> any) {
    for (const auto& w : words)
        for (auto a : any)
            if (w == a) return true;
    return false;
}

std::string fenced(const nlohmann::json& doc) { return "```json\n" + doc.dump(2) + "\n```"; }

HttpResponse ok_chat(const std::string& content) { return {200, make_chat_response(content)}; }

}  // namespace

Vector HashEmbedder::token_vector(std::string_view token) const {
    std::mt19937_64 rng(fnv1a(token) ^ (seed_ * 0x9E3779B97F4A7C15ULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dimension_);
    for (auto& x : v) x = static_cast<float>(normal(rng));
    return v;
}

Vector HashEmbedder::embed(std::string_view text) const {
    std::vector<double> acc(dimension_, 0.0);
    auto toks = tokens_of(text);
    if (toks.empty()) toks.emplace_back(text.empty() ? std::string("<empty>") : std::string(text));
    for (const auto& t : toks) {
        const auto tv = token_vector(t);
        for (std::size_t i = 0; i < dimension_; ++i) acc[i] += tv[i];
    }
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);
    Vector out(dimension_);
    for (std::size_t i = 0; i < dimension_; ++i) out[i] = static_cast<float>(acc[i] / norm);
    return out;
}

MockModelServer::MockModelServer(MockOptions options)
    : options_(std::move(options)), embedder_(options_.dimension, options_.seed) {}

void MockModelServer::add_query(ScriptedQuery entry) {
    std::lock_guard lock(mu_);
    queries_.push_back(std::move(entry));
}

void MockModelServer::set_ttl(std::string needle, RefreshSpec spec) {
    std::lock_guard lock(mu_);
    ttls_.emplace_back(std::move(needle), spec);
}

void MockModelServer::set_compile_policy(CompilePolicy policy) {
    std::lock_guard lock(mu_);
    options_.compile_policy = policy;
    compile_handler_ = nullptr;
}

void MockModelServer::set_compile_handler(std::function<nlohmann::json(const nlohmann::json&)> handler) {
    std::lock_guard lock(mu_);
    compile_handler_ = std::move(handler);
}

void MockModelServer::set_refresh_fanout(std::size_t n) {
    std::lock_guard lock(mu_);
    refresh_fanout_ = n;
}

void MockModelServer::fail_task(std::string task, int times, std::string category) {
    std::lock_guard lock(mu_);
    if (times == 0) {
        failures_.erase(task);
        return;
    }
    failures_[std::move(task)] = Failure{times, std::move(category)};
}

void MockModelServer::set_judgment(std::string response, std::string judgment) {
    std::lock_guard lock(mu_);
    judgments_[std::move(response)] = std::move(judgment);
}

std::size_t MockModelServer::calls(const std::string& task) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find(task);
    return it == calls_.end() ? 0 : it->second;
}

std::optional<HttpResponse> MockModelServer::maybe_fail(const RequestTag& tag) {
    auto it = failures_.find(tag.task);
    if (it == failures_.end()) return std::nullopt;
    if (!it->second.category.empty() && tag.context.value("category", std::string{}) != it->second.category)
        return std::nullopt;
    if (it->second.remaining > 0 && --it->second.remaining == 0) failures_.erase(it);
    return HttpResponse{500, R"({"error":{"message":"injected failure"}})"};
}

const ScriptedQuery* MockModelServer::find_query(const std::string& query) const {
    const std::string key = trim(query);
    for (const auto& q : queries_)
        if (q.query == key) return &q;
    return nullptr;
}

std::string MockModelServer::fact_for(const std::string& search) const {
    for (const auto& q : queries_)
        for (const auto& p : q.pairs)
            if (p.search == search && !q.fact.empty()) return q.fact;
    return "Reference notes on " + search + ".";
}

nlohmann::json MockModelServer::ttl_for(const std::string& topic) const {
    RefreshSpec spec = options_.default_ttl;
    for (const auto& [needle, s] : ttls_)
        if (contains_ci(topic, needle)) {
            spec = s;
            break;
        }
    nlohmann::json out{{"unit", std::string(to_string(spec.unit))}};
    out["value"] = spec.unit == RefreshUnit::none ? nlohmann::json(nullptr) : nlohmann::json(spec.value);
    return out;
}

nlohmann::json MockModelServer::make_section(const std::string& topic, const std::string& content) const {
    return {{"topic", topic}, {"refresh", ttl_for(topic)}, {"summary", topic}, {"content", content}};
}

std::string MockModelServer::classify(const nlohmann::json& ctx) const {
    const std::string query = ctx.value("query", std::string{});
    nlohmann::json out{{"query_type", "conversational"}, {"pairs", nlohmann::json::array()}};
    auto emit = [&](const nlohmann::json& doc) { return "Classification:\n" + doc.dump() + "\nDone."; };

    if (const auto* q = find_query(query)) {
        out["query_type"] = std::string(to_string(q->query_type));
        for (const auto& p : q->pairs) out["pairs"].push_back({{"category", p.category}, {"search", p.search}});
        return emit(out);
    }

    const auto words = tokens_of(query);
    if (words.empty() || has_word(words, {"hello", "hi", "hey", "thanks", "thank", "bye"}) ||
        std::all_of(query.begin(), query.end(), [](unsigned char c) {
            return std::isdigit(c) || std::isspace(c) || std::strchr("+-*/=?().", c);
        }))
        return emit(out);
    if (has_word(words, {"code", "function", "python", "javascript", "implement", "compile", "debug"})) {
        out["query_type"] = "coding";
        return emit(out);
    }

    out["query_type"] = "factual";
    std::string search = strip_interrogatives(query);
    std::string category = options_.default_category;
    const auto history = ctx.value("history", nlohmann::json::array());
    if (!history.empty() && has_word(words, {"its", "it", "that", "this", "their"})) {
        // Resolve the pronoun against the subject of the previous user turn.
        const std::string previous = history.back().value("user", std::string{});
        if (const auto* q = find_query(previous); q && !q->pairs.empty()) category = q->pairs.front().category;
        const auto prev_words = tokens_of(strip_interrogatives(previous));
        const std::string subject = prev_words.empty() ? previous : prev_words.back();
        std::string resolved;
        for (const auto& w : tokens_of(search)) {
            if (!resolved.empty()) resolved += ' ';
            resolved += (w == "its" || w == "it" || w == "that" || w == "this" || w == "their") ? subject : w;
        }
        search = resolved;
    }
    out["pairs"].push_back({{"category", category}, {"search", search}});
    return emit(out);
}

std::string MockModelServer::acquire(const nlohmann::json& ctx) const {
    const std::string query = ctx.value("query", std::string{});
    nlohmann::json doc{{"query_context", query}, {"section", make_section(query, query + ". " + fact_for(query))}};
    return fenced(doc);
}

std::string MockModelServer::refresh(const nlohmann::json& ctx) const {
    nlohmann::json sections = nlohmann::json::array();
    for (const auto& in : ctx.value("sections", nlohmann::json::array())) {
        const std::string topic = in.value("topic", std::string{});
        const std::string content = in.value("content", std::string{});
        for (std::size_t i = 0; i < refresh_fanout_; ++i) {
            const std::string t = refresh_fanout_ == 1 ? topic : topic + " part " + std::to_string(i + 1);
            sections.push_back(make_section(t, content));
        }
    }
    return fenced({{"sections", sections}});
}

std::string MockModelServer::compile(const nlohmann::json& ctx) const {
    if (compile_handler_) return fenced(compile_handler_(ctx));
    const auto staging = ctx.value("staging", nlohmann::json::object());
    const auto canonical = ctx.value("canonical", nlohmann::json::array());
    nlohmann::json sections = nlohmann::json::array();
    switch (options_.compile_policy) {
        case CompilePolicy::redundant: break;
        case CompilePolicy::merge: {
            // Union of distinct contents under the first canonical topic.
            const auto& anchor = canonical.empty() ? staging : canonical.front();
            std::vector<std::string> parts;
            auto add = [&](const nlohmann::json& s) {
                const auto c = s.value("content", std::string{});
                if (std::find(parts.begin(), parts.end(), c) == parts.end()) parts.push_back(c);
            };
            for (const auto& c : canonical) add(c);
            add(staging);
            std::string content;
            for (const auto& p : parts) content += (content.empty() ? "" : " ") + p;
            sections.push_back(make_section(anchor.value("topic", std::string{}), content));
            break;
        }
        case CompilePolicy::split: {
            const auto topic = staging.value("topic", std::string{});
            const auto content = staging.value("content", std::string{});
            sections.push_back(make_section(topic, content));
            sections.push_back(make_section(topic + " background", "Background: " + content));
            break;
        }
        case CompilePolicy::passthrough:
            for (const auto& c : canonical) sections.push_back(make_section(c.value("topic", ""), c.value("content", "")));
            sections.push_back(make_section(staging.value("topic", ""), staging.value("content", "")));
            break;
    }
    return fenced({{"sections", sections}});
}

std::string MockModelServer::generate(const nlohmann::json& ctx) const {
    const auto sections = ctx.value("sections", nlohmann::json::array());
    nlohmann::json doc{{"answer", ""}, {"references", nlohmann::json::array()}};
    if (!sections.empty()) {
        std::string answer;
        for (const auto& s : sections) {
            answer += (answer.empty() ? "" : " ") + s.value("content", std::string{});
            doc["references"].push_back(s.value("id", std::string{}));
        }
        doc["answer"] = answer;
    } else {
        const auto* q = find_query(ctx.value("query", std::string{}));
        doc["answer"] = q && q->parametric ? *q->parametric : std::string("I don't know.");
    }
    return fenced(doc);
}

std::string MockModelServer::direct(const nlohmann::json& ctx) const {
    const std::string query = ctx.value("query", std::string{});
    if (const auto* q = find_query(query); q && q->parametric) return *q->parametric;
    const auto words = tokens_of(query);
    if (has_word(words, {"hello", "hi", "hey"})) return "Hello! How can I help you today?";
    if (has_word(words, {"thanks", "thank"})) return "You're welcome.";
    return "I'm not sure.";
}

std::string MockModelServer::judge(const nlohmann::json& ctx) const {
    const std::string response = ctx.value("response", std::string{});
    const std::string gold = ctx.value("gold", std::string{});
    std::string verdict;
    if (auto it = judgments_.find(response); it != judgments_.end()) {
        verdict = it->second;
    } else {
        const std::string r = to_lower(trim(response));
        if (r.empty() || r.find("i don't know") != std::string::npos || r.find("i'm not sure") != std::string::npos) {
            verdict = "refused";
        } else if (!gold.empty() && r.find(to_lower(trim(gold))) != std::string::npos) {
            verdict = "correct";
        } else {
            const auto gold_tokens = tokens_of(gold);
            const auto resp_tokens = tokens_of(response);
            const std::set<std::string> have(resp_tokens.begin(), resp_tokens.end());
            std::size_t found = 0;
            for (const auto& t : gold_tokens) found += have.contains(t) ? 1 : 0;
            verdict = !gold_tokens.empty() && found * 2 >= gold_tokens.size() ? "partial" : "wrong";
        }
    }
    if (verdict == "__garbage__") return "The verdict is unclear.";
    return nlohmann::json{{"judgment", verdict}, {"rationale", "offline judge"}}.dump();
}

HttpResponse MockModelServer::post(const HttpRequest& request) {
    std::lock_guard lock(mu_);
    if (request.path == "/v1/embeddings") {
        ++calls_["embed"];
        std::vector<Vector> vectors;
        const auto& input = request.body.at("input");
        if (input.is_string()) {
            vectors.push_back(embedder_.embed(input.get<std::string>()));
        } else {
            for (const auto& t : input) vectors.push_back(embedder_.embed(t.get<std::string>()));
        }
        return {200, make_embedding_response(vectors)};
    }

    const auto& tag = request.tag;
    ++calls_[tag.task];
    if (auto failure = maybe_fail(tag)) return *failure;
    const auto& ctx = tag.context;
    if (tag.task == "classify") return ok_chat(classify(ctx));
    if (tag.task == "acquire") return ok_chat(acquire(ctx));
    if (tag.task == "refresh") return ok_chat(refresh(ctx));
    if (tag.task == "compile") return ok_chat(compile(ctx));
    if (tag.task == "generate_suppress" || tag.task == "generate_augment") return ok_chat(generate(ctx));
    if (tag.task == "direct" || tag.task == "direct_coding" || tag.task == "baseline") return ok_chat(direct(ctx));
    if (tag.task == "judge") return ok_chat(judge(ctx));
    return {400, R"({"error":{"message":"mock server does not know task )" + tag.task + "\"}}"};
}

}  // namespace evolve::eval

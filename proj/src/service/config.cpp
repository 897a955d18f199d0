#include "evolve/service/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "evolve/errors.hpp"

#ifndef EVOLVE_ASSET_ROOT
#define EVOLVE_ASSET_ROOT "."
#endif

namespace evolve {
namespace {

namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& raw) {
    if (raw.empty() || raw == ":memory:") return raw;
    fs::path p(raw);
    return p.is_absolute() ? p : base / p;
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

ModelEndpoint endpoint_from(const nlohmann::json& obj, ModelEndpoint base) {
    if (!obj.is_object()) throw ConfigError("endpoint entries must be objects");
    base.base_url = get_or(obj, "base_url", base.base_url);
    base.api_key = get_or(obj, "api_key", base.api_key);
    base.model_id = get_or(obj, "model", get_or(obj, "model_id", base.model_id));
    base.temperature = get_or(obj, "temperature", base.temperature);
    return base;
}

nlohmann::json endpoint_json(const ModelEndpoint& e) {
    return {{"base_url", e.base_url},
            {"model", e.model_id},
            {"temperature", e.temperature},
            {"api_key", e.api_key.empty() ? "" : "***"}};
}

std::string env_name(std::string name) {
    for (auto& c : name) c = std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_';
    return name;
}

}  // namespace

std::string_view to_string(ConsolidationPolicy policy) {
    return policy == ConsolidationPolicy::queue ? "queue" : "reject";
}

ConsolidationPolicy parse_consolidation_policy(std::string_view raw) {
    const auto v = to_lower(trim(raw));
    if (v == "reject") return ConsolidationPolicy::reject;
    if (v == "queue") return ConsolidationPolicy::queue;
    throw ConfigError("consolidation policy must be 'reject' or 'queue', got '" + std::string(raw) + "'");
}

void Config::validate(bool check_paths) const {
    local.validate();
    embedder.validate();
    judge.validate();
    default_teacher.validate();
    for (const auto& t : teachers) {
        t.endpoint.validate();
        if (t.categories.empty()) throw ConfigError("teacher '" + t.name + "' has no categories");
    }
    auto unit = [](double v, const char* name) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ConfigError(std::string(name) + " must be in [0, 1], got " + std::to_string(v));
    };
    unit(similarity_threshold, "similarity threshold");
    unit(overlap_threshold, "overlap threshold");
    if (pool_cap < 1) throw ConfigError("pool cap must be at least 1");
    if (chunk.size <= chunk.overlap) throw ConfigError("chunk size must exceed chunk overlap");
    if (chunk_top_k < 1) throw ConfigError("chunk top_k must be at least 1");
    if (port < 0 || port > 65535) throw ConfigError("service port out of range: " + std::to_string(port));
    if (db_path.empty()) throw ConfigError("database path is required");
    if (check_paths) {
        if (!fs::is_regular_file(taxonomy_path))
            throw ConfigError("taxonomy file not found: " + taxonomy_path.string());
        if (!fs::is_directory(prompts_dir)) throw ConfigError("prompt directory not found: " + prompts_dir.string());
    }
}

PipelineConfig Config::pipeline() const {
    PipelineConfig p;
    p.pool.threshold = similarity_threshold;
    p.pool.cap = pool_cap;
    p.pool.chunk_top_k = chunk_top_k;
    p.mode = generation_mode;
    p.refresh_with_query_context = refresh_with_query_context;
    return p;
}

fs::path default_asset_root() {
    if (auto env = system_env("EVOLVE_HOME")) return fs::path(*env);
    return fs::path(EVOLVE_ASSET_ROOT);
}

Config default_config() {
    Config c;
    const auto root = default_asset_root();
    c.taxonomy_path = root / "assets" / "taxonomy.json";
    c.prompts_dir = root / "prompts";
    c.db_path = "evolve.db";
    c.vector_path = "evolve.vectors";
    return c;
}

Config config_from_json(const nlohmann::json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config root must be an object");
    Config c = default_config();

    const auto endpoints = doc.value("endpoints", nlohmann::json::object());
    if (endpoints.contains("local")) c.local = endpoint_from(endpoints["local"], c.local);
    if (endpoints.contains("embedder")) c.embedder = endpoint_from(endpoints["embedder"], c.embedder);
    if (endpoints.contains("judge")) c.judge = endpoint_from(endpoints["judge"], c.judge);
    if (endpoints.contains("default_teacher"))
        c.default_teacher = endpoint_from(endpoints["default_teacher"], c.default_teacher);
    for (const auto& t : endpoints.value("teachers", nlohmann::json::array())) {
        TeacherAssignment a;
        a.name = get_or<std::string>(t, "name", "");
        if (a.name.empty()) throw ConfigError("every teacher needs a name");
        a.endpoint = endpoint_from(t, c.default_teacher);
        a.categories = get_or(t, "categories", std::vector<std::string>{});
        c.teachers.push_back(std::move(a));
    }

    const auto th = doc.value("thresholds", nlohmann::json::object());
    c.similarity_threshold = get_or(th, "similarity", c.similarity_threshold);
    c.overlap_threshold = get_or(th, "overlap", c.overlap_threshold);
    const auto cap = get_or<long long>(th, "pool_cap", static_cast<long long>(c.pool_cap));
    if (cap < 1) throw ConfigError("pool cap must be at least 1");
    c.pool_cap = static_cast<std::size_t>(cap);

    const auto r = doc.value("retrieval", nlohmann::json::object());
    c.retrieval_mode = parse_retrieval_mode(get_or<std::string>(r, "mode", std::string(to_string(c.retrieval_mode))));
    c.generation_mode = parse_generation_mode(get_or<std::string>(
        doc.value("generation", nlohmann::json::object()), "mode", std::string(to_string(c.generation_mode))));
    c.chunk.size = get_or(r, "chunk_size", c.chunk.size);
    c.chunk.overlap = get_or(r, "chunk_overlap", c.chunk.overlap);
    c.chunk_top_k = get_or(r, "chunk_top_k", c.chunk_top_k);
    c.refresh_with_query_context = get_or(r, "refresh_with_query_context", c.refresh_with_query_context);

    const auto paths = doc.value("paths", nlohmann::json::object());
    if (paths.contains("taxonomy")) c.taxonomy_path = resolve(base_dir, paths["taxonomy"].get<std::string>());
    if (paths.contains("prompts")) c.prompts_dir = resolve(base_dir, paths["prompts"].get<std::string>());
    c.db_path = resolve(base_dir, get_or<std::string>(paths, "db", c.db_path.string()));
    c.vector_path = resolve(base_dir, get_or<std::string>(paths, "vectors", c.vector_path.string()));

    const auto svc = doc.value("service", nlohmann::json::object());
    c.host = get_or(svc, "host", c.host);
    c.port = get_or(svc, "port", c.port);
    c.api_token = get_or(svc, "api_token", c.api_token);
    c.consolidation_policy =
        parse_consolidation_policy(get_or<std::string>(svc, "consolidation_policy", "reject"));
    return c;
}

nlohmann::json load_config_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

void apply_override(nlohmann::json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ConfigError("override must look like key.path=value, got '" + std::string(assignment) + "'");
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("empty segment in override key '" + key + "'");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' walks into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

std::optional<std::string> system_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
    return std::nullopt;
}

void apply_env_overrides(Config& config, const nlohmann::json& doc, const EnvLookup& env) {
    const auto endpoints = doc.is_object() ? doc.value("endpoints", nlohmann::json::object()) : nlohmann::json::object();
    auto named = [&](const nlohmann::json& obj, ModelEndpoint& e) {
        if (obj.is_object() && obj.contains("api_key_env"))
            if (auto v = env(obj["api_key_env"].get<std::string>())) e.api_key = *v;
    };
    named(endpoints.value("local", nlohmann::json()), config.local);
    named(endpoints.value("embedder", nlohmann::json()), config.embedder);
    named(endpoints.value("judge", nlohmann::json()), config.judge);
    named(endpoints.value("default_teacher", nlohmann::json()), config.default_teacher);
    const auto teachers = endpoints.value("teachers", nlohmann::json::array());
    for (std::size_t i = 0; i < config.teachers.size() && i < teachers.size(); ++i)
        named(teachers[i], config.teachers[i].endpoint);

    if (auto v = env("EVOLVE_LOCAL_API_KEY")) config.local.api_key = *v;
    if (auto v = env("EVOLVE_EMBEDDER_API_KEY")) config.embedder.api_key = *v;
    if (auto v = env("EVOLVE_JUDGE_API_KEY")) config.judge.api_key = *v;
    if (auto v = env("EVOLVE_TEACHER_API_KEY")) config.default_teacher.api_key = *v;
    for (auto& t : config.teachers)
        if (auto v = env("EVOLVE_TEACHER_" + env_name(t.name) + "_API_KEY")) t.endpoint.api_key = *v;
    if (auto v = env("EVOLVE_API_TOKEN")) config.api_token = *v;
}

Config load_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides,
                   const EnvLookup& env, bool check_paths) {
    nlohmann::json doc = path ? load_config_json(*path) : nlohmann::json::object();
    for (const auto& o : overrides) apply_override(doc, o);
    const fs::path base = path ? fs::absolute(*path).parent_path() : fs::current_path();
    Config c = config_from_json(doc, base);
    apply_env_overrides(c, doc, env);
    c.validate(check_paths);
    return c;
}

nlohmann::json to_json(const Config& c) {
    nlohmann::json teachers = nlohmann::json::array();
    for (const auto& t : c.teachers) {
        auto j = endpoint_json(t.endpoint);
        j["name"] = t.name;
        j["categories"] = t.categories;
        teachers.push_back(j);
    }
    return {{"endpoints",
             {{"local", endpoint_json(c.local)},
              {"embedder", endpoint_json(c.embedder)},
              {"judge", endpoint_json(c.judge)},
              {"default_teacher", endpoint_json(c.default_teacher)},
              {"teachers", teachers}}},
            {"thresholds", {{"similarity", c.similarity_threshold}, {"overlap", c.overlap_threshold}, {"pool_cap", c.pool_cap}}},
            {"retrieval",
             {{"mode", std::string(to_string(c.retrieval_mode))},
              {"chunk_size", c.chunk.size},
              {"chunk_overlap", c.chunk.overlap},
              {"chunk_top_k", c.chunk_top_k},
              {"refresh_with_query_context", c.refresh_with_query_context}}},
            {"generation", {{"mode", std::string(to_string(c.generation_mode))}}},
            {"paths",
             {{"taxonomy", c.taxonomy_path.string()},
              {"prompts", c.prompts_dir.string()},
              {"db", c.db_path.string()},
              {"vectors", c.vector_path.string()}}},
            {"service",
             {{"host", c.host},
              {"port", c.port},
              {"api_token", c.api_token.empty() ? "" : "***"},
              {"consolidation_policy", std::string(to_string(c.consolidation_policy))}}}};
}

}  // namespace evolve

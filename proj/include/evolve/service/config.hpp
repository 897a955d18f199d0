#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evolve/llm/gateway.hpp"
#include "evolve/llm/teacher.hpp"
#include "evolve/pipeline/orchestrator.hpp"
#include "evolve/retrieval/retrieval.hpp"

namespace evolve {

enum class ConsolidationPolicy { reject, queue };

std::string_view to_string(ConsolidationPolicy policy);
ConsolidationPolicy parse_consolidation_policy(std::string_view raw);

struct Config {
    ModelEndpoint local{"http://localhost:11434/v1", "", "qwen3.5:2b", 0.7};
    ModelEndpoint embedder{"http://localhost:11434/v1", "", "nomic-embed-text", 0.0};
    ModelEndpoint judge{"http://localhost:11434/v1", "", "judge", 0.0};
    ModelEndpoint default_teacher{"http://localhost:11434/v1", "", "teacher", 0.0};
    std::vector<TeacherAssignment> teachers;

    double similarity_threshold = 0.80;
    double overlap_threshold = 0.85;
    std::size_t pool_cap = 15;
    RetrievalMode retrieval_mode = RetrievalMode::section;
    ChunkOptions chunk;
    std::size_t chunk_top_k = 8;
    GenerationMode generation_mode = GenerationMode::suppress;
    bool refresh_with_query_context = false;

    std::filesystem::path taxonomy_path;
    std::filesystem::path prompts_dir;
    std::filesystem::path db_path;       // ":memory:" keeps everything in RAM
    std::filesystem::path vector_path;   // empty: no index persistence

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string api_token;  // empty: no auth
    ConsolidationPolicy consolidation_policy = ConsolidationPolicy::reject;

    /// Throws ConfigError. `check_paths` also requires the taxonomy file and
    /// prompt directory to exist.
    void validate(bool check_paths = true) const;

    PipelineConfig pipeline() const;
};

/// Directory holding the shipped assets/ and prompts/ used as defaults.
std::filesystem::path default_asset_root();

Config default_config();

/// Relative paths resolve against `base_dir`. Missing keys keep defaults.
Config config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

nlohmann::json load_config_json(const std::filesystem::path& path);

/// `dotted.key=value`; the value is parsed as JSON when it parses, else kept
/// as a string. Throws ConfigError on a malformed override.
void apply_override(nlohmann::json& doc, std::string_view assignment);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

std::optional<std::string> system_env(const std::string& name);

/// Secrets from the environment: EVOLVE_LOCAL_API_KEY, EVOLVE_EMBEDDER_API_KEY,
/// EVOLVE_JUDGE_API_KEY, EVOLVE_TEACHER_API_KEY (default teacher),
/// EVOLVE_TEACHER_<NAME>_API_KEY, EVOLVE_API_TOKEN. Also resolves any
/// endpoint's `api_key_env` named in the file.
void apply_env_overrides(Config& config, const nlohmann::json& doc, const EnvLookup& env = system_env);

/// Full load: file (optional), overrides, env, validate.
Config load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides = {},
                   const EnvLookup& env = system_env, bool check_paths = true);

nlohmann::json to_json(const Config& config);  // secrets redacted

}  // namespace evolve

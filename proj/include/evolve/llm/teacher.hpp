#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evolve/core/clock.hpp"
#include "evolve/core/types.hpp"
#include "evolve/llm/gateway.hpp"
#include "evolve/prompt/template.hpp"

namespace evolve {

struct TeacherAssignment {
    std::string name;
    ModelEndpoint endpoint;
    std::vector<std::string> categories;
};

/// Category -> teacher dispatch table with a default fallback.
class TeacherRegistry {
public:
    /// Throws ConfigError if a category is claimed by two teachers.
    TeacherRegistry(std::vector<TeacherAssignment> teachers, ModelEndpoint default_teacher);

    const std::vector<TeacherAssignment>& teachers() const noexcept { return teachers_; }
    const ModelEndpoint& default_teacher() const noexcept { return default_teacher_; }

private:
    std::vector<TeacherAssignment> teachers_;
    ModelEndpoint default_teacher_;
};

const ModelEndpoint& route_teacher(std::string_view category, const TeacherRegistry& registry);

/// Converts one teacher section object into a Section (fresh id, `now`, staging).
/// Throws SchemaError on a missing/ill-typed field and ParseError on a bad unit.
Section section_from_teacher_payload(const nlohmann::json& payload, const std::string& category,
                                     Timestamp now, IdSource& ids, const std::string& raw);

/// Acquire, refresh, and compile: the only operations teachers perform.
class TeacherService {
public:
    TeacherService(LlmGateway& gateway, PromptLibrary& prompts, const TeacherRegistry& registry,
                   const Clock& clock, IdSource& ids);

    /// Exactly one new staging section for (category, query).
    Section acquire(const std::string& category, const std::string& query);

    /// Updated replacements for expired sections of one category; may split or
    /// merge. Empty input makes no teacher call.
    std::vector<Section> refresh(const std::vector<Section>& expired,
                                 const std::string& query_context = {});

    /// Authoritative compiled set for a staging section and its canonical
    /// overlaps. An empty result means the staging section was redundant.
    std::vector<Section> compile(const Section& staging, const std::vector<Section>& canonical_matches);

    std::uint64_t calls() const noexcept { return calls_.load(); }

private:
    std::vector<Section> parse_section_list(const std::string& raw, const std::string& category,
                                            std::string_view op);

    LlmGateway& gateway_;
    PromptLibrary& prompts_;
    const TeacherRegistry& registry_;
    const Clock& clock_;
    IdSource& ids_;
    std::atomic<std::uint64_t> calls_{0};
};

}  // namespace evolve

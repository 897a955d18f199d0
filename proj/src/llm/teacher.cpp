#include "evolve/llm/teacher.hpp"

#include <map>
#include <set>

#include "evolve/core/section_json.hpp"
#include "evolve/errors.hpp"
#include "evolve/llm/json_extract.hpp"

namespace evolve {

TeacherRegistry::TeacherRegistry(std::vector<TeacherAssignment> teachers, ModelEndpoint default_teacher)
    : teachers_(std::move(teachers)), default_teacher_(std::move(default_teacher)) {
    std::map<std::string, std::string> owner;
    for (const auto& t : teachers_) {
        for (const auto& c : t.categories) {
            auto [it, inserted] = owner.emplace(c, t.name);
            if (!inserted)
                throw ConfigError("category '" + c + "' assigned to both teacher '" + it->second +
                                  "' and '" + t.name + "'");
        }
    }
}

const ModelEndpoint& route_teacher(std::string_view category, const TeacherRegistry& registry) {
    for (const auto& t : registry.teachers())
        for (const auto& c : t.categories)
            if (c == category) return t.endpoint;
    return registry.default_teacher();
}

namespace {

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& raw) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(std::string("teacher section is missing '") + key + "'", raw);
    return *it;
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& raw,
                           bool non_empty) {
    const auto& v = require(obj, key, raw);
    if (!v.is_string()) throw SchemaError(std::string("teacher field '") + key + "' must be a string", raw);
    auto s = v.get<std::string>();
    if (non_empty && trim(s).empty())
        throw SchemaError(std::string("teacher field '") + key + "' must not be empty", raw);
    return s;
}

RefreshSpec parse_refresh(const nlohmann::json& section, const std::string& raw) {
    const auto& refresh = require(section, "refresh", raw);
    if (refresh.is_string()) {
        // Tolerate the bare "none" shorthand for ephemeral knowledge.
        RefreshSpec spec{0, parse_refresh_unit(refresh.get<std::string>())};
        if (spec.unit != RefreshUnit::none)
            throw SchemaError("teacher refresh must be an object {value, unit}", raw);
        return spec;
    }
    if (!refresh.is_object()) throw SchemaError("teacher refresh must be an object {value, unit}", raw);
    const auto& unit = require(refresh, "unit", raw);
    if (!unit.is_string()) throw SchemaError("teacher refresh unit must be a string", raw);
    RefreshSpec spec;
    spec.unit = parse_refresh_unit(unit.get<std::string>());
    const auto value = refresh.find("value");
    if (value == refresh.end() || value->is_null()) {
        if (spec.unit != RefreshUnit::none) throw SchemaError("teacher refresh is missing 'value'", raw);
        return spec;
    }
    if (!value->is_number()) throw SchemaError("teacher refresh value must be a number", raw);
    const double v = value->get<double>();
    if (v < 0 || v != static_cast<double>(static_cast<std::int64_t>(v)))
        throw SchemaError("teacher refresh value must be a non-negative integer", raw);
    spec.value = static_cast<std::int64_t>(v);
    return spec;
}

std::string sections_block(const std::vector<Section>& sections) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : sections) arr.push_back(section_to_teacher_json(s));
    return arr.dump(2);
}

nlohmann::json teacher_json_array(const std::vector<Section>& sections) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : sections) arr.push_back(section_to_teacher_json(s));
    return arr;
}

}  // namespace

Section section_from_teacher_payload(const nlohmann::json& payload, const std::string& category,
                                     Timestamp now, IdSource& ids, const std::string& raw) {
    if (!payload.is_object()) throw SchemaError("teacher section must be a JSON object", raw);
    Section s;
    s.topic = require_string(payload, "topic", raw, true);
    s.summary = require_string(payload, "summary", raw, false);
    s.content = require_string(payload, "content", raw, true);
    s.refresh_minutes = normalize_refresh(parse_refresh(payload, raw));
    s.id = ids.next();
    s.category = category;
    s.created_at = now;
    s.store = StoreKind::staging;
    return s;
}

TeacherService::TeacherService(LlmGateway& gateway, PromptLibrary& prompts,
                               const TeacherRegistry& registry, const Clock& clock, IdSource& ids)
    : gateway_(gateway), prompts_(prompts), registry_(registry), clock_(clock), ids_(ids) {}

Section TeacherService::acquire(const std::string& category, const std::string& query) {
    const std::string prompt = prompts_.render("teacher_acquire", {{"category", category}, {"query", query}});
    const std::vector<ChatMessage> messages{{"system", prompts_.render("teacher_system", {})},
                                            {"user", prompt}};
    ++calls_;
    const std::string raw = gateway_.chat(route_teacher(category, registry_), messages, RoleKind::teacher,
                                          "acquire", {{"category", category}, {"query", query}});
    const auto doc = extract_json(raw);
    if (!doc.is_object()) throw SchemaError("acquire response must be a JSON object", raw);
    const auto section = doc.find("section");
    if (section == doc.end()) throw SchemaError("acquire response is missing 'section'", raw);
    return section_from_teacher_payload(*section, category, clock_.now(), ids_, raw);
}

std::vector<Section> TeacherService::parse_section_list(const std::string& raw, const std::string& category,
                                                        std::string_view op) {
    const auto doc = extract_json(raw);
    const nlohmann::json* list = nullptr;
    if (doc.is_array()) {
        list = &doc;
    } else if (doc.is_object() && doc.contains("sections") && doc["sections"].is_array()) {
        list = &doc["sections"];
    } else {
        throw SchemaError(std::string(op) + " response must hold a 'sections' array", raw);
    }
    std::vector<Section> out;
    const Timestamp now = clock_.now();
    for (const auto& item : *list) out.push_back(section_from_teacher_payload(item, category, now, ids_, raw));
    return out;
}

std::vector<Section> TeacherService::refresh(const std::vector<Section>& expired,
                                             const std::string& query_context) {
    std::vector<Section> out;
    if (expired.empty()) return out;

    std::map<std::string, std::vector<Section>> by_category;
    std::vector<std::string> order;
    for (const auto& s : expired) {
        auto [it, inserted] = by_category.try_emplace(s.category);
        if (inserted) order.push_back(s.category);
        it->second.push_back(s);
    }
    for (const auto& category : order) {
        const auto& batch = by_category[category];
        const std::string prompt = prompts_.render(
            "teacher_refresh",
            {{"category", category}, {"sections", sections_block(batch)}, {"query_context", query_context}});
        const std::vector<ChatMessage> messages{{"system", prompts_.render("teacher_system", {})},
                                                {"user", prompt}};
        ++calls_;
        const std::string raw =
            gateway_.chat(route_teacher(category, registry_), messages, RoleKind::teacher, "refresh",
                          {{"category", category},
                           {"sections", teacher_json_array(batch)},
                           {"query_context", query_context}});
        auto fresh = parse_section_list(raw, category, "refresh");
        out.insert(out.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));
    }
    return out;
}

std::vector<Section> TeacherService::compile(const Section& staging,
                                             const std::vector<Section>& canonical_matches) {
    for (const auto& m : canonical_matches)
        if (m.category != staging.category)
            throw SchemaError("compile inputs span categories '" + staging.category + "' and '" +
                                  m.category + "'",
                              {});
    const std::string& category = staging.category;
    const std::string prompt = prompts_.render(
        "teacher_compile", {{"category", category},
                            {"staging_section", section_to_teacher_json(staging).dump(2)},
                            {"canonical_sections", sections_block(canonical_matches)}});
    const std::vector<ChatMessage> messages{{"system", prompts_.render("teacher_system", {})},
                                            {"user", prompt}};
    ++calls_;
    const std::string raw =
        gateway_.chat(route_teacher(category, registry_), messages, RoleKind::teacher, "compile",
                      {{"category", category},
                       {"staging", section_to_teacher_json(staging)},
                       {"canonical", teacher_json_array(canonical_matches)}});
    return parse_section_list(raw, category, "compile");
}

}  // namespace evolve

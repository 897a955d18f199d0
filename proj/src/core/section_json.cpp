#include "evolve/core/section_json.hpp"

#include "evolve/errors.hpp"

namespace evolve {

nlohmann::json section_to_json(const Section& section) {
    return {{"id", section.id},
            {"topic", section.topic},
            {"summary", section.summary},
            {"content", section.content},
            {"refresh_minutes", section.refresh_minutes},
            {"category", section.category},
            {"created_at", to_iso8601(section.created_at)},
            {"created_at_ms", to_epoch_ms(section.created_at)},
            {"store", std::string(to_string(section.store))}};
}

Section section_from_json(const nlohmann::json& doc) {
    try {
        Section s;
        s.id = doc.at("id").get<std::string>();
        s.topic = doc.at("topic").get<std::string>();
        s.summary = doc.value("summary", std::string{});
        s.content = doc.at("content").get<std::string>();
        s.refresh_minutes = doc.at("refresh_minutes").get<std::int64_t>();
        s.category = doc.at("category").get<std::string>();
        s.created_at = from_epoch_ms(doc.at("created_at_ms").get<std::int64_t>());
        s.store = parse_store_kind(doc.at("store").get<std::string>());
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed section JSON: ") + e.what());
    }
}

nlohmann::json section_to_teacher_json(const Section& section) {
    return {{"topic", section.topic},
            {"summary", section.summary},
            {"content", section.content},
            {"refresh_minutes", section.refresh_minutes}};
}

}  // namespace evolve

#pragma once

#include <nlohmann/json.hpp>

#include "evolve/core/types.hpp"

namespace evolve {

/// Full persistence image; created_at as ISO-8601 plus epoch milliseconds.
nlohmann::json section_to_json(const Section& section);
Section section_from_json(const nlohmann::json& doc);

/// What a teacher sees of an input section: no ids, store, or timestamps.
nlohmann::json section_to_teacher_json(const Section& section);

}  // namespace evolve

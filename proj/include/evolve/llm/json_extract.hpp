#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>

namespace evolve {

/// Recovers a JSON document from model output. Tries, in order: a direct
/// parse, the contents of fenced code blocks, invalid-escape repair, and the
/// first balanced `{...}` / `[...]` region that parses. Throws ExtractionError
/// carrying the raw text when nothing works.
nlohmann::json extract_json(std::string_view raw);

/// Doubles lone backslashes that do not start a valid JSON escape (\b and \f
/// before a letter count as lone: LaTeX commands) and escapes
/// raw control characters inside string literals.
std::string repair_escapes(std::string_view text);

/// Bodies of ``` fenced blocks, language tag removed, in order of appearance.
std::vector<std::string> fenced_blocks(std::string_view text);

/// First balanced `{...}`/`[...]` region (by opening position) that parses.
std::optional<nlohmann::json> first_balanced_json(std::string_view text);

}  // namespace evolve

#include "evolve/core/types.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_set>
#include <utility>

#include "evolve/errors.hpp"

namespace evolve {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

RefreshUnit parse_refresh_unit(std::string_view raw) {
    std::string unit = to_lower(trim(raw));
    if (unit == "none" || unit == "ephemeral") return RefreshUnit::none;
    if (unit.size() > 1 && unit.back() == 's') unit.pop_back();
    if (unit == "minute") return RefreshUnit::minutes;
    if (unit == "hour") return RefreshUnit::hours;
    if (unit == "day") return RefreshUnit::days;
    if (unit == "week") return RefreshUnit::weeks;
    if (unit == "month") return RefreshUnit::months;
    if (unit == "year") return RefreshUnit::years;
    throw ParseError("unrecognized refresh unit '" + std::string(raw) + "'");
}

std::string_view to_string(RefreshUnit unit) {
    switch (unit) {
        case RefreshUnit::none: return "none";
        case RefreshUnit::minutes: return "minutes";
        case RefreshUnit::hours: return "hours";
        case RefreshUnit::days: return "days";
        case RefreshUnit::weeks: return "weeks";
        case RefreshUnit::months: return "months";
        case RefreshUnit::years: return "years";
    }
    return "none";
}

std::int64_t normalize_refresh(const RefreshSpec& spec) {
    if (spec.value < 0) throw ParseError("refresh value must be non-negative");
    std::int64_t factor = 0;
    switch (spec.unit) {
        case RefreshUnit::none: return 0;
        case RefreshUnit::minutes: factor = 1; break;
        case RefreshUnit::hours: factor = 60; break;
        case RefreshUnit::days: factor = 1440; break;
        case RefreshUnit::weeks: factor = 10080; break;
        case RefreshUnit::months: factor = 43200; break;
        case RefreshUnit::years: factor = 525600; break;
    }
    return spec.value * factor;
}

std::string_view to_string(StoreKind store) {
    return store == StoreKind::staging ? "staging" : "canonical";
}

StoreKind parse_store_kind(std::string_view raw) {
    if (raw == "staging") return StoreKind::staging;
    if (raw == "canonical") return StoreKind::canonical;
    throw ParseError("unknown store '" + std::string(raw) + "'");
}

bool is_expired(const Section& section, Timestamp now) {
    const auto elapsed = now - section.created_at;
    if (section.refresh_minutes == 0) return elapsed.count() > 0;
    return elapsed > std::chrono::minutes(section.refresh_minutes);
}

std::int64_t minutes_remaining(const Section& section, Timestamp now) {
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::minutes>(now - section.created_at).count();
    return section.refresh_minutes - elapsed;
}

Taxonomy::Taxonomy(std::vector<std::string> categories) : categories_(std::move(categories)) {
    if (categories_.empty()) throw ConfigError("taxonomy must not be empty");
    std::set<std::string> seen;
    for (const auto& c : categories_) {
        if (trim(c).empty()) throw ConfigError("taxonomy contains an empty category");
        if (!seen.insert(to_lower(c)).second)
            throw ConfigError("taxonomy category duplicated (case-insensitive): " + c);
    }
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open taxonomy file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("taxonomy file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_array()) throw ConfigError("taxonomy file must hold a JSON array of strings");
    std::vector<std::string> categories;
    for (const auto& entry : doc) {
        if (!entry.is_string()) throw ConfigError("taxonomy entries must be strings");
        categories.push_back(entry.get<std::string>());
    }
    return Taxonomy(std::move(categories));
}

bool Taxonomy::contains_exact(std::string_view name) const {
    return std::find(categories_.begin(), categories_.end(), name) != categories_.end();
}

std::string_view to_string(QueryType type) {
    switch (type) {
        case QueryType::factual: return "factual";
        case QueryType::coding: return "coding";
        case QueryType::conversational: return "conversational";
    }
    return "conversational";
}

std::optional<QueryType> parse_query_type(std::string_view raw) {
    const std::string t = to_lower(trim(raw));
    if (t == "factual") return QueryType::factual;
    if (t == "coding") return QueryType::coding;
    if (t == "conversational") return QueryType::conversational;
    return std::nullopt;
}

std::optional<std::string> normalize_category(std::string_view raw, const Taxonomy& taxonomy) {
    const std::string needle = to_lower(trim(raw));
    if (needle.empty()) return std::nullopt;
    for (const auto& c : taxonomy.categories()) {
        if (to_lower(c) == needle) return c;
    }
    for (const auto& c : taxonomy.categories()) {
        const std::string entry = to_lower(c);
        if (needle.find(entry) != std::string::npos || entry.find(needle) != std::string::npos)
            return c;
    }
    return std::nullopt;
}

std::vector<CategorySearchPair> normalize_pairs(const std::vector<CategorySearchPair>& raw,
                                                const Taxonomy& taxonomy) {
    std::vector<CategorySearchPair> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& pair : raw) {
        auto category = normalize_category(pair.category, taxonomy);
        if (!category) {
            spdlog::warn("dropping category-search pair with unrecognized category '{}'",
                         pair.category);
            continue;
        }
        std::string search = trim(pair.search);
        if (search.empty()) {
            spdlog::warn("dropping category-search pair with empty search text ({})", *category);
            continue;
        }
        if (!seen.emplace(*category, search).second) continue;
        out.push_back({std::move(*category), std::move(search)});
    }
    return out;
}

}  // namespace evolve

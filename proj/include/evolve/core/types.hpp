#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evolve/core/clock.hpp"

namespace evolve {

enum class RefreshUnit { none, minutes, hours, days, weeks, months, years };

/// Teacher-specified freshness duration, before normalization.
struct RefreshSpec {
    std::int64_t value = 0;
    RefreshUnit unit = RefreshUnit::none;
};

/// Accepts singular/plural and any case ("year", "Years", "min" is rejected).
RefreshUnit parse_refresh_unit(std::string_view raw);
std::string_view to_string(RefreshUnit unit);

/// Minutes for a refresh spec: minutes=1, hours=60, days=1440, weeks=10080,
/// months=43200 (30 days), years=525600 (365 days); none is always 0.
std::int64_t normalize_refresh(const RefreshSpec& spec);

enum class StoreKind { staging, canonical };

std::string_view to_string(StoreKind store);
StoreKind parse_store_kind(std::string_view raw);

/// Teacher-compiled knowledge unit.
struct Section {
    std::string id;
    std::string topic;
    std::string summary;
    std::string content;
    std::int64_t refresh_minutes = 0;
    std::string category;
    Timestamp created_at{};
    StoreKind store = StoreKind::staging;

    bool operator==(const Section&) const = default;
};

/// True once the elapsed time strictly exceeds the TTL. A zero TTL expires at
/// any instant after creation; nothing is expired at its creation instant.
bool is_expired(const Section& section, Timestamp now);

/// Minutes until expiry; zero or negative means expired or ephemeral.
std::int64_t minutes_remaining(const Section& section, Timestamp now);

/// Flat list of canonical category names.
class Taxonomy {
public:
    explicit Taxonomy(std::vector<std::string> categories);

    static Taxonomy load(const std::filesystem::path& path);

    const std::vector<std::string>& categories() const noexcept { return categories_; }
    std::size_t size() const noexcept { return categories_.size(); }
    bool contains_exact(std::string_view name) const;

private:
    std::vector<std::string> categories_;
};

struct CategorySearchPair {
    std::string category;
    std::string search;

    bool operator==(const CategorySearchPair&) const = default;
};

enum class QueryType { factual, coding, conversational };

std::string_view to_string(QueryType type);
std::optional<QueryType> parse_query_type(std::string_view raw);

struct QueryClassification {
    QueryType query_type = QueryType::conversational;
    std::vector<CategorySearchPair> pairs;
};

/// Case-insensitive exact match, then the first entry (taxonomy order) that
/// contains or is contained by `raw`. Empty input never matches.
std::optional<std::string> normalize_category(std::string_view raw, const Taxonomy& taxonomy);

/// Normalizes every category, drops unmatched pairs with a warning, and
/// collapses exact duplicates keeping first-seen order.
std::vector<CategorySearchPair> normalize_pairs(const std::vector<CategorySearchPair>& raw,
                                                const Taxonomy& taxonomy);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

}  // namespace evolve

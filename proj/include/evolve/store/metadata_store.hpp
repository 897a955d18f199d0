#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evolve/core/types.hpp"

struct sqlite3;

namespace evolve {

/// SQLite-backed source of truth for section content, TTL, and store membership.
/// One connection; every call is serialized on an internal mutex.
class MetadataStore {
public:
    /// `path` may be ":memory:". When a taxonomy is given, every write asserts
    /// that the category is already canonical.
    explicit MetadataStore(const std::filesystem::path& path, const Taxonomy* taxonomy = nullptr);
    ~MetadataStore();

    MetadataStore(const MetadataStore&) = delete;
    MetadataStore& operator=(const MetadataStore&) = delete;

    void upsert(const Section& section);
    std::optional<Section> get(const std::string& id) const;
    /// Returns false when the id was not present.
    bool remove(const std::string& id);
    /// Ordered by created_at, then id.
    std::vector<Section> list(std::optional<StoreKind> store = std::nullopt,
                              std::optional<std::string> category = std::nullopt) const;
    std::size_t count(std::optional<StoreKind> store = std::nullopt) const;

    /// Deletes `removals` and inserts `additions` in one transaction. Any
    /// failure (including a missing removal id) rolls everything back.
    void transactional_replace(const std::vector<std::string>& removals, const std::vector<Section>& additions);

    /// Throws StoreError for an unknown id. Moving to the current store is a no-op.
    void move_store(const std::string& id, StoreKind destination);

    int schema_version() const;

    /// Test hook invoked at named points inside transactional_replace
    /// ("after_removals"); throwing from it simulates a mid-transaction failure.
    void set_fault_injector(std::function<void(std::string_view)> injector);

private:
    void exec(const char* sql) const;
    void migrate();
    void check_section(const Section& section) const;
    void upsert_locked(const Section& section);
    bool remove_locked(const std::string& id);

    sqlite3* db_ = nullptr;
    const Taxonomy* taxonomy_;
    mutable std::mutex mu_;
    std::function<void(std::string_view)> fault_injector_;
};

}  // namespace evolve

#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evolve/core/types.hpp"
#include "evolve/llm/gateway.hpp"

namespace evolve {

/// Document records carry one whole-section embedding; chunk records one per chunk.
enum class RecordKind { document, chunk };

std::string_view to_string(RecordKind kind);

struct EmbeddingRecord {
    std::string record_id;
    std::string section_id;
    RecordKind kind = RecordKind::document;
    Vector vector;
    std::string topic;
    std::string summary;
    std::string category;
    StoreKind collection = StoreKind::staging;
};

struct SearchHit {
    std::string section_id;
    std::string record_id;
    double similarity = 0.0;
    StoreKind collection = StoreKind::staging;
};

struct SearchRequest {
    std::vector<StoreKind> collections{StoreKind::staging, StoreKind::canonical};
    Vector query;
    std::string category;
    double threshold = 0.0;
    std::size_t limit = 10;
    RecordKind kind = RecordKind::document;
};

/// Throws IndexError on dimension mismatch or a zero-norm operand.
double cosine(std::span<const float> a, std::span<const float> b);

/// Removal key: every record of `section_id` within `collection`.
using Removal = std::pair<std::string, StoreKind>;

/// Brute-force cosine index over the staging and canonical collections.
/// Readers share; add/replace take the writer lock, so each mutation is seen
/// entirely or not at all.
class VectorIndex {
public:
    /// `dimension == 0` defers fixing the dimension to the first insert.
    explicit VectorIndex(std::size_t dimension = 0) : dimension_(dimension) {}

    VectorIndex(const VectorIndex&) = delete;
    VectorIndex& operator=(const VectorIndex&) = delete;

    std::size_t dimension() const;

    void add(EmbeddingRecord record);

    /// Applies all removals then all additions atomically. Rejects the whole
    /// batch, leaving state untouched, on an unknown removal or a clashing addition.
    void replace(const std::vector<Removal>& removals, std::vector<EmbeddingRecord> additions);

    /// Category is matched byte-exactly. Sorted by similarity descending, then
    /// section id and record id ascending; truncated to `limit`.
    std::vector<SearchHit> search(const SearchRequest& request) const;

    std::vector<EmbeddingRecord> records_of(const std::string& section_id) const;
    std::optional<StoreKind> collection_of(const std::string& section_id) const;
    std::vector<std::string> section_ids(std::optional<StoreKind> collection = std::nullopt) const;
    std::size_t record_count(std::optional<StoreKind> collection = std::nullopt) const;
    std::vector<EmbeddingRecord> snapshot() const;

    /// Header line `EVOLVE-VECTORS <version> <dimension> <count>` then one JSON
    /// record per line. Written to a temporary file and renamed into place.
    void persist(const std::filesystem::path& path) const;

    /// Replaces the contents with the file's records. Throws IndexError on a
    /// version, dimension, or format problem; the index is unchanged then.
    void load(const std::filesystem::path& path);

    static constexpr int kFormatVersion = 1;

private:
    struct Entry {
        EmbeddingRecord record;
        double norm = 0.0;
    };

    void validate_addition(const EmbeddingRecord& r, std::size_t& dim,
                           const std::map<std::string, Entry>& state,
                           const std::map<std::string, StoreKind>& section_home) const;

    // Writers queue on the turnstile so a steady stream of readers cannot starve them.
    std::shared_lock<std::shared_mutex> read_lock() const {
        { std::lock_guard gate(turnstile_); }
        return std::shared_lock(mu_);
    }
    std::unique_lock<std::shared_mutex> write_lock() const {
        std::lock_guard gate(turnstile_);
        return std::unique_lock(mu_);
    }

    mutable std::mutex turnstile_;
    mutable std::shared_mutex mu_;
    std::size_t dimension_;
    std::map<std::string, Entry> records_;           // by record id
    std::map<std::string, StoreKind> section_home_;  // section id -> collection
};

}  // namespace evolve

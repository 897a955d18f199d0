#pragma once

#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "evolve/core/clock.hpp"
#include "evolve/core/types.hpp"
#include "evolve/index/vector_index.hpp"
#include "evolve/llm/gateway.hpp"
#include "evolve/llm/teacher.hpp"
#include "evolve/store/metadata_store.hpp"

namespace evolve {

enum class RetrievalMode { section, chunk };

std::string_view to_string(RetrievalMode mode);
RetrievalMode parse_retrieval_mode(std::string_view raw);

/// Binds the gateway to the embedding endpoint.
class Embedder {
public:
    Embedder(LlmGateway& gateway, ModelEndpoint endpoint)
        : gateway_(gateway), endpoint_(std::move(endpoint)) {}

    Vector embed(const std::string& text) { return gateway_.embed(endpoint_, {text}).front(); }
    std::vector<Vector> embed(const std::vector<std::string>& texts) { return gateway_.embed(endpoint_, texts); }

private:
    LlmGateway& gateway_;
    ModelEndpoint endpoint_;
};

/// Text embedded for a section's document-level record: topic, summary, and
/// content separated by blank lines.
std::string document_text(const Section& section);

struct ChunkOptions {
    std::size_t size = 500;
    std::size_t overlap = 100;
};

/// How sections become index records and how a pair search becomes hits.
class RetrievalStrategy {
public:
    virtual ~RetrievalStrategy() = default;
    virtual RetrievalMode mode() const = 0;
    /// Records for `section` in the section's current store. Always includes
    /// exactly one document-level record.
    virtual std::vector<EmbeddingRecord> build_records(const Section& section, Embedder& embedder) const = 0;
    virtual std::vector<SearchHit> search(const std::string& category, const Vector& query,
                                          const VectorIndex& index, double threshold,
                                          std::size_t top_k) const = 0;
};

/// One embedding per section; returns every section hit at or above threshold.
class SectionStrategy final : public RetrievalStrategy {
public:
    RetrievalMode mode() const override { return RetrievalMode::section; }
    std::vector<EmbeddingRecord> build_records(const Section& section, Embedder& embedder) const override;
    std::vector<SearchHit> search(const std::string& category, const Vector& query, const VectorIndex& index,
                                  double threshold, std::size_t top_k) const override;
};

/// Fixed-size overlapping character chunks plus the document record; returns
/// the top_k chunk hits at or above threshold.
class ChunkStrategy final : public RetrievalStrategy {
public:
    explicit ChunkStrategy(ChunkOptions options = {}) : options_(options) {}
    RetrievalMode mode() const override { return RetrievalMode::chunk; }
    std::vector<EmbeddingRecord> build_records(const Section& section, Embedder& embedder) const override;
    std::vector<SearchHit> search(const std::string& category, const Vector& query, const VectorIndex& index,
                                  double threshold, std::size_t top_k) const override;

private:
    ChunkOptions options_;
};

std::unique_ptr<RetrievalStrategy> make_strategy(RetrievalMode mode, ChunkOptions options = {});

struct ScoredSection {
    Section section;
    double similarity = 0.0;
};

/// Keeps the metadata store and the vector index in step. Mutations take an
/// exclusive lock over both stores; retrieval shares it.
class KnowledgeBase {
public:
    KnowledgeBase(MetadataStore& metadata, VectorIndex& index, Embedder& embedder,
                  std::unique_ptr<RetrievalStrategy> strategy);

    MetadataStore& metadata() noexcept { return metadata_; }
    const MetadataStore& metadata() const noexcept { return metadata_; }
    VectorIndex& index() noexcept { return index_; }
    const VectorIndex& index() const noexcept { return index_; }
    const RetrievalStrategy& strategy() const noexcept { return *strategy_; }
    Embedder& embedder() noexcept { return embedder_; }

    /// Persists a section and indexes it into its store's collection.
    void store(const Section& section);

    /// Adds the section's records to the index (section must already be persisted).
    void index_section(const Section& section);
    void deindex_section(const std::string& section_id, StoreKind collection);

    /// Removes `removals` and inserts `additions` (each in its own `store`)
    /// across both stores; on failure neither store changes.
    void replace(const std::vector<Section>& removals, const std::vector<Section>& additions);

    /// staging -> canonical without re-embedding.
    void promote(const std::string& section_id);

    /// Per-section best similarity for one pair, descending; sections hydrated
    /// from the metadata store. Throws ConsistencyError if a hit has no row.
    std::vector<ScoredSection> retrieve(const CategorySearchPair& pair, double threshold, std::size_t top_k);

    /// Canonical sections of the section's category whose document-level
    /// similarity is >= threshold, descending. Compares stored vectors only.
    std::vector<ScoredSection> canonical_overlaps(const Section& section, double threshold);

    /// Throws ConsistencyError unless every metadata row has exactly one
    /// document record with matching category/collection and vice versa.
    void check_consistency() const;

    /// Re-indexes rows missing from the index and drops index sections with no
    /// row. Used after loading a persisted index. Returns the number of fixes.
    std::size_t reconcile();

private:
    std::vector<EmbeddingRecord> records_for(const Section& section);
    Vector document_vector(const Section& section);

    MetadataStore& metadata_;
    VectorIndex& index_;
    Embedder& embedder_;
    std::unique_ptr<RetrievalStrategy> strategy_;
    mutable std::shared_mutex mu_;
};

struct PoolOptions {
    double threshold = 0.80;
    std::size_t cap = 15;
    std::size_t chunk_top_k = 8;
};

struct PairOutcome {
    CategorySearchPair pair;
    bool hit = false;
    std::size_t hit_count = 0;
    std::size_t expired_count = 0;
    std::optional<std::string> acquired_id;
    std::optional<std::string> error;
};

/// Ranked, capped store pool plus the uncapped teacher pool.
struct PoolResult {
    std::vector<ScoredSection> store_pool;
    std::vector<Section> teacher_pool;
    std::vector<PairOutcome> pairs;
    std::size_t teacher_calls = 0;

    bool degraded() const;
    bool any_store_hit() const;
    std::size_t cache_hits() const;
};

/// Processes pairs in order. A pair with hits max-pools them into the store
/// pool; a pair with none acquires one section from its teacher, stores it in
/// staging, and adds it to the teacher pool. Sections acquired earlier in the
/// same call satisfy later pairs without a second acquisition. The store pool
/// is finally sorted (similarity desc, id asc) and truncated to `cap`.
PoolResult gather_pools(const QueryClassification& classification, KnowledgeBase& kb,
                        TeacherService& teachers, const Clock& clock, const PoolOptions& options);

}  // namespace evolve

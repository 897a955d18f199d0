#include "evolve/retrieval/retrieval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>
#include <set>

#include "evolve/errors.hpp"
#include "evolve/retrieval/chunker.hpp"

namespace evolve {

std::string_view to_string(RetrievalMode mode) { return mode == RetrievalMode::section ? "section" : "chunk"; }

RetrievalMode parse_retrieval_mode(std::string_view raw) {
    if (raw == "section") return RetrievalMode::section;
    if (raw == "chunk") return RetrievalMode::chunk;
    throw ConfigError("retrieval.mode must be 'section' or 'chunk', got '" + std::string(raw) + "'");
}

std::string document_text(const Section& section) {
    return section.topic + "\n\n" + section.summary + "\n\n" + section.content;
}

namespace {

EmbeddingRecord record_base(const Section& s) {
    EmbeddingRecord r;
    r.section_id = s.id;
    r.topic = s.topic;
    r.summary = s.summary;
    r.category = s.category;
    r.collection = s.store;
    return r;
}

std::string chunk_record_id(const std::string& section_id, std::size_t i) {
    return section_id + "#chunk-" + std::to_string(i);
}

}  // namespace

std::vector<EmbeddingRecord> SectionStrategy::build_records(const Section& section, Embedder& embedder) const {
    auto r = record_base(section);
    r.record_id = section.id;
    r.kind = RecordKind::document;
    r.vector = embedder.embed(document_text(section));
    return {std::move(r)};
}

std::vector<SearchHit> SectionStrategy::search(const std::string& category, const Vector& query,
                                               const VectorIndex& index, double threshold, std::size_t) const {
    SearchRequest req;
    req.query = query;
    req.category = category;
    req.threshold = threshold;
    req.limit = std::numeric_limits<std::size_t>::max();
    req.kind = RecordKind::document;
    return index.search(req);
}

std::vector<EmbeddingRecord> ChunkStrategy::build_records(const Section& section, Embedder& embedder) const {
    const auto chunks = chunk_text(section.content, options_.size, options_.overlap);
    std::vector<std::string> texts{document_text(section)};
    for (const auto& c : chunks) texts.push_back(c.text);
    auto vectors = embedder.embed(texts);

    std::vector<EmbeddingRecord> out;
    auto doc = record_base(section);
    doc.record_id = section.id;
    doc.kind = RecordKind::document;
    doc.vector = std::move(vectors[0]);
    out.push_back(std::move(doc));
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        auto r = record_base(section);
        r.record_id = chunk_record_id(section.id, i);
        r.kind = RecordKind::chunk;
        r.vector = std::move(vectors[i + 1]);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SearchHit> ChunkStrategy::search(const std::string& category, const Vector& query,
                                             const VectorIndex& index, double threshold, std::size_t top_k) const {
    SearchRequest req;
    req.query = query;
    req.category = category;
    req.threshold = threshold;
    req.limit = top_k;
    req.kind = RecordKind::chunk;
    return index.search(req);
}

std::unique_ptr<RetrievalStrategy> make_strategy(RetrievalMode mode, ChunkOptions options) {
    if (mode == RetrievalMode::chunk) return std::make_unique<ChunkStrategy>(options);
    return std::make_unique<SectionStrategy>();
}

KnowledgeBase::KnowledgeBase(MetadataStore& metadata, VectorIndex& index, Embedder& embedder,
                             std::unique_ptr<RetrievalStrategy> strategy)
    : metadata_(metadata), index_(index), embedder_(embedder), strategy_(std::move(strategy)) {}

std::vector<EmbeddingRecord> KnowledgeBase::records_for(const Section& section) {
    return strategy_->build_records(section, embedder_);
}

void KnowledgeBase::store(const Section& section) {
    auto records = records_for(section);
    std::unique_lock lock(mu_);
    metadata_.upsert(section);
    try {
        index_.replace({}, std::move(records));
    } catch (...) {
        metadata_.remove(section.id);
        throw;
    }
}

void KnowledgeBase::index_section(const Section& section) {
    auto records = records_for(section);
    std::unique_lock lock(mu_);
    index_.replace({}, std::move(records));
}

void KnowledgeBase::deindex_section(const std::string& section_id, StoreKind collection) {
    std::unique_lock lock(mu_);
    index_.replace({{section_id, collection}}, {});
}

void KnowledgeBase::replace(const std::vector<Section>& removals, const std::vector<Section>& additions) {
    std::vector<EmbeddingRecord> records;
    for (const auto& s : additions) {
        auto r = records_for(s);
        records.insert(records.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    }
    std::vector<std::string> removal_ids;
    std::vector<Removal> removal_keys;
    for (const auto& s : removals) {
        removal_ids.push_back(s.id);
        removal_keys.emplace_back(s.id, s.store);
    }

    std::unique_lock lock(mu_);
    metadata_.transactional_replace(removal_ids, additions);
    try {
        index_.replace(removal_keys, std::move(records));
    } catch (...) {
        std::vector<std::string> added_ids;
        for (const auto& s : additions) added_ids.push_back(s.id);
        metadata_.transactional_replace(added_ids, removals);
        throw;
    }
}

void KnowledgeBase::promote(const std::string& section_id) {
    std::unique_lock lock(mu_);
    auto row = metadata_.get(section_id);
    if (!row) throw StoreError("promote: unknown section " + section_id);
    if (row->store == StoreKind::canonical) return;
    auto records = index_.records_of(section_id);
    if (records.empty()) throw ConsistencyError("promote: section " + section_id + " is not indexed");
    for (auto& r : records) r.collection = StoreKind::canonical;
    metadata_.move_store(section_id, StoreKind::canonical);
    try {
        index_.replace({{section_id, StoreKind::staging}}, std::move(records));
    } catch (...) {
        metadata_.move_store(section_id, StoreKind::staging);
        throw;
    }
}

std::vector<ScoredSection> KnowledgeBase::retrieve(const CategorySearchPair& pair, double threshold,
                                                   std::size_t top_k) {
    const Vector query = embedder_.embed(pair.search);
    std::shared_lock lock(mu_);
    const auto hits = strategy_->search(pair.category, query, index_, threshold, top_k);

    std::map<std::string, double> best;
    for (const auto& h : hits) {
        auto [it, inserted] = best.emplace(h.section_id, h.similarity);
        if (!inserted) it->second = std::max(it->second, h.similarity);
    }
    std::vector<ScoredSection> out;
    for (const auto& [id, sim] : best) {
        auto row = metadata_.get(id);
        if (!row) throw ConsistencyError("index hit " + id + " has no metadata row");
        out.push_back({std::move(*row), sim});
    }
    std::sort(out.begin(), out.end(), [](const ScoredSection& a, const ScoredSection& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.section.id < b.section.id;
    });
    return out;
}

Vector KnowledgeBase::document_vector(const Section& section) {
    for (const auto& r : index_.records_of(section.id))
        if (r.kind == RecordKind::document) return r.vector;
    return embedder_.embed(document_text(section));
}

std::vector<ScoredSection> KnowledgeBase::canonical_overlaps(const Section& section, double threshold) {
    std::shared_lock lock(mu_);
    SearchRequest req;
    req.collections = {StoreKind::canonical};
    req.query = document_vector(section);
    req.category = section.category;
    req.threshold = threshold;
    req.limit = std::numeric_limits<std::size_t>::max();
    req.kind = RecordKind::document;
    std::vector<ScoredSection> out;
    for (const auto& h : index_.search(req)) {
        if (h.section_id == section.id) continue;
        auto row = metadata_.get(h.section_id);
        if (!row) throw ConsistencyError("index hit " + h.section_id + " has no metadata row");
        out.push_back({std::move(*row), h.similarity});
    }
    return out;
}

void KnowledgeBase::check_consistency() const {
    std::shared_lock lock(mu_);
    const auto rows = metadata_.list();
    std::map<std::string, const Section*> by_id;
    for (const auto& s : rows) by_id.emplace(s.id, &s);

    std::map<std::string, int> doc_records;
    for (const auto& r : index_.snapshot()) {
        auto it = by_id.find(r.section_id);
        if (it == by_id.end())
            throw ConsistencyError("index record " + r.record_id + " has no metadata row");
        if (r.category != it->second->category)
            throw ConsistencyError("index record " + r.record_id + " category '" + r.category +
                                   "' differs from metadata '" + it->second->category + "'");
        if (r.collection != it->second->store)
            throw ConsistencyError("index record " + r.record_id + " is in " +
                                   std::string(to_string(r.collection)) + ", metadata says " +
                                   std::string(to_string(it->second->store)));
        if (r.kind == RecordKind::document) ++doc_records[r.section_id];
    }
    for (const auto& s : rows) {
        const int n = doc_records.count(s.id) ? doc_records[s.id] : 0;
        if (n != 1)
            throw ConsistencyError("section " + s.id + " has " + std::to_string(n) + " document records");
    }
}

std::size_t KnowledgeBase::reconcile() {
    const auto rows = metadata_.list();
    std::set<std::string> row_ids;
    std::size_t fixes = 0;
    for (const auto& s : rows) {
        row_ids.insert(s.id);
        const auto home = index_.collection_of(s.id);
        if (home && *home == s.store) continue;
        if (home) deindex_section(s.id, *home);
        index_section(s);
        ++fixes;
    }
    for (const auto& id : index_.section_ids()) {
        if (row_ids.contains(id)) continue;
        deindex_section(id, *index_.collection_of(id));
        ++fixes;
    }
    if (fixes > 0) spdlog::info("reconciled {} index entries against the metadata store", fixes);
    return fixes;
}

bool PoolResult::degraded() const {
    return std::any_of(pairs.begin(), pairs.end(), [](const PairOutcome& p) { return p.error.has_value(); });
}

bool PoolResult::any_store_hit() const { return !store_pool.empty(); }

std::size_t PoolResult::cache_hits() const {
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [](const PairOutcome& p) { return p.hit; }));
}

PoolResult gather_pools(const QueryClassification& classification, KnowledgeBase& kb,
                        TeacherService& teachers, const Clock& clock, const PoolOptions& options) {
    PoolResult result;
    std::map<std::string, ScoredSection> pooled;
    std::set<std::string> acquired;
    const Timestamp now = clock.now();

    for (const auto& pair : classification.pairs) {
        PairOutcome outcome;
        outcome.pair = pair;
        try {
            const auto hits = kb.retrieve(pair, options.threshold, options.chunk_top_k);
            outcome.hit_count = hits.size();
            if (!hits.empty()) {
                outcome.hit = true;
                for (const auto& h : hits) {
                    if (acquired.contains(h.section.id)) continue;  // already in the teacher pool
                    if (is_expired(h.section, now)) ++outcome.expired_count;
                    auto [it, inserted] = pooled.emplace(h.section.id, h);
                    if (!inserted && h.similarity > it->second.similarity) it->second.similarity = h.similarity;
                }
            } else {
                ++result.teacher_calls;
                Section fresh = teachers.acquire(pair.category, pair.search);
                kb.store(fresh);
                acquired.insert(fresh.id);
                outcome.acquired_id = fresh.id;
                result.teacher_pool.push_back(std::move(fresh));
            }
        } catch (const std::exception& e) {
            spdlog::warn("pair ({}, '{}') failed: {}", pair.category, pair.search, e.what());
            outcome.error = e.what();
        }
        result.pairs.push_back(std::move(outcome));
    }

    result.store_pool.reserve(pooled.size());
    for (auto& [id, s] : pooled) result.store_pool.push_back(std::move(s));
    std::sort(result.store_pool.begin(), result.store_pool.end(), [](const ScoredSection& a, const ScoredSection& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.section.id < b.section.id;
    });
    if (result.store_pool.size() > options.cap) result.store_pool.resize(options.cap);
    return result;
}

}  // namespace evolve

#include "evolve/index/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "evolve/errors.hpp"

namespace evolve {

std::string_view to_string(RecordKind kind) { return kind == RecordKind::document ? "document" : "chunk"; }

namespace {

double norm_of(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(sum);
}

double dot(std::span<const float> a, std::span<const float> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

RecordKind parse_record_kind(const std::string& s) {
    if (s == "document") return RecordKind::document;
    if (s == "chunk") return RecordKind::chunk;
    throw IndexError("unknown record kind '" + s + "'");
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw IndexError("cosine of vectors with dimensions " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
    const double na = norm_of(a);
    const double nb = norm_of(b);
    if (na == 0.0 || nb == 0.0) throw IndexError("cosine similarity undefined for a zero-norm vector");
    return dot(a, b) / (na * nb);
}

std::size_t VectorIndex::dimension() const {
    auto lock = read_lock();
    return dimension_;
}

void VectorIndex::validate_addition(const EmbeddingRecord& r, std::size_t& dim,
                                    const std::map<std::string, Entry>& state,
                                    const std::map<std::string, StoreKind>& section_home) const {
    if (r.record_id.empty() || r.section_id.empty()) throw IndexError("record and section ids must be set");
    if (r.vector.empty()) throw IndexError("record " + r.record_id + " has an empty vector");
    if (dim == 0) dim = r.vector.size();
    if (r.vector.size() != dim)
        throw IndexError("record " + r.record_id + " has dimension " + std::to_string(r.vector.size()) +
                         ", index dimension is " + std::to_string(dim));
    if (norm_of(r.vector) == 0.0) throw IndexError("record " + r.record_id + " has a zero-norm vector");
    if (state.contains(r.record_id)) throw IndexError("duplicate record id " + r.record_id);
    auto home = section_home.find(r.section_id);
    if (home != section_home.end() && home->second != r.collection)
        throw IndexError("section " + r.section_id + " already lives in the " +
                         std::string(to_string(home->second)) + " collection");
}

void VectorIndex::add(EmbeddingRecord record) {
    auto lock = write_lock();
    std::size_t dim = dimension_;
    validate_addition(record, dim, records_, section_home_);
    dimension_ = dim;
    const double n = norm_of(record.vector);
    section_home_[record.section_id] = record.collection;
    auto id = record.record_id;
    records_.emplace(std::move(id), Entry{std::move(record), n});
}

void VectorIndex::replace(const std::vector<Removal>& removals, std::vector<EmbeddingRecord> additions) {
    auto lock = write_lock();

    std::set<std::string> removed_records;
    std::set<std::string> removed_sections;
    for (const auto& [section_id, collection] : removals) {
        auto home = section_home_.find(section_id);
        if (home == section_home_.end() || home->second != collection)
            throw IndexError("replace: section " + section_id + " is not in the " +
                             std::string(to_string(collection)) + " collection");
        removed_sections.insert(section_id);
    }
    for (const auto& [rid, entry] : records_)
        if (removed_sections.contains(entry.record.section_id)) removed_records.insert(rid);

    // Validate additions against the post-removal state without touching the real one.
    std::map<std::string, StoreKind> home_after;
    for (const auto& [sid, coll] : section_home_)
        if (!removed_sections.contains(sid)) home_after.emplace(sid, coll);
    std::set<std::string> added_ids;
    std::size_t dim = dimension_;
    static const std::map<std::string, Entry> kEmpty;
    for (const auto& r : additions) {
        validate_addition(r, dim, kEmpty, home_after);
        if ((records_.contains(r.record_id) && !removed_records.contains(r.record_id)) ||
            !added_ids.insert(r.record_id).second)
            throw IndexError("replace: duplicate record id " + r.record_id);
        home_after.emplace(r.section_id, r.collection);
    }

    for (const auto& rid : removed_records) records_.erase(rid);
    for (const auto& sid : removed_sections) section_home_.erase(sid);
    for (auto& r : additions) {
        const double n = norm_of(r.vector);
        section_home_[r.section_id] = r.collection;
        auto id = r.record_id;
        records_.emplace(std::move(id), Entry{std::move(r), n});
    }
    dimension_ = dim;
}

std::vector<SearchHit> VectorIndex::search(const SearchRequest& request) const {
    auto lock = read_lock();
    std::vector<SearchHit> hits;
    if (records_.empty() || request.limit == 0) return hits;
    if (request.query.size() != dimension_)
        throw IndexError("query dimension " + std::to_string(request.query.size()) +
                         " does not match index dimension " + std::to_string(dimension_));
    const double qn = norm_of(request.query);
    if (qn == 0.0) throw IndexError("cosine similarity undefined for a zero-norm query");

    for (const auto& [rid, entry] : records_) {
        const auto& r = entry.record;
        if (r.kind != request.kind || r.category != request.category) continue;
        if (std::find(request.collections.begin(), request.collections.end(), r.collection) ==
            request.collections.end())
            continue;
        const double sim = dot(request.query, r.vector) / (qn * entry.norm);
        if (sim >= request.threshold) hits.push_back({r.section_id, rid, sim, r.collection});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        if (a.section_id != b.section_id) return a.section_id < b.section_id;
        return a.record_id < b.record_id;
    });
    if (hits.size() > request.limit) hits.resize(request.limit);
    return hits;
}

std::vector<EmbeddingRecord> VectorIndex::records_of(const std::string& section_id) const {
    auto lock = read_lock();
    std::vector<EmbeddingRecord> out;
    for (const auto& [rid, entry] : records_)
        if (entry.record.section_id == section_id) out.push_back(entry.record);
    return out;
}

std::optional<StoreKind> VectorIndex::collection_of(const std::string& section_id) const {
    auto lock = read_lock();
    auto it = section_home_.find(section_id);
    if (it == section_home_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> VectorIndex::section_ids(std::optional<StoreKind> collection) const {
    auto lock = read_lock();
    std::vector<std::string> out;
    for (const auto& [sid, coll] : section_home_)
        if (!collection || coll == *collection) out.push_back(sid);
    return out;
}

std::size_t VectorIndex::record_count(std::optional<StoreKind> collection) const {
    auto lock = read_lock();
    if (!collection) return records_.size();
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const auto& kv) {
        return kv.second.record.collection == *collection;
    }));
}

std::vector<EmbeddingRecord> VectorIndex::snapshot() const {
    auto lock = read_lock();
    std::vector<EmbeddingRecord> out;
    out.reserve(records_.size());
    for (const auto& [rid, entry] : records_) out.push_back(entry.record);
    return out;
}

void VectorIndex::persist(const std::filesystem::path& path) const {
    auto lock = read_lock();
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IndexError("cannot write vector file " + tmp.string());
        out << "EVOLVE-VECTORS " << kFormatVersion << ' ' << dimension_ << ' ' << records_.size() << '\n';
        for (const auto& [rid, entry] : records_) {
            const auto& r = entry.record;
            nlohmann::json line{{"record_id", r.record_id},
                                {"section_id", r.section_id},
                                {"kind", std::string(to_string(r.kind))},
                                {"collection", std::string(to_string(r.collection))},
                                {"category", r.category},
                                {"topic", r.topic},
                                {"summary", r.summary},
                                {"vector", r.vector}};
            out << line.dump() << '\n';
        }
        if (!out) throw IndexError("failed writing vector file " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexError("cannot open vector file " + path.string());
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic;
    int version = 0;
    std::size_t dim = 0;
    std::size_t count = 0;
    if (!(hs >> magic >> version >> dim >> count) || magic != "EVOLVE-VECTORS")
        throw IndexError("corrupt vector file header in " + path.string());
    if (version != kFormatVersion)
        throw IndexError("unsupported vector file version " + std::to_string(version));

    auto lock = write_lock();
    if (dimension_ != 0 && dim != 0 && dim != dimension_)
        throw IndexError("vector file dimension " + std::to_string(dim) + " does not match index dimension " +
                         std::to_string(dimension_));

    std::map<std::string, Entry> records;
    std::map<std::string, StoreKind> homes;
    std::size_t loaded_dim = dim;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EmbeddingRecord r;
        try {
            const auto doc = nlohmann::json::parse(line);
            r.record_id = doc.at("record_id").get<std::string>();
            r.section_id = doc.at("section_id").get<std::string>();
            r.kind = parse_record_kind(doc.at("kind").get<std::string>());
            r.collection = parse_store_kind(doc.at("collection").get<std::string>());
            r.category = doc.at("category").get<std::string>();
            r.topic = doc.value("topic", std::string{});
            r.summary = doc.value("summary", std::string{});
            r.vector = doc.at("vector").get<Vector>();
        } catch (const nlohmann::json::exception& e) {
            throw IndexError("corrupt vector record at line " + std::to_string(n + 2) + ": " + e.what());
        } catch (const ParseError& e) {
            throw IndexError("corrupt vector record at line " + std::to_string(n + 2) + ": " + e.what());
        }
        if (loaded_dim == 0) loaded_dim = r.vector.size();
        validate_addition(r, loaded_dim, records, homes);
        homes[r.section_id] = r.collection;
        const double nrm = norm_of(r.vector);
        auto id = r.record_id;
        records.emplace(std::move(id), Entry{std::move(r), nrm});
        ++n;
    }
    if (n != count)
        throw IndexError("vector file declares " + std::to_string(count) + " records but holds " +
                         std::to_string(n));
    records_ = std::move(records);
    section_home_ = std::move(homes);
    dimension_ = loaded_dim;
}

}  // namespace evolve

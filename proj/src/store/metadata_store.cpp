#include "evolve/store/metadata_store.hpp"

#include <sqlite3.h>

#include "evolve/errors.hpp"

namespace evolve {
namespace {

struct Migration {
    int version;
    const char* sql;
};

constexpr Migration kMigrations[] = {
    {1,
     "CREATE TABLE sections ("
     "  id TEXT PRIMARY KEY,"
     "  topic TEXT NOT NULL,"
     "  summary TEXT NOT NULL,"
     "  content TEXT NOT NULL,"
     "  refresh_minutes INTEGER NOT NULL CHECK (refresh_minutes >= 0),"
     "  category TEXT NOT NULL,"
     "  created_at INTEGER NOT NULL,"
     "  store TEXT NOT NULL CHECK (store IN ('staging', 'canonical'))"
     ");"
     "CREATE INDEX sections_store_category ON sections(store, category);"},
};

class Statement {
public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK)
            throw StoreError(std::string("prepare failed: ") + sqlite3_errmsg(db));
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    void bind(int i, const std::string& v) {
        sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    }
    void bind(int i, std::int64_t v) { sqlite3_bind_int64(stmt_, i, v); }

    bool step() {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw StoreError(std::string("sqlite step failed: ") + sqlite3_errmsg(db_));
    }

    std::string text(int col) const {
        const auto* p = sqlite3_column_text(stmt_, col);
        return p ? std::string(reinterpret_cast<const char*>(p),
                               static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
                 : std::string{};
    }
    std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

constexpr const char* kSelectColumns =
    "SELECT id, topic, summary, content, refresh_minutes, category, created_at, store FROM sections";

Section read_row(const Statement& st) {
    Section s;
    s.id = st.text(0);
    s.topic = st.text(1);
    s.summary = st.text(2);
    s.content = st.text(3);
    s.refresh_minutes = st.integer(4);
    s.category = st.text(5);
    s.created_at = from_epoch_ms(st.integer(6));
    s.store = parse_store_kind(st.text(7));
    return s;
}

}  // namespace

MetadataStore::MetadataStore(const std::filesystem::path& path, const Taxonomy* taxonomy)
    : taxonomy_(taxonomy) {
    if (path != ":memory:" && path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        throw StoreError("cannot open metadata store " + path.string() + ": " + msg);
    }
    sqlite3_busy_timeout(db_, 30000);
    exec("PRAGMA foreign_keys = ON;");
    if (path != ":memory:") exec("PRAGMA journal_mode = WAL;");
    migrate();
}

MetadataStore::~MetadataStore() { sqlite3_close(db_); }

void MetadataStore::exec(const char* sql) const {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw StoreError("sqlite: " + msg);
    }
}

void MetadataStore::migrate() {
    std::lock_guard lock(mu_);
    exec("CREATE TABLE IF NOT EXISTS schema_migrations (version INTEGER PRIMARY KEY, applied_at INTEGER NOT NULL);");
    int current = 0;
    {
        Statement st(db_, "SELECT COALESCE(MAX(version), 0) FROM schema_migrations");
        if (st.step()) current = static_cast<int>(st.integer(0));
    }
    for (const auto& m : kMigrations) {
        if (m.version <= current) continue;
        exec("BEGIN IMMEDIATE;");
        try {
            exec(m.sql);
            Statement st(db_, "INSERT INTO schema_migrations(version, applied_at) VALUES (?, strftime('%s','now'))");
            st.bind(1, static_cast<std::int64_t>(m.version));
            st.step();
            exec("COMMIT;");
        } catch (...) {
            exec("ROLLBACK;");
            throw;
        }
    }
}

int MetadataStore::schema_version() const {
    std::lock_guard lock(mu_);
    Statement st(db_, "SELECT COALESCE(MAX(version), 0) FROM schema_migrations");
    return st.step() ? static_cast<int>(st.integer(0)) : 0;
}

void MetadataStore::check_section(const Section& s) const {
    if (s.id.empty()) throw StoreError("section id must not be empty");
    if (s.content.empty()) throw StoreError("section " + s.id + " has empty content");
    if (s.refresh_minutes < 0) throw StoreError("section " + s.id + " has a negative TTL");
    if (taxonomy_ && !taxonomy_->contains_exact(s.category))
        throw StoreError("section " + s.id + " has non-canonical category '" + s.category + "'");
}

void MetadataStore::upsert_locked(const Section& s) {
    check_section(s);
    Statement st(db_,
                 "INSERT INTO sections(id, topic, summary, content, refresh_minutes, category, created_at, store) "
                 "VALUES (?, ?, ?, ?, ?, ?, ?, ?) "
                 "ON CONFLICT(id) DO UPDATE SET topic=excluded.topic, summary=excluded.summary, "
                 "content=excluded.content, refresh_minutes=excluded.refresh_minutes, "
                 "category=excluded.category, created_at=excluded.created_at, store=excluded.store");
    st.bind(1, s.id);
    st.bind(2, s.topic);
    st.bind(3, s.summary);
    st.bind(4, s.content);
    st.bind(5, s.refresh_minutes);
    st.bind(6, s.category);
    st.bind(7, to_epoch_ms(s.created_at));
    st.bind(8, std::string(to_string(s.store)));
    st.step();
}

bool MetadataStore::remove_locked(const std::string& id) {
    Statement st(db_, "DELETE FROM sections WHERE id = ?");
    st.bind(1, id);
    st.step();
    return sqlite3_changes(db_) > 0;
}

void MetadataStore::upsert(const Section& section) {
    std::lock_guard lock(mu_);
    upsert_locked(section);
}

std::optional<Section> MetadataStore::get(const std::string& id) const {
    std::lock_guard lock(mu_);
    Statement st(db_, (std::string(kSelectColumns) + " WHERE id = ?").c_str());
    st.bind(1, id);
    if (!st.step()) return std::nullopt;
    return read_row(st);
}

bool MetadataStore::remove(const std::string& id) {
    std::lock_guard lock(mu_);
    return remove_locked(id);
}

std::vector<Section> MetadataStore::list(std::optional<StoreKind> store,
                                         std::optional<std::string> category) const {
    std::lock_guard lock(mu_);
    std::string sql = kSelectColumns;
    sql += " WHERE (?1 IS NULL OR store = ?1) AND (?2 IS NULL OR category = ?2) ORDER BY created_at, id";
    Statement st(db_, sql.c_str());
    if (store) st.bind(1, std::string(to_string(*store)));
    if (category) st.bind(2, *category);
    std::vector<Section> out;
    while (st.step()) out.push_back(read_row(st));
    return out;
}

std::size_t MetadataStore::count(std::optional<StoreKind> store) const {
    std::lock_guard lock(mu_);
    Statement st(db_, "SELECT COUNT(*) FROM sections WHERE (?1 IS NULL OR store = ?1)");
    if (store) st.bind(1, std::string(to_string(*store)));
    return st.step() ? static_cast<std::size_t>(st.integer(0)) : 0;
}

void MetadataStore::transactional_replace(const std::vector<std::string>& removals,
                                          const std::vector<Section>& additions) {
    std::lock_guard lock(mu_);
    if (removals.empty() && additions.empty()) return;
    exec("BEGIN IMMEDIATE;");
    try {
        for (const auto& id : removals)
            if (!remove_locked(id)) throw StoreError("transactional_replace: unknown section " + id);
        if (fault_injector_) fault_injector_("after_removals");
        for (const auto& s : additions) {
            {
                Statement probe(db_, "SELECT 1 FROM sections WHERE id = ?");
                probe.bind(1, s.id);
                if (probe.step()) throw StoreError("transactional_replace: section " + s.id + " already exists");
            }
            upsert_locked(s);
        }
        if (fault_injector_) fault_injector_("before_commit");
        exec("COMMIT;");
    } catch (...) {
        exec("ROLLBACK;");
        throw;
    }
}

void MetadataStore::move_store(const std::string& id, StoreKind destination) {
    std::lock_guard lock(mu_);
    Statement probe(db_, "SELECT 1 FROM sections WHERE id = ?");
    probe.bind(1, id);
    if (!probe.step()) throw StoreError("move_store: unknown section " + id);
    Statement st(db_, "UPDATE sections SET store = ? WHERE id = ?");
    st.bind(1, std::string(to_string(destination)));
    st.bind(2, id);
    st.step();
}

void MetadataStore::set_fault_injector(std::function<void(std::string_view)> injector) {
    std::lock_guard lock(mu_);
    fault_injector_ = std::move(injector);
}

}  // namespace evolve

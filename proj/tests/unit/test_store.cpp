#include <doctest.h>

#include <filesystem>
#include <random>

#include "evolve/errors.hpp"
#include "evolve/service/config.hpp"
#include "evolve/store/metadata_store.hpp"
#include "support/support.hpp"

using namespace evolve;
using namespace evolve::testing;
namespace fs = std::filesystem;

TEST_CASE("upsert and get round-trip all fields") {
    MetadataStore store(":memory:");
    auto s = make_section("id-1", "Physics", "Topic", "Body \"quoted\" text", StoreKind::canonical,
                          from_epoch_ms(1'767'225'600'789), 1440);
    s.summary = "A summary";
    store.upsert(s);
    CHECK(store.get("id-1") == std::optional<Section>(s));
    CHECK_FALSE(store.get("unknown").has_value());
    s.content = "updated";
    store.upsert(s);
    CHECK(store.get("id-1")->content == "updated");
    CHECK(store.count() == 1);
    CHECK(store.remove("id-1"));
    CHECK_FALSE(store.remove("id-1"));
    CHECK(store.count() == 0);
}

TEST_CASE("writes require valid sections and canonical categories") {
    const auto taxonomy = Taxonomy::load(default_asset_root() / "assets" / "taxonomy.json");
    MetadataStore store(":memory:", &taxonomy);
    CHECK_NOTHROW(store.upsert(make_section("a", "Physics", "t", "c")));
    CHECK_THROWS_AS(store.upsert(make_section("b", "physics", "t", "c")), StoreError);
    CHECK_THROWS_AS(store.upsert(make_section("", "Physics", "t", "c")), StoreError);
    CHECK_THROWS_AS(store.upsert(make_section("c", "Physics", "t", "")), StoreError);
}

TEST_CASE("list filters match a fixture enumeration") {
    MetadataStore store(":memory:");
    std::mt19937_64 rng(5);
    const std::vector<std::string> cats{"Physics", "Biology", "History"};
    std::vector<Section> all;
    const auto base = ManualClock().now();
    for (int i = 0; i < 120; ++i) {
        auto s = make_section("s" + std::to_string(i), cats[rng() % 3], "t", "c",
                              rng() % 2 ? StoreKind::staging : StoreKind::canonical,
                              base + std::chrono::minutes(rng() % 50));
        store.upsert(s);
        all.push_back(s);
    }
    std::sort(all.begin(), all.end(), [](const Section& a, const Section& b) {
        return a.created_at != b.created_at ? a.created_at < b.created_at : a.id < b.id;
    });
    for (std::optional<StoreKind> kind : {std::optional<StoreKind>{}, std::optional{StoreKind::staging},
                                          std::optional{StoreKind::canonical}}) {
        for (std::optional<std::string> cat : {std::optional<std::string>{}, std::optional<std::string>{"Physics"},
                                               std::optional<std::string>{"Law"}}) {
            std::vector<Section> expected;
            for (const auto& s : all)
                if ((!kind || s.store == *kind) && (!cat || s.category == *cat)) expected.push_back(s);
            CHECK(store.list(kind, cat) == expected);
        }
        if (kind) {
            std::size_t n = 0;
            for (const auto& s : all) n += s.store == *kind;
            CHECK(store.count(kind) == n);
        }
    }
}

TEST_CASE("transactional_replace commits or rolls back") {
    MetadataStore store(":memory:");
    store.upsert(make_section("a", "Physics", "A", "a"));
    store.upsert(make_section("b", "Physics", "B", "b"));

    SUBCASE("success removes two and adds one") {
        store.transactional_replace({"a", "b"}, {make_section("m", "Physics", "M", "merged", StoreKind::canonical)});
        CHECK(store.count() == 1);
        CHECK(store.get("m")->store == StoreKind::canonical);
    }
    SUBCASE("empty replace is a no-op") {
        store.transactional_replace({}, {});
        CHECK(store.count() == 2);
    }
    SUBCASE("failure after removals keeps both rows") {
        store.set_fault_injector([](std::string_view point) {
            if (point == "after_removals") throw StoreError("injected");
        });
        CHECK_THROWS_AS(store.transactional_replace({"a", "b"}, {make_section("m", "Physics", "M", "m")}),
                        StoreError);
        CHECK(store.get("a").has_value());
        CHECK(store.get("b").has_value());
        CHECK_FALSE(store.get("m").has_value());
        store.set_fault_injector({});
        store.transactional_replace({"a"}, {});
        CHECK(store.count() == 1);
    }
    SUBCASE("unknown removal or clashing addition rolls back") {
        CHECK_THROWS_AS(store.transactional_replace({"a", "zzz"}, {}), StoreError);
        CHECK(store.count() == 2);
        CHECK_THROWS_AS(store.transactional_replace({"a"}, {make_section("b", "Physics", "B", "b")}), StoreError);
        CHECK(store.get("a").has_value());
    }
}

TEST_CASE("move_store") {
    MetadataStore store(":memory:");
    store.upsert(make_section("a", "Physics", "A", "a"));
    store.move_store("a", StoreKind::canonical);
    CHECK(store.get("a")->store == StoreKind::canonical);
    CHECK_NOTHROW(store.move_store("a", StoreKind::canonical));
    CHECK_THROWS_AS(store.move_store("zzz", StoreKind::canonical), StoreError);
}

TEST_CASE("file-backed store persists across reopen") {
    const auto dir = fs::temp_directory_path() / ("evolve-store-" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    const auto path = dir / "meta.db";
    const auto s = make_section("p", "History", "T", "C", StoreKind::canonical);
    {
        MetadataStore store(path);
        store.upsert(s);
        CHECK(store.schema_version() >= 1);
    }
    {
        MetadataStore store(path);
        CHECK(store.get("p") == std::optional<Section>(s));
    }
    fs::remove_all(dir);
}

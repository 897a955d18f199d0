#pragma once

// Helpers shared by the test binaries: mock stacks, section builders, and a
// small CSV reader that is independent of the harness writer.

#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "evolve/service/runtime.hpp"

namespace evolve::testing {

inline RuntimeOptions mock_options(bool record = false) {
    RuntimeOptions o;
    o.mock = true;
    o.record = record;
    return o;
}

inline Section make_section(std::string id, std::string category, std::string topic, std::string content,
                            StoreKind store = StoreKind::staging, Timestamp created = ManualClock().now(),
                            std::int64_t refresh_minutes = 525600) {
    Section s;
    s.id = std::move(id);
    s.category = std::move(category);
    s.topic = std::move(topic);
    s.summary = s.topic;
    s.content = std::move(content);
    s.store = store;
    s.created_at = created;
    s.refresh_minutes = refresh_minutes;
    return s;
}

/// Pseudo-words that share no tokens with each other or with English prose.
inline std::string nonce_word(std::mt19937_64& rng, std::size_t letters = 7) {
    static constexpr char kConsonants[] = "bcdfghjklmnpqrstvwxz";
    static constexpr char kVowels[] = "aeiouy";
    std::string w;
    for (std::size_t i = 0; i < letters; ++i)
        w += (i % 2 == 0) ? kConsonants[rng() % 20] : kVowels[rng() % 6];
    return w;
}

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
            rows.push_back(std::move(row));
            row.clear();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (field_started || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Embeddings looked up by exact text (falling back to a small hash
/// embedder) plus a teacher that acquires "ACQ <query>" sections whose
/// document text embeds like the query.
struct VectorTable {
    explicit VectorTable(std::size_t dimension = 2) : fallback(dimension, 99) {}

    std::map<std::string, Vector> vectors;
    eval::HashEmbedder fallback;
    std::size_t acquires = 0;
    std::mutex mu;

    Vector lookup(const std::string& text) {
        if (auto it = vectors.find(text); it != vectors.end()) return it->second;
        if (text.rfind("ACQ ", 0) == 0) {
            const auto query = text.substr(4, text.find('\n') - 4);
            if (auto it = vectors.find(query); it != vectors.end()) return it->second;
        }
        return fallback.embed(text);
    }

    HttpResponse operator()(const HttpRequest& req) {
        std::lock_guard lock(mu);
        if (req.path == "/v1/embeddings") {
            std::vector<Vector> out;
            for (const auto& t : req.body.at("input")) out.push_back(lookup(t.get<std::string>()));
            return {200, make_embedding_response(out)};
        }
        ++acquires;
        const std::string q = req.tag.context.value("query", "");
        nlohmann::json doc{{"section",
                            {{"topic", "ACQ " + q},
                             {"refresh", {{"value", 1}, {"unit", "years"}}},
                             {"summary", "acquired"},
                             {"content", "acquired for " + q}}}};
        return {200, make_chat_response(doc.dump())};
    }
};

/// Unit vector in the plane at `degrees` from (1, 0).
inline Vector at_angle(double degrees) {
    const double r = degrees * 3.14159265358979323846 / 180.0;
    return {static_cast<float>(std::cos(r)), static_cast<float>(std::sin(r))};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace evolve::testing

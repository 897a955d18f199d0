#include "evolve/consolidation/sleep_cycle.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

#include "evolve/errors.hpp"

namespace evolve {

nlohmann::json to_json(const ConsolidationReport& r) {
    nlohmann::json compiles = nlohmann::json::array();
    for (const auto& c : r.compiles)
        compiles.push_back({{"staging_id", c.staging_id},
                            {"canonical_ids", c.canonical_ids},
                            {"output_ids", c.output_ids},
                            {"category", c.category}});
    return {{"staging_in", r.staging_in},
            {"discarded", r.discarded},
            {"direct_moves", r.direct_moves},
            {"compile_calls", r.compile_calls},
            {"compiled_out", r.compiled_out},
            {"canonical_consumed", r.canonical_consumed},
            {"redundant", r.redundant},
            {"deferred", r.deferred},
            {"canonical_before", r.canonical_before},
            {"canonical_after", r.canonical_after},
            {"staging_after", r.staging_after},
            {"compiles", compiles},
            {"deferred_ids", r.deferred_ids}};
}

std::vector<ScoredSection> detect_overlaps(KnowledgeBase& kb, const Section& section, double overlap_threshold) {
    return kb.canonical_overlaps(section, overlap_threshold);
}

ConsolidationReport sleep_cycle(KnowledgeBase& kb, TeacherService& teachers, const Clock& clock,
                                const SleepOptions& options) {
    ConsolidationReport report;
    const Timestamp cycle_start = clock.now();
    auto& metadata = kb.metadata();

    // list() is already created_at, id ordered.
    const auto staging = metadata.list(StoreKind::staging);
    report.staging_in = staging.size();
    report.canonical_before = metadata.count(StoreKind::canonical);

    std::set<std::string> compiled_this_cycle;
    for (const auto& section : staging) {
        if (section.refresh_minutes == 0 || is_expired(section, cycle_start)) {
            kb.replace({section}, {});
            ++report.discarded;
            continue;
        }

        auto overlaps = detect_overlaps(kb, section, options.overlap_threshold);
        std::erase_if(overlaps, [&](const ScoredSection& s) { return compiled_this_cycle.contains(s.section.id); });

        if (overlaps.empty()) {
            kb.promote(section.id);
            ++report.direct_moves;
            continue;
        }

        std::vector<Section> matches;
        for (auto& o : overlaps) matches.push_back(std::move(o.section));
        CompileLog log{section.id, {}, {}, section.category};
        for (const auto& m : matches) log.canonical_ids.push_back(m.id);

        std::vector<Section> compiled;
        try {
            ++report.compile_calls;
            compiled = teachers.compile(section, matches);
        } catch (const std::exception& e) {
            spdlog::warn("compile for staging section {} failed, deferring to next cycle: {}", section.id, e.what());
            ++report.deferred;
            report.deferred_ids.push_back(section.id);
            continue;
        }

        if (compiled.empty()) {
            kb.replace({section}, {});
            ++report.redundant;
        } else {
            for (auto& c : compiled) {
                c.store = StoreKind::canonical;
                c.category = section.category;
                log.output_ids.push_back(c.id);
                compiled_this_cycle.insert(c.id);
            }
            std::vector<Section> removals{section};
            removals.insert(removals.end(), matches.begin(), matches.end());
            kb.replace(removals, compiled);
            report.compiled_out += compiled.size();
            report.canonical_consumed += matches.size();
        }
        report.compiles.push_back(std::move(log));
    }

    report.canonical_after = metadata.count(StoreKind::canonical);
    report.staging_after = metadata.count(StoreKind::staging);
    if (report.staging_after != report.deferred)
        throw ConsistencyError("staging holds " + std::to_string(report.staging_after) +
                               " sections after consolidation, expected " + std::to_string(report.deferred));
    return report;
}

}  // namespace evolve

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evolve/core/clock.hpp"
#include "evolve/llm/teacher.hpp"
#include "evolve/retrieval/retrieval.hpp"

namespace evolve {

struct CompileLog {
    std::string staging_id;
    std::vector<std::string> canonical_ids;
    std::vector<std::string> output_ids;
    std::string category;
};

struct ConsolidationReport {
    std::size_t staging_in = 0;
    std::size_t discarded = 0;
    std::size_t direct_moves = 0;
    std::size_t compile_calls = 0;
    std::size_t compiled_out = 0;
    std::size_t canonical_consumed = 0;
    std::size_t redundant = 0;  // compiles that returned nothing
    std::size_t deferred = 0;   // compiles whose teacher call failed
    std::size_t canonical_before = 0;
    std::size_t canonical_after = 0;
    std::size_t staging_after = 0;
    std::vector<CompileLog> compiles;
    std::vector<std::string> deferred_ids;
};

nlohmann::json to_json(const ConsolidationReport& report);

struct SleepOptions {
    double overlap_threshold = 0.85;
};

/// Canonical sections in the same category at or above the threshold, descending.
std::vector<ScoredSection> detect_overlaps(KnowledgeBase& kb, const Section& section, double overlap_threshold);

/// Offline reconciliation of staging into canonical. Sections are visited in
/// created_at order: ephemeral/expired ones are dropped, ones without a
/// same-category canonical overlap are promoted, and the rest are compiled
/// with their overlaps by the teacher, the output replacing all inputs in
/// canonical. Requires exclusive access to the stores.
ConsolidationReport sleep_cycle(KnowledgeBase& kb, TeacherService& teachers, const Clock& clock,
                                const SleepOptions& options = {});

}  // namespace evolve

#pragma once

#include <memory>
#include <optional>

#include "evolve/consolidation/sleep_cycle.hpp"
#include "evolve/core/clock.hpp"
#include "evolve/eval/harness.hpp"
#include "evolve/eval/mock_models.hpp"
#include "evolve/index/vector_index.hpp"
#include "evolve/llm/gateway.hpp"
#include "evolve/llm/teacher.hpp"
#include "evolve/llm/transport.hpp"
#include "evolve/pipeline/orchestrator.hpp"
#include "evolve/prompt/template.hpp"
#include "evolve/retrieval/retrieval.hpp"
#include "evolve/service/config.hpp"
#include "evolve/store/metadata_store.hpp"

namespace evolve {

struct RuntimeOptions {
    /// Wire the offline model double instead of HTTP endpoints. Mock runs use
    /// a manual clock, seeded ids, and no retry sleeps.
    bool mock = false;
    eval::MockOptions mock_options;
    std::uint64_t id_seed = 7;
    /// Wrap the transport in a RecordingTransport.
    bool record = false;
    /// Supplied transport; takes precedence over `mock` for model calls.
    Transport* transport = nullptr;
    /// Supplied clock; defaults to SystemClock (live) or ManualClock (mock).
    Clock* clock = nullptr;
    bool zero_backoff = false;
};

/// Owns one fully wired stack: models, stores, retrieval, teachers, pipeline, judge.
class Runtime {
public:
    Runtime(Config config, RuntimeOptions options = {});
    ~Runtime();

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    const Config& config() const noexcept { return config_; }
    Clock& clock() noexcept { return *clock_; }
    ManualClock* manual_clock() noexcept { return manual_clock_.get(); }
    IdSource& ids() noexcept { return ids_; }
    Transport& transport() noexcept { return *transport_; }
    RecordingTransport* recorder() noexcept { return recorder_.get(); }
    eval::MockModelServer* mock() noexcept { return mock_.get(); }
    LlmGateway& gateway() noexcept { return *gateway_; }
    PromptLibrary& prompts() noexcept { return *prompts_; }
    const Taxonomy& taxonomy() const noexcept { return *taxonomy_; }
    MetadataStore& metadata() noexcept { return *metadata_; }
    VectorIndex& index() noexcept { return *index_; }
    KnowledgeBase& kb() noexcept { return *kb_; }
    TeacherService& teachers() noexcept { return *teachers_; }
    Orchestrator& orchestrator() noexcept { return *orchestrator_; }
    eval::Judge& judge() noexcept { return *judge_; }

    ConsolidationReport consolidate();

    /// Writes the vector index to `vectors` when a path is configured.
    void persist();

private:
    Config config_;
    std::unique_ptr<Clock> owned_clock_;
    std::unique_ptr<ManualClock> manual_clock_;
    Clock* clock_ = nullptr;
    IdSource ids_;
    std::unique_ptr<eval::MockModelServer> mock_;
    std::unique_ptr<HttpTransport> http_;
    std::unique_ptr<RecordingTransport> recorder_;
    Transport* transport_ = nullptr;
    std::unique_ptr<LlmGateway> gateway_;
    std::unique_ptr<PromptLibrary> prompts_;
    std::unique_ptr<Taxonomy> taxonomy_;
    std::unique_ptr<MetadataStore> metadata_;
    std::unique_ptr<VectorIndex> index_;
    std::unique_ptr<Embedder> embedder_;
    std::unique_ptr<KnowledgeBase> kb_;
    std::unique_ptr<TeacherRegistry> registry_;
    std::unique_ptr<TeacherService> teachers_;
    std::unique_ptr<Orchestrator> orchestrator_;
    std::unique_ptr<eval::Judge> judge_;
};

/// Config for an offline mock stack: shipped assets, in-memory stores, mock:// endpoints.
Config mock_config();

/// Scripts the mock so each question classifies to one pair
/// (optional `category`, else the default category) and the teacher knows
/// its gold answer. Control questions are also known to the bare local model.
void script_questions(eval::MockModelServer& mock, const std::vector<eval::BenchmarkQuestion>& questions,
                      const std::string& default_category);

}  // namespace evolve

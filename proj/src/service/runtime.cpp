#include "evolve/service/runtime.hpp"

#include <spdlog/spdlog.h>

#include "evolve/errors.hpp"

namespace evolve {

Runtime::Runtime(Config config, RuntimeOptions options)
    : config_(std::move(config)), ids_(options.mock ? IdSource(options.id_seed) : IdSource()) {
    if (options.clock) {
        clock_ = options.clock;
    } else if (options.mock) {
        manual_clock_ = std::make_unique<ManualClock>();
        clock_ = manual_clock_.get();
    } else {
        owned_clock_ = std::make_unique<SystemClock>();
        clock_ = owned_clock_.get();
    }

    if (options.transport) {
        transport_ = options.transport;
    } else if (options.mock) {
        mock_ = std::make_unique<eval::MockModelServer>(options.mock_options);
        transport_ = mock_.get();
    } else {
        http_ = std::make_unique<HttpTransport>();
        transport_ = http_.get();
    }
    if (options.record) {
        recorder_ = std::make_unique<RecordingTransport>(*transport_);
        transport_ = recorder_.get();
    }

    LlmGateway::Sleeper sleeper;
    if (options.mock || options.zero_backoff) sleeper = [](std::chrono::milliseconds) {};
    gateway_ = std::make_unique<LlmGateway>(*transport_, RetryPolicy{}, sleeper);

    prompts_ = std::make_unique<PromptLibrary>(config_.prompts_dir);
    taxonomy_ = std::make_unique<Taxonomy>(Taxonomy::load(config_.taxonomy_path));
    for (const auto& t : config_.teachers)
        for (const auto& c : t.categories)
            if (!taxonomy_->contains_exact(c))
                throw ConfigError("teacher '" + t.name + "' claims category '" + c + "' which is not in the taxonomy");

    if (config_.db_path != ":memory:" && config_.db_path.has_parent_path())
        std::filesystem::create_directories(config_.db_path.parent_path());
    metadata_ = std::make_unique<MetadataStore>(config_.db_path, taxonomy_.get());
    index_ = std::make_unique<VectorIndex>();
    if (!config_.vector_path.empty() && std::filesystem::exists(config_.vector_path)) {
        try {
            index_->load(config_.vector_path);
        } catch (const std::exception& e) {
            spdlog::warn("ignoring unreadable vector file {}: {}; re-embedding from the metadata store",
                         config_.vector_path.string(), e.what());
            index_ = std::make_unique<VectorIndex>();
        }
    }
    embedder_ = std::make_unique<Embedder>(*gateway_, config_.embedder);
    kb_ = std::make_unique<KnowledgeBase>(*metadata_, *index_, *embedder_,
                                          make_strategy(config_.retrieval_mode, config_.chunk));
    if (metadata_->count() > 0 || index_->record_count() > 0) {
        if (const auto fixes = kb_->reconcile(); fixes > 0)
            spdlog::info("reconciled {} sections between metadata store and vector index", fixes);
    }

    registry_ = std::make_unique<TeacherRegistry>(config_.teachers, config_.default_teacher);
    teachers_ = std::make_unique<TeacherService>(*gateway_, *prompts_, *registry_, *clock_, ids_);
    orchestrator_ = std::make_unique<Orchestrator>(*gateway_, *prompts_, *taxonomy_, *kb_, *teachers_, *clock_,
                                                   config_.local, config_.pipeline());
    judge_ = std::make_unique<eval::Judge>(*gateway_, *prompts_, config_.judge);
}

Runtime::~Runtime() {
    try {
        persist();
    } catch (const std::exception& e) {
        spdlog::error("failed to persist vector index: {}", e.what());
    }
}

ConsolidationReport Runtime::consolidate() {
    auto report = sleep_cycle(*kb_, *teachers_, *clock_, SleepOptions{config_.overlap_threshold});
    persist();
    return report;
}

void Runtime::persist() {
    if (config_.vector_path.empty() || !index_) return;
    if (config_.vector_path.has_parent_path()) std::filesystem::create_directories(config_.vector_path.parent_path());
    index_->persist(config_.vector_path);
}

Config mock_config() {
    Config c = default_config();
    c.local = {"mock://local", "", "mock-local", 0.7};
    c.embedder = {"mock://embedder", "", "mock-embed", 0.0};
    c.judge = {"mock://judge", "", "mock-judge", 0.0};
    c.default_teacher = {"mock://teacher", "", "mock-teacher", 0.0};
    c.db_path = ":memory:";
    c.vector_path.clear();
    return c;
}

void script_questions(eval::MockModelServer& mock, const std::vector<eval::BenchmarkQuestion>& questions,
                      const std::string& default_category) {
    for (const auto& q : questions) {
        eval::ScriptedQuery s;
        s.query = q.question;
        s.query_type = QueryType::factual;
        s.pairs.push_back({q.category.empty() ? default_category : q.category, strip_interrogatives(q.question)});
        s.fact = q.gold;
        if (q.bucket == eval::Bucket::control) s.parametric = q.gold;
        mock.add_query(std::move(s));
    }
}

}  // namespace evolve

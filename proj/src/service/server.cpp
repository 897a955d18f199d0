#include "evolve/service/server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "evolve/core/section_json.hpp"
#include "evolve/errors.hpp"

namespace evolve {
namespace {

nlohmann::json section_summary(const Section& s, Timestamp now) {
    return {{"id", s.id},
            {"topic", s.topic},
            {"summary", s.summary},
            {"category", s.category},
            {"store", std::string(to_string(s.store))},
            {"created_at", to_iso8601(s.created_at)},
            {"refresh_minutes", s.refresh_minutes},
            {"expired", is_expired(s, now)},
            {"minutes_remaining", minutes_remaining(s, now)}};
}

Reply failure(int status, std::string_view stage, std::string_view message) {
    return {status, error_body(stage, message)};
}

/// Maps library exceptions onto structured replies.
template <typename F>
Reply guarded(F&& fn) {
    try {
        return fn();
    } catch (const StageError& e) {
        return failure(502, e.stage(), e.message());
    } catch (const TransportError& e) {
        return failure(502, "transport", e.what());
    } catch (const ConsistencyError& e) {
        return failure(500, "consistency", e.what());
    } catch (const ParseError& e) {
        return failure(400, "request", e.what());
    } catch (const ConfigError& e) {
        return failure(400, "request", e.what());
    } catch (const std::exception& e) {
        return failure(500, "internal", e.what());
    }
}

void send(httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

}  // namespace

nlohmann::json error_body(std::string_view stage, std::string_view message) {
    return {{"error", {{"stage", std::string(stage)}, {"message", std::string(message)}}}};
}

Service::Service(Runtime& runtime) : rt_(runtime) {}

Service::~Service() { stop(); }

Reply Service::health() const { return {200, {{"status", "ok"}}}; }

std::shared_ptr<Service::Session> Service::session(const std::string& id) {
    std::lock_guard lock(sessions_mu_);
    auto& slot = sessions_[id];
    if (!slot) slot = std::make_shared<Session>();
    return slot;
}

Reply Service::query(const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
        return failure(400, "request", "body must be an object with a string 'text'");
    const std::string text = body["text"].get<std::string>();
    if (trim(text).empty()) return failure(400, "request", "'text' is empty");
    const std::string sid = body.value("session_id", std::string("default"));
    std::optional<GenerationMode> mode;
    if (body.contains("mode") && !body["mode"].is_null()) {
        try {
            mode = parse_generation_mode(body["mode"].get<std::string>());
        } catch (const std::exception& e) {
            return failure(400, "request", e.what());
        }
    }

    if (rt_.config().consolidation_policy == ConsolidationPolicy::reject && consolidating_.load())
        return failure(409, "consolidation", "consolidation in progress; retry later");
    std::shared_lock lifecycle(lifecycle_);
    auto s = session(sid);
    std::lock_guard turn(s->mu);
    return guarded([&] {
        auto response = rt_.orchestrator().answer_query(text, s->history, mode);
        auto j = to_json(response);
        j["session_id"] = sid;
        return Reply{200, j};
    });
}

Reply Service::list_sections(const std::optional<std::string>& store, const std::optional<std::string>& category) {
    return guarded([&] {
        std::optional<StoreKind> kind;
        if (store && !store->empty()) kind = parse_store_kind(*store);
        std::optional<std::string> cat;
        if (category && !category->empty()) cat = *category;
        const auto now = rt_.clock().now();
        nlohmann::json out = nlohmann::json::array();
        for (const auto& s : rt_.metadata().list(kind, cat)) out.push_back(section_summary(s, now));
        return Reply{200, out};
    });
}

Reply Service::get_section(const std::string& id) {
    return guarded([&] {
        const auto s = rt_.metadata().get(id);
        if (!s) return failure(404, "request", "no section with id " + id);
        auto j = section_to_json(*s);
        const auto now = rt_.clock().now();
        j["expired"] = is_expired(*s, now);
        j["minutes_remaining"] = minutes_remaining(*s, now);
        return Reply{200, j};
    });
}

Reply Service::consolidate() {
    bool expected = false;
    if (!consolidating_.compare_exchange_strong(expected, true))
        return failure(409, "consolidation", "consolidation already running");
    std::unique_lock lifecycle(lifecycle_);
    auto reply = guarded([&] { return Reply{200, to_json(rt_.consolidate())}; });
    consolidating_.store(false);
    return reply;
}

Reply Service::stats() {
    std::shared_lock lifecycle(lifecycle_);
    return guarded([&] {
        const auto p = rt_.orchestrator().stats();
        return Reply{200,
                     {{"staging_count", rt_.metadata().count(StoreKind::staging)},
                      {"canonical_count", rt_.metadata().count(StoreKind::canonical)},
                      {"cache_hit_rate", p.cache_hit_rate()},
                      {"teacher_calls_total", rt_.teachers().calls()},
                      {"queries", p.queries}}};
    });
}

void Service::mount() {
    auto& srv = *server_;
    const std::string token = rt_.config().api_token;
    srv.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
        if (token.empty() || req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
        if (req.get_header_value("Authorization") == "Bearer " + token)
            return httplib::Server::HandlerResponse::Unhandled;
        send(res, failure(401, "auth", "missing or invalid bearer token"));
        return httplib::Server::HandlerResponse::Handled;
    });
    srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    srv.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) return send(res, failure(400, "request", "body is not valid JSON"));
        send(res, query(body));
    });
    srv.Get("/sections", [this](const httplib::Request& req, httplib::Response& res) {
        auto param = [&](const char* k) -> std::optional<std::string> {
            if (!req.has_param(k)) return std::nullopt;
            return req.get_param_value(k);
        };
        send(res, list_sections(param("store"), param("category")));
    });
    srv.Get(R"(/sections/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, get_section(req.matches[1].str()));
    });
    srv.Post("/consolidate", [this](const httplib::Request&, httplib::Response& res) { send(res, consolidate()); });
    srv.Get("/stats", [this](const httplib::Request&, httplib::Response& res) { send(res, stats()); });
    srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status == 404 && res.body.empty()) send(res, failure(404, "request", "no route for " + req.path));
    });
}

bool Service::listen(const std::string& host, int port) {
    server_ = std::make_unique<httplib::Server>();
    mount();
    spdlog::info("serving on {}:{}", host, port);
    return server_->listen(host, port);
}

int Service::start_background(const std::string& host) {
    server_ = std::make_unique<httplib::Server>();
    mount();
    const int port = server_->bind_to_any_port(host);
    if (port < 0) throw ConfigError("could not bind " + host);
    thread_ = std::make_unique<std::thread>([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void Service::stop() {
    if (server_) server_->stop();
    if (thread_ && thread_->joinable()) thread_->join();
    thread_.reset();
}

}  // namespace evolve

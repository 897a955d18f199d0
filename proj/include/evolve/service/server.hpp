#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "evolve/service/runtime.hpp"

namespace httplib {
class Server;
}

namespace evolve {

struct Reply {
    int status = 200;
    nlohmann::json body;
};

/// HTTP surface over one Runtime. Handlers are callable directly so they can
/// be exercised without a socket. Queries share the lifecycle lock and are
/// serialized per session; consolidation takes it exclusively.
class Service {
public:
    explicit Service(Runtime& runtime);
    ~Service();

    Reply health() const;
    Reply query(const nlohmann::json& body);
    Reply list_sections(const std::optional<std::string>& store, const std::optional<std::string>& category);
    Reply get_section(const std::string& id);
    Reply consolidate();
    Reply stats();

    /// Blocks serving on host:port until stop(). Returns false if binding failed.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and serves on a background thread; returns the port.
    int start_background(const std::string& host = "127.0.0.1");
    void stop();

private:
    struct Session {
        std::mutex mu;
        ConversationHistory history;
    };

    void mount();
    std::shared_ptr<Session> session(const std::string& id);

    Runtime& rt_;
    std::shared_mutex lifecycle_;
    std::atomic<bool> consolidating_{false};
    std::mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::unique_ptr<httplib::Server> server_;
    std::unique_ptr<std::thread> thread_;
};

/// {stage, message} error body.
nlohmann::json error_body(std::string_view stage, std::string_view message);

}  // namespace evolve

#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace evolve {

/// Why a model is being called. Decides the temperature discipline.
enum class RoleKind { classify, teacher, generate, judge };

std::string_view to_string(RoleKind role);

/// Caller-side annotations that travel with a request but never go on the wire.
/// Offline model doubles key their behavior on these.
struct RequestTag {
    RoleKind role = RoleKind::generate;
    std::string task;
    nlohmann::json context;
};

struct HttpRequest {
    std::string base_url;
    std::string path;  // "/v1/chat/completions" or "/v1/embeddings"
    std::string api_key;
    nlohmann::json body;
    RequestTag tag;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// POSTs a JSON body. Throws TransportError when no response was obtained.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// OpenAI-compatible endpoints over HTTP(S).
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(int timeout_seconds = 300) : timeout_seconds_(timeout_seconds) {}
    HttpResponse post(const HttpRequest& request) override;

private:
    int timeout_seconds_;
};

/// Forwards to an inner transport and keeps every request for inspection.
class RecordingTransport final : public Transport {
public:
    explicit RecordingTransport(Transport& inner) : inner_(inner) {}

    HttpResponse post(const HttpRequest& request) override;

    std::vector<HttpRequest> requests() const;
    std::size_t count() const;
    void clear();

private:
    Transport& inner_;
    mutable std::mutex mu_;
    std::vector<HttpRequest> requests_;
};

/// Answers from a caller-supplied function; handy in unit tests.
class FunctionTransport final : public Transport {
public:
    using Handler = std::function<HttpResponse(const HttpRequest&)>;
    explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}
    HttpResponse post(const HttpRequest& request) override { return handler_(request); }

private:
    Handler handler_;
};

/// Builds an OpenAI-style chat completion body carrying `content` (null when nullopt).
std::string make_chat_response(const std::optional<std::string>& content);
std::string make_embedding_response(const std::vector<std::vector<float>>& vectors);

}  // namespace evolve

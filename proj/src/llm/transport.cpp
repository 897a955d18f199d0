#include <httplib.h>

#include "evolve/llm/transport.hpp"

#include "evolve/errors.hpp"

namespace evolve {

std::string_view to_string(RoleKind role) {
    switch (role) {
        case RoleKind::classify: return "classify";
        case RoleKind::teacher: return "teacher";
        case RoleKind::generate: return "generate";
        case RoleKind::judge: return "judge";
    }
    return "generate";
}

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError("malformed base URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    out.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

}  // namespace

HttpResponse HttpTransport::post(const HttpRequest& request) {
    const auto url = split_url(request.base_url);
    std::string path = request.path;
    // Base URLs are commonly given with the /v1 suffix already attached.
    if (url.prefix.size() >= 3 && url.prefix.ends_with("/v1") && path.starts_with("/v1/"))
        path = path.substr(3);
    path = url.prefix + path;

    httplib::Client client(url.origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(timeout_seconds_);
    client.set_write_timeout(timeout_seconds_);
    httplib::Headers headers;
    if (!request.api_key.empty()) headers.emplace("Authorization", "Bearer " + request.api_key);

    auto result = client.Post(path, headers, request.body.dump(), "application/json");
    if (!result)
        throw TransportError("request to " + url.origin + path +
                             " failed: " + httplib::to_string(result.error()));
    return HttpResponse{result->status, result->body};
}

HttpResponse RecordingTransport::post(const HttpRequest& request) {
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
    }
    return inner_.post(request);
}

std::vector<HttpRequest> RecordingTransport::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::size_t RecordingTransport::count() const {
    std::lock_guard lock(mu_);
    return requests_.size();
}

void RecordingTransport::clear() {
    std::lock_guard lock(mu_);
    requests_.clear();
}

std::string make_chat_response(const std::optional<std::string>& content) {
    nlohmann::json message{{"role", "assistant"}};
    message["content"] = content ? nlohmann::json(*content) : nlohmann::json(nullptr);
    nlohmann::json body{{"object", "chat.completion"},
                        {"choices", nlohmann::json::array({{{"index", 0},
                                                            {"message", message},
                                                            {"finish_reason", "stop"}}})}};
    return body.dump();
}

std::string make_embedding_response(const std::vector<std::vector<float>>& vectors) {
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = 0; i < vectors.size(); ++i)
        data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", vectors[i]}});
    return nlohmann::json{{"object", "list"}, {"data", data}}.dump();
}

}  // namespace evolve

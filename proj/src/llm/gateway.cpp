#include "evolve/llm/gateway.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <thread>

#include "evolve/errors.hpp"

namespace evolve {

void ModelEndpoint::validate() const {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos || scheme_end == 0 || base_url.size() <= scheme_end + 3)
        throw ConfigError("malformed endpoint URL '" + base_url + "'");
    const std::string scheme = base_url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https" && scheme != "mock")
        throw ConfigError("unsupported URL scheme '" + scheme + "' in " + base_url);
    if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0)
        throw ConfigError("temperature must be within [0, 2] for " + model_id);
}

double effective_temperature(RoleKind role, const ModelEndpoint& endpoint) {
    return role == RoleKind::generate ? endpoint.temperature : 0.0;
}

LlmGateway::LlmGateway(Transport& transport, RetryPolicy policy, Sleeper sleeper)
    : transport_(transport), policy_(policy), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (policy_.max_attempts < 1) policy_.max_attempts = 1;
}

void LlmGateway::backoff(int attempt) {
    const double scale = std::pow(policy_.factor, attempt - 1);
    sleeper_(std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(policy_.base_delay.count()) * scale)));
}

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::optional<std::string> message_content(const std::string& body) {
    auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded()) return std::nullopt;
    const auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) return std::nullopt;
    const auto& first = (*choices)[0];
    const auto message = first.find("message");
    if (message == first.end() || !message->is_object()) return std::nullopt;
    const auto content = message->find("content");
    if (content == message->end() || !content->is_string()) return std::nullopt;
    return content->get<std::string>();
}

}  // namespace

std::string LlmGateway::chat(const ModelEndpoint& endpoint, const std::vector<ChatMessage>& messages,
                             RoleKind role, std::string task, nlohmann::json context) {
    HttpRequest request;
    request.base_url = endpoint.base_url;
    request.path = "/v1/chat/completions";
    request.api_key = endpoint.api_key;
    nlohmann::json wire_messages = nlohmann::json::array();
    for (const auto& m : messages) wire_messages.push_back({{"role", m.role}, {"content", m.content}});
    request.body = {{"model", endpoint.model_id},
                    {"messages", std::move(wire_messages)},
                    {"temperature", effective_temperature(role, endpoint)},
                    {"stream", false}};
    request.tag = RequestTag{role, std::move(task), std::move(context)};

    ++chat_calls_;
    std::string last_failure;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
        if (attempt > 1) backoff(attempt - 1);
        ++chat_attempts_;
        HttpResponse response;
        try {
            response = transport_.post(request);
        } catch (const TransportError& e) {
            last_failure = e.what();
            spdlog::warn("chat attempt {}/{} ({}) failed: {}", attempt, policy_.max_attempts,
                         request.tag.task, last_failure);
            continue;
        }
        if (response.status < 200 || response.status >= 300) {
            if (!retryable_status(response.status))
                throw TransportError("model endpoint returned HTTP " + std::to_string(response.status),
                                     response.status, response.body);
            last_failure = "HTTP " + std::to_string(response.status) + ": " + response.body;
            spdlog::warn("chat attempt {}/{} ({}) got {}", attempt, policy_.max_attempts,
                         request.tag.task, last_failure);
            continue;
        }
        auto content = message_content(response.body);
        if (content && !content->empty()) {
            if (attempt > 1) spdlog::info("chat ({}) succeeded after {} attempts", request.tag.task, attempt);
            return *content;
        }
        last_failure = "empty or null message content";
        spdlog::warn("chat attempt {}/{} ({}) returned {}", attempt, policy_.max_attempts,
                     request.tag.task, last_failure);
    }
    throw TransportError("chat failed after " + std::to_string(policy_.max_attempts) +
                         " attempts: " + last_failure);
}

std::vector<Vector> LlmGateway::embed(const ModelEndpoint& endpoint,
                                      const std::vector<std::string>& texts) {
    if (texts.empty()) throw ConfigError("embed called with no input texts");
    HttpRequest request;
    request.base_url = endpoint.base_url;
    request.path = "/v1/embeddings";
    request.api_key = endpoint.api_key;
    request.body = {{"model", endpoint.model_id}, {"input", texts}};
    request.tag.task = "embed";

    HttpResponse response;
    std::string last_failure;
    bool ok = false;
    for (int attempt = 1; attempt <= policy_.max_attempts && !ok; ++attempt) {
        if (attempt > 1) backoff(attempt - 1);
        try {
            response = transport_.post(request);
        } catch (const TransportError& e) {
            last_failure = e.what();
            continue;
        }
        if (response.status >= 200 && response.status < 300) {
            ok = true;
        } else if (!retryable_status(response.status)) {
            throw TransportError("embedding endpoint returned HTTP " + std::to_string(response.status),
                                 response.status, response.body);
        } else {
            last_failure = "HTTP " + std::to_string(response.status);
        }
    }
    if (!ok) throw TransportError("embedding failed: " + last_failure);

    auto doc = nlohmann::json::parse(response.body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("data") || !doc["data"].is_array())
        throw TransportError("embedding response is not an embeddings list", response.status,
                             response.body);
    std::vector<Vector> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    std::size_t position = 0;
    for (const auto& item : doc["data"]) {
        const std::size_t index = item.value("index", position);
        ++position;
        if (index >= out.size() || !item.contains("embedding"))
            throw TransportError("embedding response has an out-of-range item", response.status,
                                 response.body);
        out[index] = item["embedding"].get<Vector>();
        filled[index] = true;
    }
    for (std::size_t i = 0; i < filled.size(); ++i)
        if (!filled[i]) throw TransportError("embedding response is missing input " + std::to_string(i));

    for (const auto& v : out) {
        if (v.empty()) throw ConfigError("embedding model returned an empty vector");
        std::size_t expected = 0;
        if (dimension_.compare_exchange_strong(expected, v.size())) continue;
        if (expected != v.size())
            throw ConfigError("embedding dimension changed from " + std::to_string(expected) +
                              " to " + std::to_string(v.size()));
    }
    return out;
}

}  // namespace evolve

#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "evolve/llm/transport.hpp"

namespace evolve {

using Vector = std::vector<float>;

/// One model role: where it lives and how it is called.
struct ModelEndpoint {
    std::string base_url;
    std::string api_key;
    std::string model_id;
    double temperature = 0.0;

    /// Throws ConfigError on a malformed URL or non-finite/out-of-range temperature.
    void validate() const;
};

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

/// Exponential backoff: delay before attempt k (k >= 2) is base * factor^(k-2).
struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
};

/// Classify, teacher, and judge calls always run at temperature 0; only
/// generate honours the configured endpoint temperature.
double effective_temperature(RoleKind role, const ModelEndpoint& endpoint);

/// All chat and embedding traffic.
class LlmGateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit LlmGateway(Transport& transport, RetryPolicy policy = {}, Sleeper sleeper = {});

    /// Returns the assistant message content. Retries transport failures,
    /// 429/5xx statuses, and null/empty content; other non-2xx statuses throw
    /// immediately with the response body attached.
    std::string chat(const ModelEndpoint& endpoint, const std::vector<ChatMessage>& messages,
                     RoleKind role, std::string task = {}, nlohmann::json context = {});

    /// One vector per input. The first successful call fixes the dimension;
    /// any later mismatch throws ConfigError.
    std::vector<Vector> embed(const ModelEndpoint& endpoint, const std::vector<std::string>& texts);

    std::size_t embedding_dimension() const noexcept { return dimension_.load(); }
    std::uint64_t chat_attempts() const noexcept { return chat_attempts_.load(); }
    std::uint64_t chat_calls() const noexcept { return chat_calls_.load(); }

private:
    void backoff(int attempt);

    Transport& transport_;
    RetryPolicy policy_;
    Sleeper sleeper_;
    std::atomic<std::size_t> dimension_{0};
    std::atomic<std::uint64_t> chat_attempts_{0};
    std::atomic<std::uint64_t> chat_calls_{0};
};

}  // namespace evolve

#pragma once

#include <chrono>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace cdr {

/// Failure talking to an embedding or language-model backend.
/// `retryable` distinguishes transport trouble (timeouts, refused
/// connections, 5xx/429) from requests the backend rejected outright.
class ProviderError : public std::runtime_error {
public:
    ProviderError(const std::string& what, bool retryable)
        : std::runtime_error(what), retryable_(retryable) {}

    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff{250};
    std::chrono::milliseconds connect_timeout{5000};
    std::chrono::milliseconds read_timeout{30000};
};

/// "https://api.example.com:8443/v1/embeddings" split into the origin
/// handed to the HTTP client and the request path.
struct Endpoint {
    std::string origin;
    std::string path;

    /// Throws std::invalid_argument for anything but http(s) URLs.
    static Endpoint parse(const std::string& url);
};

/// POSTs a JSON body and returns the parsed JSON response, retrying
/// retryable failures with linear backoff. Throws ProviderError.
nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body, const std::string& api_key,
                         const RetryPolicy& policy);

}  // namespace cdr

#include "cdr/http_client.hpp"

#include <thread>

#include "httplib.h"

namespace cdr {

Endpoint Endpoint::parse(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("URL without scheme: " + url);
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw std::invalid_argument("unsupported URL scheme: " + scheme);
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = url.substr(0, path_start);
    ep.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (ep.origin.size() <= scheme_end + 3) throw std::invalid_argument("URL without host: " + url);
    return ep;
}

nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body, const std::string& api_key,
                         const RetryPolicy& policy) {
    const std::string payload = body.dump();
    std::string last_error;
    const int attempts = std::max(1, policy.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1) std::this_thread::sleep_for(policy.backoff * (attempt - 1));

        httplib::Client client(endpoint.origin);
        client.set_connection_timeout(policy.connect_timeout);
        client.set_read_timeout(policy.read_timeout);
        client.set_write_timeout(policy.read_timeout);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

        auto res = client.Post(endpoint.path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw ProviderError("HTTP " + std::to_string(res->status) + " from " + endpoint.origin + endpoint.path,
                                false);
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error&) {
            throw ProviderError("malformed JSON response from " + endpoint.origin + endpoint.path, false);
        }
    }
    throw ProviderError("transport failure after " + std::to_string(attempts) + " attempt(s) to " + endpoint.origin +
                            endpoint.path + ": " + last_error,
                        true);
}

}  // namespace cdr

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "cdr/http_client.hpp"

namespace cdr {

struct LlmRequest {
    std::string system;
    std::string user;
    double temperature = 0.0;
};

/// Text-completion backend. Implementations must be safe to call from
/// several threads and throw ProviderError on failure.
class LlmProvider {
public:
    virtual ~LlmProvider() = default;

    virtual std::string id() const = 0;
    virtual std::string complete(const LlmRequest& request) = 0;
};

/// Offline provider for tests and demos.
///
/// Canned responses are keyed by (SHA-256 of the note embedded in the
/// prompt, CDR id); baseline prompts use the key "__baseline__". A
/// prompt without a canned response falls back to a keyword matcher
/// that reads the variable list from the prompt and looks for each
/// variable's name (underscores as spaces) in the note:
///   - boolean: "no"/"denies"/"without"/"negative for"/"absent" within
///     three words before the phrase gives `no`, otherwise `yes`;
///   - integer/float: a number right after the phrase ("gcs 14",
///     "gcs of 14") is reported;
///   - anything not found is left out.
/// Baseline prompts without a canned response get "selected: none".
///
/// Fixture file format:
///   {"responses": [{"note": "...", "cdr_id": "...", "response": "..."},
///                  {"note_sha256": "...", "cdr_id": "__baseline__", "response": "..."}]}
class MockLlmProvider final : public LlmProvider {
public:
    static constexpr const char* kBaselineKey = "__baseline__";

    MockLlmProvider() = default;

    /// Throws std::runtime_error for unreadable or malformed fixtures.
    static MockLlmProvider from_fixture_file(const std::filesystem::path& file);

    void add_response(const std::string& note, const std::string& cdr_id, std::string response);
    void add_response_for_digest(const std::string& note_sha256, const std::string& cdr_id, std::string response);

    std::string id() const override { return "mock-llm"; }
    std::string complete(const LlmRequest& request) override;

    std::size_t fixture_size() const { return canned_.size(); }

    /// The keyword matcher on its own, for tests.
    static std::string keyword_fallback(const std::string& prompt);

private:
    std::map<std::pair<std::string, std::string>, std::string> canned_;
};

struct RemoteLlmConfig {
    std::string url;
    std::string model;
    std::string api_key;
    RetryPolicy retry;

    /// Reads CDR_AGENT_LLM_URL, CDR_AGENT_LLM_MODEL and CDR_AGENT_API_KEY.
    /// Throws std::runtime_error if the URL is unset.
    static RemoteLlmConfig from_env();
};

/// Client for chat-completions style endpoints: sends system + user
/// messages with the request temperature and returns
/// choices[0].message.content.
class RemoteLlmProvider final : public LlmProvider {
public:
    explicit RemoteLlmProvider(RemoteLlmConfig config);

    std::string id() const override { return "remote:" + config_.url + "#" + config_.model; }
    std::string complete(const LlmRequest& request) override;

private:
    RemoteLlmConfig config_;
    Endpoint endpoint_;
};

}  // namespace cdr

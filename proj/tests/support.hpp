#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "cdr/embedding.hpp"
#include "cdr/llm.hpp"
#include "cdr/registry.hpp"

namespace cdr::test {

inline std::filesystem::path data_dir() { return CDR_TEST_DATA_DIR; }
inline std::filesystem::path fixtures() { return CDR_TEST_FIXTURES; }

inline std::shared_ptr<const Registry> bundled_registry() {
    return std::make_shared<const Registry>(load_registry(data_dir() / "registry"));
}

/// Bundled rules plus the twelve extension rules used by the fixtures.
inline std::shared_ptr<const Registry> full_registry() {
    const std::vector<std::filesystem::path> dirs{data_dir() / "registry", fixtures() / "registry_ext"};
    return std::make_shared<const Registry>(load_registry(dirs));
}

inline CdrDefinition bundled(const std::string& id) {
    return parse_definition_file(data_dir() / "registry" / (id + ".json"));
}

inline CdrDefinition from_json_text(const std::string& text) {
    return parse_definition(nlohmann::json::parse(text));
}

/// Minimal valid single-variable definition to mutate in tests.
inline nlohmann::json tiny_definition_json(const std::string& id = "tiny") {
    return nlohmann::json::parse(R"({
        "schema_version": 1, "id": ")" + id + R"(", "name": "Tiny", "description": "A tiny rule about fever.",
        "keywords": [], "variables": [{"name": "fever", "type": "boolean", "definition": "Fever present.",
                                       "negative_default": false, "required": true}],
        "exclusions": [], "rule": {"if": {"var": "fever", "op": "eq", "value": true}, "then": "treat", "else": "wait"},
        "outcomes": ["treat", "wait"], "positive_outcomes": ["treat"]})");
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("cdr-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Embedding provider answering from a table; unknown texts map to a
/// fallback function (or throw).
class TableEmbeddingProvider final : public EmbeddingProvider {
public:
    std::map<std::string, std::vector<double>> table;
    std::function<std::vector<double>(const std::string&)> fallback;
    std::atomic<int> calls{0};
    std::atomic<int> texts_embedded{0};
    std::string name = "table";

    std::string id() const override { return name; }
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
        ++calls;
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) {
            ++texts_embedded;
            if (auto it = table.find(t); it != table.end()) out.push_back({it->second});
            else if (fallback) out.push_back({fallback(t)});
            else throw ProviderError("no embedding for text", false);
        }
        return out;
    }
};

/// Always fails like a dead backend.
class FailingEmbeddingProvider final : public EmbeddingProvider {
public:
    std::string id() const override { return "failing"; }
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string>) override {
        throw ProviderError("connection refused", true);
    }
};

/// LLM provider driven by a callback; counts calls.
class ScriptedLlm final : public LlmProvider {
public:
    std::function<std::string(const LlmRequest&)> script;
    std::atomic<int> calls{0};

    std::string id() const override { return "scripted"; }
    std::string complete(const LlmRequest& r) override {
        ++calls;
        return script(r);
    }
};

}  // namespace cdr::test

#include "cdr/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "cdr/digest.hpp"
#include "cdr/prompts.hpp"
#include "cdr/value.hpp"
#include "json.hpp"

namespace cdr {

MockLlmProvider MockLlmProvider::from_fixture_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open LLM fixture " + file.string());
    MockLlmProvider mock;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& entry : doc.at("responses")) {
            const auto cdr_id = entry.at("cdr_id").get<std::string>();
            auto response = entry.at("response").get<std::string>();
            if (entry.contains("note"))
                mock.add_response(entry.at("note").get<std::string>(), cdr_id, std::move(response));
            else
                mock.add_response_for_digest(entry.at("note_sha256").get<std::string>(), cdr_id, std::move(response));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed LLM fixture " + file.string() + ": " + e.what());
    }
    return mock;
}

void MockLlmProvider::add_response(const std::string& note, const std::string& cdr_id, std::string response) {
    add_response_for_digest(sha256_hex(note), cdr_id, std::move(response));
}

void MockLlmProvider::add_response_for_digest(const std::string& note_sha256, const std::string& cdr_id,
                                              std::string response) {
    canned_[{note_sha256, cdr_id}] = std::move(response);
}

std::string MockLlmProvider::complete(const LlmRequest& request) {
    const auto note = prompts::embedded_note(request.user);
    const bool baseline = request.user.find(prompts::kBaselineMarker) != std::string::npos;
    if (note) {
        std::string key = baseline ? kBaselineKey : prompts::embedded_cdr_id(request.user).value_or("");
        auto it = canned_.find({sha256_hex(*note), key});
        if (it != canned_.end()) return it->second;
    }
    if (baseline) return "selected: none";
    return keyword_fallback(request.user);
}

namespace {

struct PromptVariable {
    std::string name;
    std::string type;
};

std::vector<PromptVariable> prompt_variables(const std::string& prompt) {
    static const std::regex line_re(R"(^- ([a-z][a-z0-9_]*) \(([a-z]+)[^)]*\):)");
    std::vector<PromptVariable> out;
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        if (line == prompts::kNoteBegin) break;
        std::smatch m;
        if (std::regex_search(line, m, line_re)) out.push_back({m[1].str(), m[2].str()});
    }
    return out;
}

bool negated_before(const std::string& text, std::size_t pos) {
    // Look at the three words preceding `pos`.
    std::vector<std::string> words;
    std::size_t end = pos;
    bool boundary = false;
    while (!boundary && words.size() < 3 && end > 0) {
        std::size_t e = end;
        while (e > 0 && !std::isalnum(static_cast<unsigned char>(text[e - 1]))) {
            // Sentence boundaries stop the look-back.
            if (text[e - 1] == '.' || text[e - 1] == ';' || text[e - 1] == '\n') {
                boundary = true;
                break;
            }
            --e;
        }
        if (boundary) break;
        std::size_t b = e;
        while (b > 0 && std::isalnum(static_cast<unsigned char>(text[b - 1]))) --b;
        if (b == e) break;
        words.push_back(text.substr(b, e - b));
        end = b;
    }
    for (const auto& w : words)
        if (w == "no" || w == "denies" || w == "without" || w == "negative" || w == "absent" || w == "not")
            return true;
    return false;
}

}  // namespace

std::string MockLlmProvider::keyword_fallback(const std::string& prompt) {
    const auto note = prompts::embedded_note(prompt);
    if (!note) return "";
    const std::string text = to_lower(*note);
    std::string out;
    for (const auto& var : prompt_variables(prompt)) {
        std::string phrase = var.name;
        for (char& c : phrase)
            if (c == '_') c = ' ';
        if (var.type == "boolean") {
            const auto pos = text.find(phrase);
            if (pos == std::string::npos) continue;
            out += var.name + (negated_before(text, pos) ? ": no\n" : ": yes\n");
        } else if (var.type == "integer" || var.type == "float") {
            const std::regex num_re("\\b" + phrase + R"(\s*(?:of|is|was|=|:)?\s*(-?\d+(?:\.\d+)?))");
            std::smatch m;
            if (std::regex_search(text, m, num_re)) out += var.name + ": " + m[1].str() + "\n";
        }
    }
    return out;
}

RemoteLlmConfig RemoteLlmConfig::from_env() {
    auto env = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v ? v : "";
    };
    RemoteLlmConfig c;
    c.url = env("CDR_AGENT_LLM_URL");
    c.model = env("CDR_AGENT_LLM_MODEL");
    c.api_key = env("CDR_AGENT_API_KEY");
    if (c.url.empty()) throw std::runtime_error("CDR_AGENT_LLM_URL is not set");
    if (c.model.empty()) c.model = "gpt-4o";
    return c;
}

RemoteLlmProvider::RemoteLlmProvider(RemoteLlmConfig config)
    : config_(std::move(config)), endpoint_(Endpoint::parse(config_.url)) {}

std::string RemoteLlmProvider::complete(const LlmRequest& request) {
    nlohmann::json body = {{"model", config_.model},
                           {"temperature", request.temperature},
                           {"messages",
                            {{{"role", "system"}, {"content", request.system}},
                             {{"role", "user"}, {"content", request.user}}}}};
    const auto res = post_json(endpoint_, body, config_.api_key, config_.retry);
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed completion response: ") + e.what(), false);
    }
}

}  // namespace cdr

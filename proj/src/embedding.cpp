#include "cdr/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <sstream>

#include "cdr/digest.hpp"
#include "cdr/value.hpp"

namespace cdr {

namespace {

void check_vectors(const std::vector<EmbeddingVector>& out, std::size_t expected, const std::string& provider) {
    if (out.size() != expected)
        throw ProviderError(provider + " returned " + std::to_string(out.size()) + " embeddings for " +
                                std::to_string(expected) + " texts",
                            false);
    for (const auto& v : out) {
        if (v.dim() == 0 || v.dim() != out.front().dim())
            throw ProviderError(provider + " returned embeddings of inconsistent dimension", false);
        if (!std::all_of(v.values.begin(), v.values.end(), [](double x) { return std::isfinite(x); }))
            throw ProviderError(provider + " returned a non-finite embedding component", false);
    }
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::vector<EmbeddingVector> embed_all(std::span<const std::string> texts, EmbeddingProvider& provider) {
    for (const auto& t : texts)
        if (trim(t).empty()) throw std::invalid_argument("cannot embed empty text");
    if (texts.empty()) return {};
    auto out = provider.embed_batch(texts);
    check_vectors(out, texts.size(), provider.id());
    return out;
}

EmbeddingVector embed(std::string_view text, EmbeddingProvider& provider) {
    const std::string s(text);
    return std::move(embed_all(std::span<const std::string>(&s, 1), provider).front());
}

EmbeddingVector MockEmbeddingProvider::embed_text(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        cleaned += static_cast<char>(std::tolower(c));
    }
    EmbeddingVector v;
    v.values.assign(kDim, 0.0);
    std::istringstream in(cleaned);
    std::string token;
    bool any = false;
    while (in >> token) {
        v.values[fnv1a(token) % kDim] += 1.0;
        any = true;
    }
    // Punctuation-only text still gets a deterministic direction.
    if (!any) v.values[fnv1a(trim(text)) % kDim] = 1.0;

    double norm = 0;
    for (double x : v.values) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v.values) x /= norm;
    return v;
}

std::vector<EmbeddingVector> MockEmbeddingProvider::embed_batch(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
}

RemoteEmbeddingConfig RemoteEmbeddingConfig::from_env() {
    auto env = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v ? v : "";
    };
    RemoteEmbeddingConfig c;
    c.url = env("CDR_AGENT_EMBED_URL");
    c.model = env("CDR_AGENT_EMBED_MODEL");
    c.api_key = env("CDR_AGENT_API_KEY");
    if (c.url.empty()) throw std::runtime_error("CDR_AGENT_EMBED_URL is not set");
    if (c.model.empty()) c.model = "text-embedding-ada-002";
    return c;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config)
    : config_(std::move(config)), endpoint_(Endpoint::parse(config_.url)) {}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_batch(std::span<const std::string> texts) {
    nlohmann::json body = {{"input", std::vector<std::string>(texts.begin(), texts.end())},
                           {"model", config_.model}};
    const nlohmann::json res = post_json(endpoint_, body, config_.api_key, config_.retry);

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    try {
        const auto& data = res.at("data");
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& item = data[i];
            const std::size_t index = item.contains("index") ? item.at("index").get<std::size_t>() : i;
            if (index >= texts.size() || filled[index])
                throw ProviderError("embedding response has a bad index " + std::to_string(index), false);
            out[index].values = item.at("embedding").get<std::vector<double>>();
            filled[index] = true;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed embedding response: ") + e.what(), false);
    }
    if (!std::all_of(filled.begin(), filled.end(), [](bool b) { return b; }))
        throw ProviderError("embedding response is missing entries", false);
    return out;
}

std::vector<EmbeddingVector> EmbeddingCache::get(std::span<const std::string> texts, EmbeddingProvider& provider) {
    const std::string prefix = provider.id() + '\0';
    std::vector<std::string> keys;
    keys.reserve(texts.size());
    for (const auto& t : texts) keys.push_back(prefix + sha256_hex(t));

    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> todo;
    {
        std::shared_lock lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto it = entries_.find(keys[i]);
            if (it != entries_.end())
                out[i] = it->second;
            else
                todo.push_back(i);
        }
    }
    if (todo.empty()) return out;

    std::vector<std::string> pending;
    for (auto i : todo) pending.push_back(texts[i]);
    auto fresh = embed_all(pending, provider);

    std::unique_lock lock(mutex_);
    for (std::size_t k = 0; k < todo.size(); ++k) {
        // Another thread may have inserted the same key; keep the first.
        entries_.try_emplace(keys[todo[k]], fresh[k]);
        out[todo[k]] = std::move(fresh[k]);
    }
    return out;
}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

void EmbeddingCache::clear() {
    std::unique_lock lock(mutex_);
    entries_.clear();
}

}  // namespace cdr

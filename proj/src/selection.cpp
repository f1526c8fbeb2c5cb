#include "cdr/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "cdr/value.hpp"

namespace cdr {

void SelectionConfig::validate() const {
    if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must be in (0, 1)");
    if (num_truncations < 1) throw std::invalid_argument("num_truncations must be >= 1");
    if (!(retention_ratio > 0 && retention_ratio <= 1)) throw std::invalid_argument("retention_ratio must be in (0, 1]");
    if (!(sigma_floor > 0) || !std::isfinite(sigma_floor)) throw std::invalid_argument("sigma_floor must be positive");
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0 || nb == 0) throw std::invalid_argument("cosine similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<std::string> split_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) out.push_back(std::move(tok));
    return out;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_index bound must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

std::string truncate_note(std::string_view note, double retention_ratio, std::mt19937_64& rng) {
    if (!(retention_ratio > 0 && retention_ratio <= 1)) throw std::invalid_argument("retention_ratio must be in (0, 1]");
    if (trim(note).empty()) throw std::invalid_argument("cannot truncate an empty note");
    if (retention_ratio == 1.0) return std::string(note);

    const auto tokens = split_tokens(note);
    const std::size_t n = tokens.size();
    // The epsilon keeps e.g. 0.7 * 10 from rounding up to 8.
    auto keep = static_cast<std::size_t>(std::ceil(retention_ratio * static_cast<double>(n) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, n);
    const std::size_t start = uniform_index(rng, n - keep + 1);

    std::string out;
    for (std::size_t i = start; i < start + keep; ++i) {
        if (i > start) out += ' ';
        out += tokens[i];
    }
    return out;
}

GaussianFit fit_gaussian(std::span<const double> scores, double sigma_floor) {
    if (scores.size() < 2) throw std::invalid_argument("fit_gaussian needs at least two scores");
    const double n = static_cast<double>(scores.size());
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
    double ss = 0;
    for (double s : scores) ss += (s - mean) * (s - mean);
    return {mean, std::max(std::sqrt(ss / (n - 1)), sigma_floor)};
}

double upper_tail_probability(double z) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::cdf(boost::math::complement(standard, z));
}

double normal_quantile(double p) {
    if (!(p > 0 && p < 1)) throw std::invalid_argument("normal_quantile needs p in (0, 1)");
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

SimilarityProfile select_from_scores(const std::map<std::string, std::vector<double>>& scores,
                                     const SelectionConfig& config) {
    config.validate();
    if (scores.empty()) throw std::invalid_argument("no CDR scores to select from");

    std::vector<double> pooled;
    for (const auto& [id, s] : scores) {
        if (s.empty()) throw std::invalid_argument("CDR '" + id + "' has no scores");
        pooled.insert(pooled.end(), s.begin(), s.end());
    }
    const GaussianFit fit = fit_gaussian(pooled, config.sigma_floor);

    SimilarityProfile profile;
    profile.mu_hat = fit.mu;
    profile.sigma_hat = fit.sigma;
    profile.alpha = config.alpha;
    for (const auto& [id, s] : scores) {
        CdrScore cs;
        cs.scores = s;
        cs.statistic = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
        cs.zscore = (cs.statistic - fit.mu) / fit.sigma;
        cs.p_value = upper_tail_probability(cs.zscore);
        if (cs.p_value < config.alpha) profile.selected.push_back(id);
        profile.per_cdr.emplace(id, std::move(cs));
    }
    std::sort(profile.selected.begin(), profile.selected.end(), [&](const std::string& a, const std::string& b) {
        const double sa = profile.per_cdr.at(a).statistic;
        const double sb = profile.per_cdr.at(b).statistic;
        if (sa != sb) return sa > sb;
        return a < b;
    });
    return profile;
}

std::vector<std::string> note_variants(std::string_view note, const SelectionConfig& config) {
    config.validate();
    if (trim(note).empty()) throw std::invalid_argument("note is empty");
    std::mt19937_64 rng(config.rng_seed);
    std::vector<std::string> variants;
    variants.reserve(static_cast<std::size_t>(config.num_truncations));
    variants.emplace_back(note);
    for (int i = 1; i < config.num_truncations; ++i) variants.push_back(truncate_note(note, config.retention_ratio, rng));
    return variants;
}

SimilarityProfile select_cdrs(std::string_view note, const Registry& registry, const SelectionConfig& config,
                              EmbeddingProvider& provider, EmbeddingCache* cache) {
    if (registry.empty()) throw std::invalid_argument("registry is empty");
    const auto variants = note_variants(note, config);

    std::vector<std::string> cdr_texts;
    cdr_texts.reserve(registry.size());
    for (const auto& def : registry.definitions()) cdr_texts.push_back(selection_text(def, config.include_keywords));

    const auto note_vecs = embed_all(variants, provider);
    const auto cdr_vecs = cache ? cache->get(cdr_texts, provider) : embed_all(cdr_texts, provider);
    if (note_vecs.front().dim() != cdr_vecs.front().dim())
        throw ProviderError("note and CDR embeddings differ in dimension", false);

    std::map<std::string, std::vector<double>> scores;
    for (std::size_t c = 0; c < registry.size(); ++c) {
        auto& row = scores[registry.definitions()[c].id];
        row.reserve(note_vecs.size());
        for (const auto& nv : note_vecs) row.push_back(cosine_similarity(nv, cdr_vecs[c]));
    }
    return select_from_scores(scores, config);
}

std::vector<QQPoint> qq_points(std::span<const double> scores, std::optional<GaussianFit> fit) {
    if (scores.size() < 3) throw std::invalid_argument("qq_points needs at least three scores");
    const GaussianFit f = fit ? *fit : fit_gaussian(scores, kDefaultSigmaFloor);
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    std::vector<QQPoint> out;
    out.reserve(sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k)
        out.push_back({normal_quantile((static_cast<double>(k) + 0.5) / n), (sorted[k] - f.mu) / f.sigma});
    return out;
}

}  // namespace cdr

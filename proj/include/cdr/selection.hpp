#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdr/embedding.hpp"
#include "cdr/registry.hpp"

namespace cdr {

inline constexpr double kDefaultSigmaFloor = 1e-9;

struct SelectionConfig {
    double alpha = 0.05;
    int num_truncations = 10;
    double retention_ratio = 0.7;
    std::uint64_t rng_seed = 0;
    bool include_keywords = false;
    double sigma_floor = kDefaultSigmaFloor;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;

    friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

struct CdrScore {
    /// One cosine score per note variant (variant 0 is the full note).
    std::vector<double> scores;
    /// Mean of `scores`.
    double statistic = 0;
    double zscore = 0;
    /// Upper-tail probability of `zscore` under the standard normal.
    double p_value = 1;

    friend bool operator==(const CdrScore&, const CdrScore&) = default;
};

struct SimilarityProfile {
    std::map<std::string, CdrScore> per_cdr;
    double mu_hat = 0;
    double sigma_hat = 0;
    double alpha = 0.05;
    /// CDRs with p_value < alpha, by descending statistic then ascending id.
    /// Empty means no applicable CDR.
    std::vector<std::string> selected;

    friend bool operator==(const SimilarityProfile&, const SimilarityProfile&) = default;
};

struct GaussianFit {
    double mu = 0;
    double sigma = 0;
};

/// Throws std::invalid_argument on dimension mismatch or a zero vector.
/// The result is clamped to [-1, 1].
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

std::vector<std::string> split_tokens(std::string_view text);

/// Uniform integer in [0, bound) from the raw generator output by
/// rejection sampling, so results match across standard libraries.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound);

/// Keeps a random contiguous window of ceil(retention_ratio * n) of the
/// note's n whitespace tokens, re-joined by single spaces. A ratio of
/// 1.0 returns the note unchanged.
std::string truncate_note(std::string_view note, double retention_ratio, std::mt19937_64& rng);

/// Sample mean and (n-1)-normalized standard deviation, floored at
/// `sigma_floor`. Requires at least two scores.
GaussianFit fit_gaussian(std::span<const double> scores, double sigma_floor);

/// Q(z) = P(Z >= z) for a standard normal Z.
double upper_tail_probability(double z);
/// Inverse of the standard normal CDF, p in (0, 1).
double normal_quantile(double p);

/// Anomaly test on precomputed scores: pools every score to fit the
/// Gaussian, then flags CDRs whose mean score has Q(z) < alpha.
SimilarityProfile select_from_scores(const std::map<std::string, std::vector<double>>& scores,
                                     const SelectionConfig& config);

/// Full selection: builds the note variants, embeds them and every
/// CDR's selection text (through `cache` when given), scores all pairs
/// and runs select_from_scores().
SimilarityProfile select_cdrs(std::string_view note, const Registry& registry, const SelectionConfig& config,
                              EmbeddingProvider& provider, EmbeddingCache* cache = nullptr);

/// Note variants used by select_cdrs(); exposed for diagnostics.
std::vector<std::string> note_variants(std::string_view note, const SelectionConfig& config);

struct QQPoint {
    double theoretical = 0;
    double sample = 0;
};

/// Normal Q-Q plot data: sorted scores standardized by `fit` (fitted
/// from the scores when absent) against standard-normal quantiles at
/// plotting positions (k - 0.5) / n. Requires at least three scores.
std::vector<QQPoint> qq_points(std::span<const double> scores, std::optional<GaussianFit> fit = std::nullopt);

}  // namespace cdr

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cdr/pipeline.hpp"
#include "json.hpp"

namespace cdr {

/// Candidate standing for "no applicable CDR" in F1 scoring.
inline constexpr const char* kNoCdr = "NO_CDR";

using CdrSet = std::set<std::string>;

/// One evaluation note. Each label set is one annotator's answer; an
/// empty set means "no applicable CDR". outcome_labels maps a CDR id to
/// true when the patient was positive for that CDR's target.
struct LabeledNote {
    std::string note_id;
    std::string note;
    NoteMeta note_meta;
    std::vector<CdrSet> label_sets;
    std::map<std::string, bool> outcome_labels;

    friend bool operator==(const LabeledNote&, const LabeledNote&) = default;
};

// Dataset lines look like
//   {"note_id": "n1", "note": "...", "note_meta": {"patient_age_years": 7},
//    "label_sets": [["pecarn_tbi"], []], "outcome_labels": {"pecarn_tbi": "positive"}}
// note_meta and outcome_labels are optional.
nlohmann::json to_json(const LabeledNote& n);
LabeledNote labeled_note_from_json(const nlohmann::json& j);
std::vector<LabeledNote> load_dataset(const std::filesystem::path& file);
void save_dataset(const std::filesystem::path& file, std::span<const LabeledNote> notes);

/// Throws std::invalid_argument for empty label_sets, duplicate note
/// ids or CDR ids not in `registry`.
void validate_dataset(std::span<const LabeledNote> notes, const Registry& registry);

/// What a system answered for one note.
struct Prediction {
    std::string note_id;
    CdrSet selected;
    /// Executed outcome polarity per CDR that produced an outcome.
    std::map<std::string, bool> outcome_positive;
    /// The note could not be processed; scored as a miss.
    bool failed = false;
};

/// Fraction of notes whose predicted set equals some annotator's set.
/// Predictions and labels must be aligned by note id (std::invalid_argument
/// otherwise, and for an empty dataset).
double ea_accuracy(std::span<const Prediction> predictions, std::span<const LabeledNote> labels);

struct F1Counts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    double f1() const;
};

/// Micro-averaged F1 over the candidates registry ids + NO_CDR. NO_CDR is
/// asserted exactly when a set is empty. Each note is scored against the
/// annotator set giving it the highest per-note F1 (the first on ties).
/// A failed note asserts nothing.
F1Counts f1_counts(std::span<const Prediction> predictions, std::span<const LabeledNote> labels);
double f1_score(std::span<const Prediction> predictions, std::span<const LabeledNote> labels);

struct SensSpec {
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::size_t tp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    /// Correctly selected pairs with a ground-truth label but no executed
    /// outcome (excluded or failed); not scored.
    std::size_t not_executed = 0;
};

/// Outcome accuracy over (note, CDR) pairs where the CDR was correctly
/// selected (predicted and in some annotator's set) and outcome_labels
/// has an entry for it.
SensSpec sensitivity_specificity(std::span<const Prediction> predictions, std::span<const LabeledNote> labels);

enum class EvalMode { Agent, Baseline };

std::string_view to_string(EvalMode m);
std::optional<EvalMode> parse_eval_mode(std::string_view s);

struct NoteDiagnostics {
    std::string note_id;
    std::vector<std::string> selected;
    /// cdr id -> executed outcome label, or "excluded" / "error: ..."
    std::map<std::string, std::string> outcomes;
    bool ea_correct = false;
    std::optional<std::string> error;
    std::vector<std::string> warnings;
    double t_sel = 0;
    double t_exe = 0;
    double t_tot = 0;
};

struct EvalReport {
    EvalMode mode = EvalMode::Agent;
    std::size_t notes = 0;
    std::size_t failed = 0;
    std::string registry_digest;
    double ea_accuracy = 0;
    double f1 = 0;
    F1Counts f1_counts;
    SensSpec outcome;
    /// Means over notes that did not fail. The baseline makes one call per
    /// note, so it only has t_tot.
    std::optional<double> t_sel;
    std::optional<double> t_exe;
    std::optional<double> t_tot;
    std::vector<NoteDiagnostics> per_note;
};

nlohmann::json to_json(const EvalReport& r);
/// Report without timings, for golden comparisons.
nlohmann::json strip_timings(const nlohmann::json& report);

struct EvalOptions {
    EvalMode mode = EvalMode::Agent;
    PipelineConfig pipeline;
    /// Notes evaluated concurrently.
    int parallelism = 1;
};

/// Builds the single all-CDR prompt used by the baseline.
std::string baseline_prompt(std::string_view note, const Registry& registry);

struct BaselineAnswer {
    CdrSet selected;
    std::map<std::string, std::string> outcomes;  // cdr id -> canonical label
    std::vector<std::string> warnings;
};

/// Lenient reader for the `selected: a, b` / `outcome a: label` block.
/// Ids are matched case-insensitively against the registry; unknown ids
/// and labels are dropped with a warning. Returns nullopt when there is
/// no `selected:` line at all.
std::optional<BaselineAnswer> parse_baseline_answer(std::string_view answer, const Registry& registry);

EvalReport run_eval(std::span<const LabeledNote> dataset, std::shared_ptr<const Registry> registry,
                    std::shared_ptr<EmbeddingProvider> embedder, std::shared_ptr<LlmProvider> llm,
                    const EvalOptions& options);

// ---- synthetic notes ------------------------------------------------------

/// Feature table. Reserved columns: cdr_id and outcome (required),
/// age_years and sex (optional). Every other column is a feature.
struct FeatureTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

/// RFC 4180-style CSV with a header row. Throws std::runtime_error.
FeatureTable read_csv(const std::filesystem::path& file);
FeatureTable parse_csv(std::string_view text);

/// feature -> (value -> sentence)
using SentenceTemplates = std::map<std::string, std::map<std::string, std::string>>;

SentenceTemplates load_templates(const std::filesystem::path& file);

struct SyntheticOptions {
    std::size_t n = 0;
    double positive_fraction = 0.2;
    std::uint64_t seed = 0;
    /// When set, every note is rewritten by this provider.
    LlmProvider* paraphrase = nullptr;
};

/// One rendered note: the demographic preamble followed by one sentence
/// per feature column, in column order.
std::string render_note(const FeatureTable& table, std::size_t row, const SentenceTemplates& templates);

/// Samples round(n * positive_fraction) positive rows and the rest
/// negative, without replacement, and renders them in shuffled order.
/// Throws std::invalid_argument for an empty table, a missing template,
/// a bad outcome value or too few rows of either class.
std::vector<LabeledNote> gen_synthetic(const FeatureTable& table, const SentenceTemplates& templates,
                                       const SyntheticOptions& options);

}  // namespace cdr

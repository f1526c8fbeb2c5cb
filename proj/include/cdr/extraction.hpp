#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include "cdr/llm.hpp"
#include "cdr/registry.hpp"
#include "cdr/variables.hpp"

namespace cdr {

struct ExtractionPrompt {
    std::string cdr_id;
    std::string system_text;
    std::string rendered_text;
};

/// Renders the versioned extraction template: one
/// `- name (type): definition` line per variable, the output-format
/// instructions and the note verbatim between fixed delimiters.
ExtractionPrompt build_prompt(std::string_view note, const CdrDefinition& def);

/// Parses `name: value` lines. Total: never throws. Unknown names and
/// uncoercible values are reported in `warnings`; the last occurrence
/// of a repeated name wins; every variable not set ends up in `missing`.
ExtractedVariables parse_extraction(std::string_view raw, const CdrDefinition& def);

/// Fills every missing variable with its negative default
/// (provenance imputed). Existing values are left untouched.
ExtractedVariables impute_negative(ExtractedVariables ev, const CdrDefinition& def);

/// ORs the CDR's exclusion predicates over the extracted values and the
/// note metadata. Predicates that depend on a missing value do not fire.
ExclusionVerdict apply_exclusions(const ExtractedVariables& ev, const NoteMeta& meta, const CdrDefinition& def);

struct ExtractionOptions {
    /// Total provider calls per CDR, including the first.
    int max_attempts = 2;
    std::chrono::milliseconds backoff{100};
};

struct ExtractionResult {
    ExtractedVariables variables;
    /// Set when the provider failed; `variables` then lists everything
    /// as missing.
    std::optional<std::string> error;
    double seconds = 0;
    int attempts = 0;
};

/// build_prompt -> provider -> parse_extraction, timed. Provider
/// failures are returned in `error` rather than thrown.
ExtractionResult extract(std::string_view note, const CdrDefinition& def, LlmProvider& provider,
                         const ExtractionOptions& options = {});

}  // namespace cdr

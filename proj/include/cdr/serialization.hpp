#pragma once

#include "cdr/pipeline.hpp"
#include "json.hpp"

namespace cdr {

// JSON forms used by the HTTP API, the CLI and the session journal.
// Every *_from_json is the exact inverse of the matching to_json and
// throws std::invalid_argument (or nlohmann::json::exception) on bad input.

nlohmann::json to_json(const SelectionConfig& c);
SelectionConfig selection_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SimilarityProfile& p);
SimilarityProfile profile_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExtractedVariables& ev);
ExtractedVariables extracted_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExclusionVerdict& v);
ExclusionVerdict verdict_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Outcome& o);
nlohmann::json to_json(const CdrResult& r);
nlohmann::json to_json(const ExecutionReport& r);
ExecutionReport report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AnalysisSession& s);
AnalysisSession session_from_json(const nlohmann::json& j);

/// Copy of `j` without run-dependent fields (session ids, timings,
/// durations), for replay comparisons.
nlohmann::json strip_volatile(const nlohmann::json& j);

}  // namespace cdr

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cdr::prompts {

/// Bumped whenever any template file under data/prompts changes.
inline constexpr std::string_view kTemplateVersion = "v1";

inline constexpr std::string_view kNoteBegin = "<<<CLINICAL NOTE>>>";
inline constexpr std::string_view kNoteEnd = "<<<END CLINICAL NOTE>>>";
inline constexpr std::string_view kCdrIdPrefix = "CDR id: ";
inline constexpr std::string_view kBaselineMarker = "Task: baseline";

std::string_view extraction_template();
std::string_view baseline_template();
std::string_view system_text();

/// Substitutes `{{key}}` placeholders in order; each placeholder is
/// replaced once, and substituted text is never re-scanned.
std::string render(std::string_view tpl, const std::vector<std::pair<std::string, std::string>>& vars);

/// Recovers the note placed between kNoteBegin and kNoteEnd.
std::optional<std::string> embedded_note(std::string_view prompt);
/// Recovers the CDR id from the "CDR id: " line of an extraction prompt.
std::optional<std::string> embedded_cdr_id(std::string_view prompt);

}  // namespace cdr::prompts

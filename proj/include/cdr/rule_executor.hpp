#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cdr/registry.hpp"
#include "cdr/variables.hpp"

namespace cdr {

/// Complete variable assignment handed to the interpreter.
using Assignment = std::map<std::string, Value, std::less<>>;

struct Outcome {
    std::string cdr_id;
    std::string label;
    bool is_positive = false;

    friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Raised when a rule cannot be evaluated; `node_path` points at the
/// failing node using the same "$.rule.then.if.any[2]" paths as
/// validation.
class ExecutionError : public std::runtime_error {
public:
    ExecutionError(std::string node_path, const std::string& what)
        : std::runtime_error(node_path + ": " + what), node_path_(std::move(node_path)) {}

    const std::string& node_path() const { return node_path_; }

private:
    std::string node_path_;
};

/// Compares two literals. Numbers compare numerically, booleans and
/// strings by equality only (`in` is handled by the caller). Returns
/// nullopt when the operands cannot be compared with `op`.
std::optional<bool> compare_values(const Value& lhs, CompareOp op, const Value& rhs);

bool evaluate_predicate(const Predicate& p, const Assignment& values, const std::string& path = "$");

enum class Truth { False, True, Unknown };

/// Kleene three-valued evaluation; a field the lookup cannot supply
/// (or a comparison that does not type-check) is Unknown.
Truth evaluate_partial(const Predicate& p,
                       const std::function<std::optional<Value>(std::string_view)>& lookup);

/// Walks the decision tree. Throws ExecutionError on an incomplete
/// assignment or a type mismatch at a comparison.
Outcome execute_rule(const CdrDefinition& def, const Assignment& values);

Assignment assignment_of(const ExtractedVariables& ev);

enum class ResultKind { Outcome, Excluded, Error, Pending };

std::string_view to_string(ResultKind k);
std::optional<ResultKind> parse_result_kind(std::string_view s);

/// Per-CDR entry of an execution report.
struct CdrResult {
    std::string cdr_id;
    ResultKind kind = ResultKind::Error;
    std::optional<Outcome> outcome;
    std::vector<std::string> reasons;   // Excluded
    std::string error;                  // Error
    std::string error_path;             // Error, when tied to a rule node
    std::vector<std::string> pending;   // Pending

    friend bool operator==(const CdrResult&, const CdrResult&) = default;
};

/// Ordered as the CDRs were selected. An empty report means no rule
/// applied to the note.
struct ExecutionReport {
    std::vector<CdrResult> per_cdr;
    std::map<std::string, double> durations;

    const CdrResult* find(std::string_view cdr_id) const;

    friend bool operator==(const ExecutionReport&, const ExecutionReport&) = default;
};

struct ExecutionItem {
    const CdrDefinition* def = nullptr;
    ExtractedVariables variables;
    ExclusionVerdict verdict;
    /// Set when extraction itself failed upstream.
    std::optional<std::string> extraction_error;
};

/// Executes one item; failures become Error results, never exceptions.
CdrResult execute_item(const ExecutionItem& item);

ExecutionReport execute_all(const std::vector<ExecutionItem>& items);

struct MonotonicityResult {
    bool monotone = true;
    std::size_t assignments_checked = 0;
    /// Human-readable description of the first violating flip.
    std::string counterexample;
};

/// Checks that turning any boolean variable from false to true never
/// turns a positive outcome into a non-positive one. Enumerates all
/// boolean combinations (up to 20 booleans) with non-boolean variables
/// held at their negative defaults.
MonotonicityResult check_boolean_monotonicity(const CdrDefinition& def);

}  // namespace cdr

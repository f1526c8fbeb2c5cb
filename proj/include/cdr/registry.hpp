#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdr/value.hpp"
#include "json.hpp"

namespace cdr {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kMaxRuleDepth = 64;

struct VariableSpec {
    std::string name;
    VarType type;
    std::string definition;
    Value negative_default = false;
    bool required = true;

    friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

enum class PredicateKind { Compare, All, Any, Not };
enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge, In };

std::string_view to_string(CompareOp op);
std::optional<CompareOp> parse_compare_op(std::string_view s);

/// Boolean condition over variables. Compare nodes use `var`, `op` and
/// either `value` or (for `in`) `set`; All/Any/Not use `children`
/// (Not has exactly one child).
struct Predicate {
    PredicateKind kind = PredicateKind::Compare;
    std::string var;
    CompareOp op = CompareOp::Eq;
    Value value = false;
    std::vector<Value> set;
    std::vector<Predicate> children;

    friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Decision tree node: a leaf carries an outcome label, an inner node
/// carries a condition and exactly two branches (then, else).
struct RuleNode {
    std::string outcome;
    Predicate condition;
    std::vector<RuleNode> branches;

    bool is_leaf() const { return branches.empty(); }

    static RuleNode leaf(std::string label);
    static RuleNode branch(Predicate cond, RuleNode then_node, RuleNode else_node);

    friend bool operator==(const RuleNode&, const RuleNode&) = default;
};

struct ExclusionRule {
    Predicate when;
    std::string reason;

    friend bool operator==(const ExclusionRule&, const ExclusionRule&) = default;
};

struct CdrDefinition {
    int schema_version = kSchemaVersion;
    std::string id;
    std::string name;
    std::string description;
    std::vector<std::string> keywords;
    std::vector<VariableSpec> variables;
    std::vector<ExclusionRule> exclusions;
    RuleNode rule;
    std::vector<std::string> outcomes;
    std::vector<std::string> positive_outcomes;

    const VariableSpec* find_variable(std::string_view name) const;
    bool is_positive(std::string_view outcome) const;

    friend bool operator==(const CdrDefinition&, const CdrDefinition&) = default;
};

/// Patient metadata that exclusion predicates may reference directly.
struct NoteMeta {
    std::optional<double> patient_age_years;
    std::optional<std::string> patient_sex;

    friend bool operator==(const NoteMeta&, const NoteMeta&) = default;
};

/// Metadata fields usable in exclusions: patient_age_years (float) and
/// patient_sex (enum{female,male,other}).
const VarType* metadata_field_type(std::string_view name);
std::optional<Value> metadata_value(const NoteMeta& meta, std::string_view name);

nlohmann::json to_json(const NoteMeta& meta);
/// Throws std::invalid_argument on unknown fields or bad types.
NoteMeta note_meta_from_json(const nlohmann::json& j);

struct Violation {
    std::string code;
    std::string path;
    std::string message;
};

/// Thrown for unreadable, malformed or invalid definition files.
class RegistryError : public std::runtime_error {
public:
    RegistryError(std::string file, std::size_t line, std::string field, const std::string& what);

    const std::string& file() const { return file_; }
    /// 1-based; 0 when the error is not tied to a source line.
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::string file_;
    std::size_t line_;
    std::string field_;
};

/// Structural parse of one definition document. Throws RegistryError
/// naming the offending field; semantic checks are left to
/// validate_definition().
CdrDefinition parse_definition(const nlohmann::json& doc, const std::string& source = "<memory>");
CdrDefinition parse_definition_file(const std::filesystem::path& file);

nlohmann::json serialize_definition(const CdrDefinition& def);
nlohmann::json serialize_predicate(const Predicate& p);
nlohmann::json serialize_rule(const RuleNode& node);

/// Checks every definition invariant. Violation codes:
/// INVALID_ID, EMPTY_NAME, EMPTY_DESCRIPTION, NO_VARIABLES, INVALID_VARIABLE_NAME,
/// DUPLICATE_VARIABLE, ENUM_TOO_FEW_VALUES, BAD_DEFAULT, EMPTY_OUTCOMES,
/// DUPLICATE_OUTCOME, POSITIVE_NOT_IN_OUTCOMES, UNKNOWN_OUTCOME,
/// UNKNOWN_VARIABLE, TYPE_MISMATCH, BAD_PREDICATE, DEPTH_EXCEEDED,
/// UNSUPPORTED_SCHEMA.
std::vector<Violation> validate_definition(const CdrDefinition& def);

/// Non-fatal checks. Currently reports DEAD_VARIABLE for variables that
/// neither the rule nor any exclusion references.
std::vector<Violation> lint_definition(const CdrDefinition& def);

std::size_t rule_depth(const RuleNode& node);

/// Text embedded for similarity-based selection. With keywords enabled
/// (and present) a final line "Keywords to consider often include: a, b"
/// is appended.
std::string selection_text(const CdrDefinition& def, bool include_keywords);

/// Immutable, id-ordered set of validated definitions.
class Registry {
public:
    /// Validates and sorts; throws RegistryError on the first invalid
    /// definition or a duplicate id.
    static Registry from_definitions(std::vector<CdrDefinition> defs);

    const std::vector<CdrDefinition>& definitions() const { return defs_; }
    const CdrDefinition* find(std::string_view id) const;
    std::size_t size() const { return defs_.size(); }
    bool empty() const { return defs_.empty(); }
    const std::string& source_digest() const { return digest_; }

private:
    Registry(std::vector<CdrDefinition> defs, std::string digest);
    // (definition, source) pairs; sorts, rejects duplicate ids, digests.
    static Registry build(std::vector<std::pair<CdrDefinition, std::string>> loaded);

    friend Registry load_registry(std::span<const std::filesystem::path> dirs);

    std::vector<CdrDefinition> defs_;
    std::string digest_;
};

/// Loads every `*.json` file in `dir` (non-recursive).
Registry load_registry(const std::filesystem::path& dir);
Registry load_registry(std::span<const std::filesystem::path> dirs);

}  // namespace cdr

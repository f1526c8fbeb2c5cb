#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace cdr {

/// A typed literal as it appears in definitions, extracted values and
/// user input. Integers and floats are kept apart so that definition
/// files round-trip without changing their spelling.
using Value = std::variant<bool, std::int64_t, double, std::string>;

enum class BaseType { Boolean, Integer, Float, String, Enum };

/// Declared type of a rule variable. `enum_values` is only meaningful
/// for BaseType::Enum.
struct VarType {
    BaseType base = BaseType::Boolean;
    std::vector<std::string> enum_values;

    friend bool operator==(const VarType&, const VarType&) = default;
};

std::string_view to_string(BaseType t);
std::optional<BaseType> parse_base_type(std::string_view s);

/// Human-readable rendering, e.g. "boolean" or "enum{female,male,other}".
std::string describe(const VarType& t);

bool is_numeric(const Value& v);
double as_number(const Value& v);

/// True when `v` is a legal value for a variable of type `t`.
/// Integer literals are accepted for float variables; enum values must
/// be one of the declared values.
bool type_checks(const Value& v, const VarType& t);

/// Converts loosely formatted text (LLM output, terminal input) into a
/// value of type `t`. Returns nullopt when the text is not coercible.
///
/// boolean: true/false/yes/no/present/absent, case-insensitive.
/// integer: optional sign followed by decimal digits.
/// float:   standard decimal or exponent notation; no nan/inf.
/// enum:    exact match after trim + lowercase.
/// string:  trimmed text, must be non-empty.
std::optional<Value> coerce(std::string_view text, const VarType& t);

/// Like coerce(), but takes a JSON value as delivered over the HTTP API:
/// native JSON booleans and numbers are accepted alongside strings.
std::optional<Value> coerce_json(const nlohmann::json& j, const VarType& t);

nlohmann::json to_json(const Value& v);
/// Maps JSON scalars onto Value; throws std::invalid_argument otherwise.
Value value_from_json(const nlohmann::json& j);

std::string display(const Value& v);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace cdr

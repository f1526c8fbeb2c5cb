#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdr/value.hpp"

namespace cdr {

enum class Provenance { Extracted, Imputed, UserSupplied };

std::string_view to_string(Provenance p);
std::optional<Provenance> parse_provenance(std::string_view s);

struct TypedValue {
    Value value;
    Provenance provenance = Provenance::Extracted;

    friend bool operator==(const TypedValue&, const TypedValue&) = default;
};

/// Variable values for one CDR. Every declared variable is either in
/// `values` or in `missing` (declaration order), never both.
struct ExtractedVariables {
    std::string cdr_id;
    std::map<std::string, TypedValue, std::less<>> values;
    std::vector<std::string> missing;
    /// Parse/coercion diagnostics; not part of the variable contract.
    std::vector<std::string> warnings;

    bool complete() const { return missing.empty(); }

    friend bool operator==(const ExtractedVariables&, const ExtractedVariables&) = default;
};

/// excluded <=> !reasons.empty()
struct ExclusionVerdict {
    std::string cdr_id;
    bool excluded = false;
    std::vector<std::string> reasons;

    friend bool operator==(const ExclusionVerdict&, const ExclusionVerdict&) = default;
};

}  // namespace cdr

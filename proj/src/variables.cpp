#include "cdr/variables.hpp"

namespace cdr {

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::Extracted: return "extracted";
        case Provenance::Imputed: return "imputed";
        case Provenance::UserSupplied: return "user_supplied";
    }
    return "?";
}

std::optional<Provenance> parse_provenance(std::string_view s) {
    if (s == "extracted") return Provenance::Extracted;
    if (s == "imputed") return Provenance::Imputed;
    if (s == "user_supplied") return Provenance::UserSupplied;
    return std::nullopt;
}

}  // namespace cdr

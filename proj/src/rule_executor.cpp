#include "cdr/rule_executor.hpp"

#include <algorithm>
#include <chrono>

namespace cdr {

std::optional<bool> compare_values(const Value& lhs, CompareOp op, const Value& rhs) {
    if (is_numeric(lhs) && is_numeric(rhs)) {
        // Exact comparison: thresholds are clinical cutoffs as authored.
        auto cmp = [&](auto a, auto b) -> bool {
            switch (op) {
                case CompareOp::Eq: return a == b;
                case CompareOp::Ne: return a != b;
                case CompareOp::Lt: return a < b;
                case CompareOp::Le: return a <= b;
                case CompareOp::Gt: return a > b;
                case CompareOp::Ge: return a >= b;
                case CompareOp::In: return a == b;
            }
            return false;
        };
        auto* li = std::get_if<std::int64_t>(&lhs);
        auto* ri = std::get_if<std::int64_t>(&rhs);
        if (li && ri) return cmp(*li, *ri);
        return cmp(as_number(lhs), as_number(rhs));
    }
    if (lhs.index() != rhs.index()) return std::nullopt;
    switch (op) {
        case CompareOp::Eq:
        case CompareOp::In: return lhs == rhs;
        case CompareOp::Ne: return lhs != rhs;
        default: return std::nullopt;
    }
}

namespace {

std::string child_path(const std::string& path, PredicateKind kind, std::size_t i) {
    switch (kind) {
        case PredicateKind::All: return path + ".all[" + std::to_string(i) + "]";
        case PredicateKind::Any: return path + ".any[" + std::to_string(i) + "]";
        default: return path + ".not";
    }
}

}  // namespace

bool evaluate_predicate(const Predicate& p, const Assignment& values, const std::string& path) {
    switch (p.kind) {
        case PredicateKind::Compare: {
            auto it = values.find(p.var);
            if (it == values.end()) throw ExecutionError(path, "variable '" + p.var + "' has no value");
            if (p.op == CompareOp::In) {
                for (const auto& candidate : p.set) {
                    auto r = compare_values(it->second, CompareOp::Eq, candidate);
                    if (!r) throw ExecutionError(path, "type mismatch comparing '" + p.var + "'");
                    if (*r) return true;
                }
                return false;
            }
            auto r = compare_values(it->second, p.op, p.value);
            if (!r)
                throw ExecutionError(path, "type mismatch: '" + p.var + "' = " + to_json(it->second).dump() + " " +
                                               std::string(to_string(p.op)) + " " + to_json(p.value).dump());
            return *r;
        }
        case PredicateKind::All:
            for (std::size_t i = 0; i < p.children.size(); ++i)
                if (!evaluate_predicate(p.children[i], values, child_path(path, p.kind, i))) return false;
            return true;
        case PredicateKind::Any:
            for (std::size_t i = 0; i < p.children.size(); ++i)
                if (evaluate_predicate(p.children[i], values, child_path(path, p.kind, i))) return true;
            return false;
        case PredicateKind::Not:
            return !evaluate_predicate(p.children.at(0), values, path + ".not");
    }
    return false;
}

Truth evaluate_partial(const Predicate& p,
                       const std::function<std::optional<Value>(std::string_view)>& lookup) {
    switch (p.kind) {
        case PredicateKind::Compare: {
            auto v = lookup(p.var);
            if (!v) return Truth::Unknown;
            if (p.op == CompareOp::In) {
                for (const auto& candidate : p.set) {
                    auto r = compare_values(*v, CompareOp::Eq, candidate);
                    if (!r) return Truth::Unknown;
                    if (*r) return Truth::True;
                }
                return Truth::False;
            }
            auto r = compare_values(*v, p.op, p.value);
            if (!r) return Truth::Unknown;
            return *r ? Truth::True : Truth::False;
        }
        case PredicateKind::All: {
            Truth acc = Truth::True;
            for (const auto& c : p.children) {
                Truth t = evaluate_partial(c, lookup);
                if (t == Truth::False) return Truth::False;
                if (t == Truth::Unknown) acc = Truth::Unknown;
            }
            return acc;
        }
        case PredicateKind::Any: {
            Truth acc = Truth::False;
            for (const auto& c : p.children) {
                Truth t = evaluate_partial(c, lookup);
                if (t == Truth::True) return Truth::True;
                if (t == Truth::Unknown) acc = Truth::Unknown;
            }
            return acc;
        }
        case PredicateKind::Not: {
            Truth t = evaluate_partial(p.children.at(0), lookup);
            if (t == Truth::Unknown) return t;
            return t == Truth::True ? Truth::False : Truth::True;
        }
    }
    return Truth::Unknown;
}

Outcome execute_rule(const CdrDefinition& def, const Assignment& values) {
    for (const auto& spec : def.variables) {
        auto it = values.find(spec.name);
        if (it == values.end()) throw ExecutionError("$", "incomplete assignment: '" + spec.name + "' has no value");
        if (!type_checks(it->second, spec.type))
            throw ExecutionError("$", "value " + to_json(it->second).dump() + " for '" + spec.name +
                                          "' is not a valid " + describe(spec.type));
    }
    const RuleNode* node = &def.rule;
    std::string path = "$.rule";
    while (!node->is_leaf()) {
        const bool taken = evaluate_predicate(node->condition, values, path + ".if");
        node = &node->branches[taken ? 0 : 1];
        path += taken ? ".then" : ".else";
    }
    if (std::find(def.outcomes.begin(), def.outcomes.end(), node->outcome) == def.outcomes.end())
        throw ExecutionError(path, "outcome '" + node->outcome + "' is not declared");
    return {def.id, node->outcome, def.is_positive(node->outcome)};
}

Assignment assignment_of(const ExtractedVariables& ev) {
    Assignment a;
    for (const auto& [name, tv] : ev.values) a.emplace(name, tv.value);
    return a;
}

std::string_view to_string(ResultKind k) {
    switch (k) {
        case ResultKind::Outcome: return "outcome";
        case ResultKind::Excluded: return "excluded";
        case ResultKind::Error: return "error";
        case ResultKind::Pending: return "pending";
    }
    return "?";
}

std::optional<ResultKind> parse_result_kind(std::string_view s) {
    if (s == "outcome") return ResultKind::Outcome;
    if (s == "excluded") return ResultKind::Excluded;
    if (s == "error") return ResultKind::Error;
    if (s == "pending") return ResultKind::Pending;
    return std::nullopt;
}

const CdrResult* ExecutionReport::find(std::string_view cdr_id) const {
    for (const auto& r : per_cdr)
        if (r.cdr_id == cdr_id) return &r;
    return nullptr;
}

CdrResult execute_item(const ExecutionItem& item) {
    CdrResult r;
    r.cdr_id = item.def ? item.def->id : item.variables.cdr_id;
    if (!item.def) {
        r.kind = ResultKind::Error;
        r.error = "unknown CDR";
        return r;
    }
    if (item.extraction_error) {
        r.kind = ResultKind::Error;
        r.error = "variable extraction failed: " + *item.extraction_error;
        return r;
    }
    if (item.verdict.excluded) {
        r.kind = ResultKind::Excluded;
        r.reasons = item.verdict.reasons;
        return r;
    }
    try {
        r.outcome = execute_rule(*item.def, assignment_of(item.variables));
        r.kind = ResultKind::Outcome;
    } catch (const ExecutionError& e) {
        r.kind = ResultKind::Error;
        r.error = e.what();
        r.error_path = e.node_path();
    }
    return r;
}

ExecutionReport execute_all(const std::vector<ExecutionItem>& items) {
    const auto start = std::chrono::steady_clock::now();
    ExecutionReport report;
    report.per_cdr.reserve(items.size());
    for (const auto& item : items) report.per_cdr.push_back(execute_item(item));
    report.durations["execution"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

MonotonicityResult check_boolean_monotonicity(const CdrDefinition& def) {
    std::vector<std::string> bools;
    Assignment base;
    for (const auto& v : def.variables) {
        base[v.name] = v.negative_default;
        if (v.type.base == BaseType::Boolean) bools.push_back(v.name);
    }
    if (bools.size() > 20) throw std::invalid_argument("too many boolean variables to enumerate");

    MonotonicityResult result;
    const std::uint32_t n = static_cast<std::uint32_t>(bools.size());
    std::vector<bool> positive(std::size_t{1} << n);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        Assignment a = base;
        for (std::uint32_t i = 0; i < n; ++i) a[bools[i]] = static_cast<bool>((mask >> i) & 1u);
        positive[mask] = execute_rule(def, a).is_positive;
        ++result.assignments_checked;
    }
    for (std::uint32_t mask = 0; mask < (1u << n) && result.monotone; ++mask) {
        for (std::uint32_t i = 0; i < n; ++i) {
            if ((mask >> i) & 1u) continue;
            if (positive[mask] && !positive[mask | (1u << i)]) {
                result.monotone = false;
                result.counterexample = "setting '" + bools[i] + "' to true turns a positive outcome non-positive";
                break;
            }
        }
    }
    return result;
}

}  // namespace cdr

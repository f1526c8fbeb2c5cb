#include "cdr/registry.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cdr/digest.hpp"

namespace cdr {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// small helpers

std::string_view to_string(CompareOp op) {
    switch (op) {
        case CompareOp::Eq: return "eq";
        case CompareOp::Ne: return "ne";
        case CompareOp::Lt: return "lt";
        case CompareOp::Le: return "le";
        case CompareOp::Gt: return "gt";
        case CompareOp::Ge: return "ge";
        case CompareOp::In: return "in";
    }
    return "?";
}

std::optional<CompareOp> parse_compare_op(std::string_view s) {
    static const std::pair<std::string_view, CompareOp> kOps[] = {
        {"eq", CompareOp::Eq}, {"ne", CompareOp::Ne}, {"lt", CompareOp::Lt}, {"le", CompareOp::Le},
        {"gt", CompareOp::Gt}, {"ge", CompareOp::Ge}, {"in", CompareOp::In}};
    for (const auto& [name, op] : kOps)
        if (name == s) return op;
    return std::nullopt;
}

RuleNode RuleNode::leaf(std::string label) {
    RuleNode n;
    n.outcome = std::move(label);
    return n;
}

RuleNode RuleNode::branch(Predicate cond, RuleNode then_node, RuleNode else_node) {
    RuleNode n;
    n.condition = std::move(cond);
    n.branches.push_back(std::move(then_node));
    n.branches.push_back(std::move(else_node));
    return n;
}

const VariableSpec* CdrDefinition::find_variable(std::string_view var) const {
    for (const auto& v : variables)
        if (v.name == var) return &v;
    return nullptr;
}

bool CdrDefinition::is_positive(std::string_view outcome) const {
    return std::find(positive_outcomes.begin(), positive_outcomes.end(), outcome) !=
           positive_outcomes.end();
}

const VarType* metadata_field_type(std::string_view name) {
    static const VarType kAge{BaseType::Float, {}};
    static const VarType kSex{BaseType::Enum, {"female", "male", "other"}};
    if (name == "patient_age_years") return &kAge;
    if (name == "patient_sex") return &kSex;
    return nullptr;
}

std::optional<Value> metadata_value(const NoteMeta& meta, std::string_view name) {
    if (name == "patient_age_years" && meta.patient_age_years) return Value{*meta.patient_age_years};
    if (name == "patient_sex" && meta.patient_sex) return Value{*meta.patient_sex};
    return std::nullopt;
}

json to_json(const NoteMeta& meta) {
    json j = json::object();
    if (meta.patient_age_years) j["patient_age_years"] = *meta.patient_age_years;
    if (meta.patient_sex) j["patient_sex"] = *meta.patient_sex;
    return j;
}

NoteMeta note_meta_from_json(const json& j) {
    NoteMeta meta;
    if (j.is_null()) return meta;
    if (!j.is_object()) throw std::invalid_argument("note_meta must be an object");
    for (const auto& [key, val] : j.items()) {
        if (val.is_null()) continue;
        const VarType* type = metadata_field_type(key);
        if (!type) throw std::invalid_argument("unknown note_meta field '" + key + "'");
        auto v = coerce_json(val, *type);
        if (!v) throw std::invalid_argument("note_meta." + key + " must be " + describe(*type));
        if (key == "patient_age_years")
            meta.patient_age_years = as_number(*v);
        else
            meta.patient_sex = std::get<std::string>(*v);
    }
    return meta;
}

RegistryError::RegistryError(std::string file, std::size_t line, std::string field,
                             const std::string& what)
    : std::runtime_error([&] {
          std::string msg = file;
          if (line) msg += ":" + std::to_string(line);
          if (!field.empty()) msg += ": " + field;
          return msg + ": " + what;
      }()),
      file_(std::move(file)),
      line_(line),
      field_(std::move(field)) {}

// ---------------------------------------------------------------------------
// parsing

namespace {

constexpr std::size_t kParseDepthGuard = 512;

struct Parser {
    const std::string& source;

    [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
        throw RegistryError(source, 0, path, msg);
    }

    const json& member(const json& obj, const char* key, const std::string& path) const {
        auto it = obj.find(key);
        if (it == obj.end()) fail(path + "." + key, "missing required field");
        return *it;
    }

    std::string string_field(const json& obj, const char* key, const std::string& path) const {
        const json& v = member(obj, key, path);
        if (!v.is_string()) fail(path + "." + key, "expected a string");
        return v.get<std::string>();
    }

    std::vector<std::string> string_list(const json& v, const std::string& path) const {
        if (!v.is_array()) fail(path, "expected an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_string()) fail(path + "[" + std::to_string(i) + "]", "expected a string");
            out.push_back(v[i].get<std::string>());
        }
        return out;
    }

    void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& path) const {
        for (const auto& [key, _] : obj.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                fail(path + "." + key, "unknown field");
    }

    Value literal(const json& v, const std::string& path) const {
        try {
            return value_from_json(v);
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
    }

    Predicate predicate(const json& j, const std::string& path, std::size_t depth) const {
        if (depth > kParseDepthGuard) fail(path, "nesting too deep");
        if (!j.is_object()) fail(path, "predicate must be an object");
        Predicate p;
        if (j.contains("var")) {
            check_keys(j, {"var", "op", "value"}, path);
            p.kind = PredicateKind::Compare;
            p.var = string_field(j, "var", path);
            const std::string op = string_field(j, "op", path);
            auto parsed = parse_compare_op(op);
            if (!parsed) fail(path + ".op", "unknown operator '" + op + "'");
            p.op = *parsed;
            const json& value = member(j, "value", path);
            if (p.op == CompareOp::In) {
                if (!value.is_array()) fail(path + ".value", "'in' requires an array");
                for (std::size_t i = 0; i < value.size(); ++i)
                    p.set.push_back(literal(value[i], path + ".value[" + std::to_string(i) + "]"));
            } else {
                p.value = literal(value, path + ".value");
            }
            return p;
        }
        for (auto [key, kind] : {std::pair{"all", PredicateKind::All}, std::pair{"any", PredicateKind::Any}}) {
            if (!j.contains(key)) continue;
            check_keys(j, {key}, path);
            const json& list = j.at(key);
            if (!list.is_array()) fail(path + "." + key, "expected an array of predicates");
            p.kind = kind;
            for (std::size_t i = 0; i < list.size(); ++i)
                p.children.push_back(
                    predicate(list[i], path + "." + key + "[" + std::to_string(i) + "]", depth + 1));
            return p;
        }
        if (j.contains("not")) {
            check_keys(j, {"not"}, path);
            p.kind = PredicateKind::Not;
            p.children.push_back(predicate(j.at("not"), path + ".not", depth + 1));
            return p;
        }
        fail(path, "predicate needs one of 'var', 'all', 'any', 'not'");
    }

    RuleNode node(const json& j, const std::string& path, std::size_t depth) const {
        if (depth > kParseDepthGuard) fail(path, "nesting too deep");
        if (j.is_string()) return RuleNode::leaf(j.get<std::string>());
        if (!j.is_object()) fail(path, "rule node must be an outcome string or an if/then/else object");
        check_keys(j, {"if", "then", "else"}, path);
        return RuleNode::branch(predicate(member(j, "if", path), path + ".if", depth + 1),
                                node(member(j, "then", path), path + ".then", depth + 1),
                                node(member(j, "else", path), path + ".else", depth + 1));
    }

    VariableSpec variable(const json& j, const std::string& path) const {
        if (!j.is_object()) fail(path, "variable must be an object");
        check_keys(j, {"name", "type", "values", "definition", "negative_default", "required"}, path);
        VariableSpec v;
        v.name = string_field(j, "name", path);
        const std::string type = string_field(j, "type", path);
        auto base = parse_base_type(type);
        if (!base) fail(path + ".type", "unknown type '" + type + "'");
        v.type.base = *base;
        if (j.contains("values")) {
            if (*base != BaseType::Enum) fail(path + ".values", "only enum variables take 'values'");
            v.type.enum_values = string_list(j.at("values"), path + ".values");
        } else if (*base == BaseType::Enum) {
            fail(path + ".values", "enum variable requires 'values'");
        }
        v.definition = string_field(j, "definition", path);
        v.negative_default = literal(member(j, "negative_default", path), path + ".negative_default");
        if (j.contains("required")) {
            if (!j.at("required").is_boolean()) fail(path + ".required", "expected a boolean");
            v.required = j.at("required").get<bool>();
        }
        return v;
    }

    CdrDefinition definition(const json& doc) const {
        if (!doc.is_object()) fail("$", "definition must be a JSON object");
        check_keys(doc,
                   {"schema_version", "id", "name", "description", "keywords", "variables", "exclusions",
                    "rule", "outcomes", "positive_outcomes"},
                   "$");
        CdrDefinition def;
        if (doc.contains("schema_version")) {
            if (!doc.at("schema_version").is_number_integer())
                fail("$.schema_version", "expected an integer");
            def.schema_version = doc.at("schema_version").get<int>();
        }
        def.id = string_field(doc, "id", "$");
        def.name = string_field(doc, "name", "$");
        def.description = string_field(doc, "description", "$");
        if (doc.contains("keywords")) def.keywords = string_list(doc.at("keywords"), "$.keywords");

        const json& vars = member(doc, "variables", "$");
        if (!vars.is_array()) fail("$.variables", "expected an array");
        for (std::size_t i = 0; i < vars.size(); ++i)
            def.variables.push_back(variable(vars[i], "$.variables[" + std::to_string(i) + "]"));

        if (doc.contains("exclusions")) {
            const json& ex = doc.at("exclusions");
            if (!ex.is_array()) fail("$.exclusions", "expected an array");
            for (std::size_t i = 0; i < ex.size(); ++i) {
                const std::string path = "$.exclusions[" + std::to_string(i) + "]";
                if (!ex[i].is_object()) fail(path, "exclusion must be an object");
                check_keys(ex[i], {"when", "reason"}, path);
                def.exclusions.push_back(
                    {predicate(member(ex[i], "when", path), path + ".when", 0), string_field(ex[i], "reason", path)});
            }
        }
        def.rule = node(member(doc, "rule", "$"), "$.rule", 0);
        def.outcomes = string_list(member(doc, "outcomes", "$"), "$.outcomes");
        if (doc.contains("positive_outcomes"))
            def.positive_outcomes = string_list(doc.at("positive_outcomes"), "$.positive_outcomes");
        return def;
    }
};

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw RegistryError(file.string(), 0, "", "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

CdrDefinition parse_definition(const json& doc, const std::string& source) {
    return Parser{source}.definition(doc);
}

CdrDefinition parse_definition_file(const fs::path& file) {
    const std::string text = read_file(file);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports the byte just past the failure point.
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw RegistryError(file.string(), line_of_offset(text, byte), "", "JSON syntax error: " + std::string(e.what()));
    }
    return parse_definition(doc, file.string());
}

// ---------------------------------------------------------------------------
// serialization

json serialize_predicate(const Predicate& p) {
    switch (p.kind) {
        case PredicateKind::Compare: {
            json j = {{"var", p.var}, {"op", to_string(p.op)}};
            if (p.op == CompareOp::In) {
                json arr = json::array();
                for (const auto& v : p.set) arr.push_back(to_json(v));
                j["value"] = std::move(arr);
            } else {
                j["value"] = to_json(p.value);
            }
            return j;
        }
        case PredicateKind::All:
        case PredicateKind::Any: {
            json arr = json::array();
            for (const auto& c : p.children) arr.push_back(serialize_predicate(c));
            return {{p.kind == PredicateKind::All ? "all" : "any", std::move(arr)}};
        }
        case PredicateKind::Not:
            return {{"not", serialize_predicate(p.children.at(0))}};
    }
    return nullptr;
}

json serialize_rule(const RuleNode& node) {
    if (node.is_leaf()) return node.outcome;
    return {{"if", serialize_predicate(node.condition)},
            {"then", serialize_rule(node.branches[0])},
            {"else", serialize_rule(node.branches[1])}};
}

json serialize_definition(const CdrDefinition& def) {
    json vars = json::array();
    for (const auto& v : def.variables) {
        json jv = {{"name", v.name}, {"type", to_string(v.type.base)}};
        if (v.type.base == BaseType::Enum) jv["values"] = v.type.enum_values;
        jv["definition"] = v.definition;
        jv["negative_default"] = to_json(v.negative_default);
        jv["required"] = v.required;
        vars.push_back(std::move(jv));
    }
    json ex = json::array();
    for (const auto& e : def.exclusions) ex.push_back({{"when", serialize_predicate(e.when)}, {"reason", e.reason}});

    return {{"schema_version", def.schema_version},
            {"id", def.id},
            {"name", def.name},
            {"description", def.description},
            {"keywords", def.keywords},
            {"variables", std::move(vars)},
            {"exclusions", std::move(ex)},
            {"rule", serialize_rule(def.rule)},
            {"outcomes", def.outcomes},
            {"positive_outcomes", def.positive_outcomes}};
}

// ---------------------------------------------------------------------------
// validation

namespace {

bool is_identifier(std::string_view s) {
    if (s.empty() || s.front() < 'a' || s.front() > 'z') return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

bool op_allowed(BaseType t, CompareOp op) {
    switch (t) {
        case BaseType::Boolean: return op == CompareOp::Eq || op == CompareOp::Ne;
        case BaseType::Integer:
        case BaseType::Float: return true;
        case BaseType::String:
        case BaseType::Enum: return op == CompareOp::Eq || op == CompareOp::Ne || op == CompareOp::In;
    }
    return false;
}

struct Validator {
    const CdrDefinition& def;
    std::vector<Violation> out;

    void add(std::string code, std::string path, std::string msg) {
        out.push_back({std::move(code), std::move(path), std::move(msg)});
    }

    void predicate(const Predicate& p, const std::string& path, bool allow_metadata, std::size_t depth) {
        if (depth > kMaxRuleDepth) {
            add("DEPTH_EXCEEDED", path, "predicate nesting exceeds " + std::to_string(kMaxRuleDepth));
            return;
        }
        switch (p.kind) {
            case PredicateKind::Compare: {
                const VarType* type = nullptr;
                if (const auto* spec = def.find_variable(p.var))
                    type = &spec->type;
                else if (allow_metadata)
                    type = metadata_field_type(p.var);
                if (!type) {
                    add("UNKNOWN_VARIABLE", path + ".var", "undeclared variable '" + p.var + "'");
                    return;
                }
                if (!op_allowed(type->base, p.op)) {
                    add("TYPE_MISMATCH", path + ".op",
                        "operator '" + std::string(to_string(p.op)) + "' not applicable to " + describe(*type) +
                            " variable '" + p.var + "'");
                    return;
                }
                if (p.op == CompareOp::In) {
                    if (p.set.empty()) add("BAD_PREDICATE", path + ".value", "'in' needs a non-empty list");
                    for (std::size_t i = 0; i < p.set.size(); ++i)
                        if (!type_checks(p.set[i], *type))
                            add("TYPE_MISMATCH", path + ".value[" + std::to_string(i) + "]",
                                "literal " + to_json(p.set[i]).dump() + " is not a valid " + describe(*type));
                } else if (!type_checks(p.value, *type)) {
                    add("TYPE_MISMATCH", path + ".value",
                        "literal " + to_json(p.value).dump() + " is not a valid " + describe(*type));
                }
                return;
            }
            case PredicateKind::All:
            case PredicateKind::Any: {
                const char* key = p.kind == PredicateKind::All ? ".all" : ".any";
                if (p.children.empty()) add("BAD_PREDICATE", path + key, "empty predicate list");
                for (std::size_t i = 0; i < p.children.size(); ++i)
                    predicate(p.children[i], path + key + "[" + std::to_string(i) + "]", allow_metadata, depth + 1);
                return;
            }
            case PredicateKind::Not:
                if (p.children.size() != 1) {
                    add("BAD_PREDICATE", path + ".not", "'not' takes exactly one predicate");
                    return;
                }
                predicate(p.children[0], path + ".not", allow_metadata, depth + 1);
                return;
        }
    }

    void node(const RuleNode& n, const std::string& path, std::size_t depth) {
        if (depth > kMaxRuleDepth) {
            add("DEPTH_EXCEEDED", path, "rule tree deeper than " + std::to_string(kMaxRuleDepth));
            return;
        }
        if (n.is_leaf()) {
            if (std::find(def.outcomes.begin(), def.outcomes.end(), n.outcome) == def.outcomes.end())
                add("UNKNOWN_OUTCOME", path, "outcome '" + n.outcome + "' is not declared");
            return;
        }
        if (n.branches.size() != 2) {
            add("BAD_PREDICATE", path, "if-node needs exactly two branches");
            return;
        }
        predicate(n.condition, path + ".if", false, depth + 1);
        node(n.branches[0], path + ".then", depth + 1);
        node(n.branches[1], path + ".else", depth + 1);
    }

    void run() {
        if (def.schema_version != kSchemaVersion)
            add("UNSUPPORTED_SCHEMA", "$.schema_version",
                "schema_version " + std::to_string(def.schema_version) + " is not supported");
        if (!is_identifier(def.id)) add("INVALID_ID", "$.id", "id must match [a-z][a-z0-9_]*");
        if (trim(def.name).empty()) add("EMPTY_NAME", "$.name", "name is empty");
        if (trim(def.description).empty()) add("EMPTY_DESCRIPTION", "$.description", "description is empty");
        if (def.variables.empty()) add("NO_VARIABLES", "$.variables", "a rule needs at least one variable");

        std::set<std::string> seen;
        for (std::size_t i = 0; i < def.variables.size(); ++i) {
            const auto& v = def.variables[i];
            const std::string path = "$.variables[" + std::to_string(i) + "]";
            if (!is_identifier(v.name))
                add("INVALID_VARIABLE_NAME", path + ".name", "'" + v.name + "' must match [a-z][a-z0-9_]*");
            else if (metadata_field_type(v.name))
                add("INVALID_VARIABLE_NAME", path + ".name", "'" + v.name + "' is reserved for note metadata");
            if (!seen.insert(v.name).second)
                add("DUPLICATE_VARIABLE", path + ".name", "variable '" + v.name + "' declared twice");
            if (v.type.base == BaseType::Enum) {
                std::set<std::string> distinct(v.type.enum_values.begin(), v.type.enum_values.end());
                if (distinct.size() < 2 || distinct.size() != v.type.enum_values.size())
                    add("ENUM_TOO_FEW_VALUES", path + ".values", "enum needs at least two distinct values");
            }
            if (!type_checks(v.negative_default, v.type))
                add("BAD_DEFAULT", path + ".negative_default",
                    "negative_default " + to_json(v.negative_default).dump() + " is not a valid " + describe(v.type));
        }

        if (def.outcomes.empty()) add("EMPTY_OUTCOMES", "$.outcomes", "outcome list is empty");
        std::set<std::string> outs;
        for (std::size_t i = 0; i < def.outcomes.size(); ++i)
            if (!outs.insert(def.outcomes[i]).second)
                add("DUPLICATE_OUTCOME", "$.outcomes[" + std::to_string(i) + "]", "outcome listed twice");
        for (std::size_t i = 0; i < def.positive_outcomes.size(); ++i)
            if (!outs.count(def.positive_outcomes[i]))
                add("POSITIVE_NOT_IN_OUTCOMES", "$.positive_outcomes[" + std::to_string(i) + "]",
                    "'" + def.positive_outcomes[i] + "' is not a declared outcome");

        for (std::size_t i = 0; i < def.exclusions.size(); ++i)
            predicate(def.exclusions[i].when, "$.exclusions[" + std::to_string(i) + "].when", true, 0);
        node(def.rule, "$.rule", 0);
    }
};

void collect_vars(const Predicate& p, std::set<std::string>& out) {
    if (p.kind == PredicateKind::Compare) out.insert(p.var);
    for (const auto& c : p.children) collect_vars(c, out);
}

void collect_vars(const RuleNode& n, std::set<std::string>& out) {
    if (n.is_leaf()) return;
    collect_vars(n.condition, out);
    for (const auto& b : n.branches) collect_vars(b, out);
}

}  // namespace

std::vector<Violation> validate_definition(const CdrDefinition& def) {
    Validator v{def, {}};
    v.run();
    return std::move(v.out);
}

std::vector<Violation> lint_definition(const CdrDefinition& def) {
    std::set<std::string> used;
    collect_vars(def.rule, used);
    for (const auto& e : def.exclusions) collect_vars(e.when, used);
    std::vector<Violation> out;
    for (std::size_t i = 0; i < def.variables.size(); ++i)
        if (!used.count(def.variables[i].name))
            out.push_back({"DEAD_VARIABLE", "$.variables[" + std::to_string(i) + "]",
                           "variable '" + def.variables[i].name + "' is never referenced"});
    return out;
}

std::size_t rule_depth(const RuleNode& node) {
    if (node.is_leaf()) return 1;
    std::size_t d = 0;
    for (const auto& b : node.branches) d = std::max(d, rule_depth(b));
    return d + 1;
}

std::string selection_text(const CdrDefinition& def, bool include_keywords) {
    if (!include_keywords || def.keywords.empty()) return def.description;
    std::string out = def.description;
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += "Keywords to consider often include: ";
    for (std::size_t i = 0; i < def.keywords.size(); ++i) {
        if (i) out += ", ";
        out += def.keywords[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// registry

Registry::Registry(std::vector<CdrDefinition> defs, std::string digest)
    : defs_(std::move(defs)), digest_(std::move(digest)) {}

namespace {

std::string format_violations(const std::vector<Violation>& vs) {
    std::string msg = "validation failed:";
    for (const auto& v : vs) msg += " [" + v.code + " at " + v.path + ": " + v.message + "]";
    return msg;
}

}  // namespace

Registry Registry::build(std::vector<std::pair<CdrDefinition, std::string>> loaded) {
    std::sort(loaded.begin(), loaded.end(),
              [](const auto& a, const auto& b) { return a.first.id < b.first.id; });
    std::string joined;
    std::vector<CdrDefinition> defs;
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        if (!defs.empty() && loaded[i].first.id == defs.back().id)
            throw RegistryError(loaded[i].second, 0, "$.id", "duplicate id '" + loaded[i].first.id + "'");
        joined += sha256_hex(serialize_definition(loaded[i].first).dump());
        joined += '\n';
        defs.push_back(std::move(loaded[i].first));
    }
    return Registry(std::move(defs), sha256_hex(joined));
}

Registry Registry::from_definitions(std::vector<CdrDefinition> defs) {
    std::vector<std::pair<CdrDefinition, std::string>> loaded;
    for (auto& d : defs) {
        auto vs = validate_definition(d);
        if (!vs.empty()) throw RegistryError("<memory:" + d.id + ">", 0, vs.front().path, format_violations(vs));
        std::string source = "<memory:" + d.id + ">";
        loaded.emplace_back(std::move(d), std::move(source));
    }
    return build(std::move(loaded));
}

const CdrDefinition* Registry::find(std::string_view id) const {
    auto it = std::lower_bound(defs_.begin(), defs_.end(), id,
                               [](const CdrDefinition& d, std::string_view key) { return d.id < key; });
    if (it != defs_.end() && it->id == id) return &*it;
    return nullptr;
}

Registry load_registry(const fs::path& dir) {
    return load_registry(std::span<const fs::path>(&dir, 1));
}

Registry load_registry(std::span<const fs::path> dirs) {
    std::vector<std::pair<CdrDefinition, std::string>> loaded;
    for (const auto& dir : dirs) {
        std::error_code ec;
        if (!fs::is_directory(dir, ec)) throw RegistryError(dir.string(), 0, "", "not a directory");
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            CdrDefinition def = parse_definition_file(f);
            auto vs = validate_definition(def);
            if (!vs.empty()) throw RegistryError(f.string(), 0, vs.front().path, format_violations(vs));
            loaded.emplace_back(std::move(def), f.string());
        }
    }
    if (loaded.empty()) throw RegistryError(dirs.empty() ? "" : dirs.front().string(), 0, "", "no definitions found");
    return Registry::build(std::move(loaded));
}

}  // namespace cdr

#include "cdr/value.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace cdr {

std::string_view to_string(BaseType t) {
    switch (t) {
        case BaseType::Boolean: return "boolean";
        case BaseType::Integer: return "integer";
        case BaseType::Float: return "float";
        case BaseType::String: return "string";
        case BaseType::Enum: return "enum";
    }
    return "?";
}

std::optional<BaseType> parse_base_type(std::string_view s) {
    if (s == "boolean") return BaseType::Boolean;
    if (s == "integer") return BaseType::Integer;
    if (s == "float") return BaseType::Float;
    if (s == "string") return BaseType::String;
    if (s == "enum") return BaseType::Enum;
    return std::nullopt;
}

std::string describe(const VarType& t) {
    std::string out(to_string(t.base));
    if (t.base == BaseType::Enum) {
        out += '{';
        for (std::size_t i = 0; i < t.enum_values.size(); ++i) {
            if (i) out += ',';
            out += t.enum_values[i];
        }
        out += '}';
    }
    return out;
}

bool is_numeric(const Value& v) {
    return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

double as_number(const Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (auto* d = std::get_if<double>(&v)) return *d;
    throw std::invalid_argument("value is not numeric");
}

bool type_checks(const Value& v, const VarType& t) {
    switch (t.base) {
        case BaseType::Boolean: return std::holds_alternative<bool>(v);
        case BaseType::Integer: return std::holds_alternative<std::int64_t>(v);
        case BaseType::Float: {
            if (std::holds_alternative<std::int64_t>(v)) return true;
            auto* d = std::get_if<double>(&v);
            return d && std::isfinite(*d);
        }
        case BaseType::String: return std::holds_alternative<std::string>(v);
        case BaseType::Enum: {
            auto* s = std::get_if<std::string>(&v);
            return s && std::find(t.enum_values.begin(), t.enum_values.end(), *s) != t.enum_values.end();
        }
    }
    return false;
}

std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

namespace {

std::optional<std::int64_t> parse_integer(const std::string& s) {
    std::string_view body = s;
    if (!body.empty() && body.front() == '+') body.remove_prefix(1);
    if (body.empty()) return std::nullopt;
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), out);
    if (ec != std::errc{} || ptr != body.data() + body.size()) return std::nullopt;
    return out;
}

std::optional<double> parse_float(const std::string& s) {
    std::string_view body = s;
    if (!body.empty() && body.front() == '+') body.remove_prefix(1);
    if (body.empty()) return std::nullopt;
    double out = 0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), out,
                                     std::chars_format::general);
    if (ec != std::errc{} || ptr != body.data() + body.size() || !std::isfinite(out))
        return std::nullopt;
    return out;
}

}  // namespace

std::optional<Value> coerce(std::string_view text, const VarType& t) {
    const std::string s = trim(text);
    switch (t.base) {
        case BaseType::Boolean: {
            const std::string l = to_lower(s);
            if (l == "true" || l == "yes" || l == "present") return Value{true};
            if (l == "false" || l == "no" || l == "absent") return Value{false};
            return std::nullopt;
        }
        case BaseType::Integer:
            if (auto i = parse_integer(s)) return Value{*i};
            return std::nullopt;
        case BaseType::Float:
            if (auto d = parse_float(s)) return Value{*d};
            return std::nullopt;
        case BaseType::String:
            if (s.empty()) return std::nullopt;
            return Value{s};
        case BaseType::Enum: {
            const std::string l = to_lower(s);
            for (const auto& e : t.enum_values)
                if (to_lower(e) == l) return Value{e};
            return std::nullopt;
        }
    }
    return std::nullopt;
}

std::optional<Value> coerce_json(const nlohmann::json& j, const VarType& t) {
    if (j.is_string()) return coerce(j.get<std::string>(), t);
    switch (t.base) {
        case BaseType::Boolean:
            if (j.is_boolean()) return Value{j.get<bool>()};
            return std::nullopt;
        case BaseType::Integer:
            if (j.is_number_integer()) return Value{j.get<std::int64_t>()};
            return std::nullopt;
        case BaseType::Float:
            if (j.is_number_integer()) return Value{static_cast<double>(j.get<std::int64_t>())};
            if (j.is_number_float() && std::isfinite(j.get<double>())) return Value{j.get<double>()};
            return std::nullopt;
        default:
            return std::nullopt;
    }
}

nlohmann::json to_json(const Value& v) {
    return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

Value value_from_json(const nlohmann::json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw std::invalid_argument("expected a scalar literal, got " + std::string(j.type_name()));
}

std::string display(const Value& v) {
    if (auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    return to_json(v).dump();
}

}  // namespace cdr

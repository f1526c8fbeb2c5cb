#include "cdr/serialization.hpp"

#include <stdexcept>

namespace cdr {

using nlohmann::json;

namespace {

std::vector<std::string> strings(const json& j) {
    return j.get<std::vector<std::string>>();
}

}  // namespace

json to_json(const SelectionConfig& c) {
    return {{"alpha", c.alpha},
            {"num_truncations", c.num_truncations},
            {"retention_ratio", c.retention_ratio},
            {"rng_seed", c.rng_seed},
            {"include_keywords", c.include_keywords},
            {"sigma_floor", c.sigma_floor}};
}

// Missing keys keep their defaults so partial overrides are accepted.
SelectionConfig selection_config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("selection config must be an object");
    SelectionConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "alpha") c.alpha = v.get<double>();
        else if (key == "num_truncations") c.num_truncations = v.get<int>();
        else if (key == "retention_ratio") c.retention_ratio = v.get<double>();
        else if (key == "rng_seed") c.rng_seed = v.get<std::uint64_t>();
        else if (key == "include_keywords") c.include_keywords = v.get<bool>();
        else if (key == "sigma_floor") c.sigma_floor = v.get<double>();
        else throw std::invalid_argument("unknown selection setting '" + key + "'");
    }
    return c;
}

json to_json(const SimilarityProfile& p) {
    json per = json::object();
    for (const auto& [id, s] : p.per_cdr)
        per[id] = {{"scores", s.scores}, {"statistic", s.statistic}, {"zscore", s.zscore}, {"p_value", s.p_value}};
    return {{"per_cdr", per},
            {"mu_hat", p.mu_hat},
            {"sigma_hat", p.sigma_hat},
            {"alpha", p.alpha},
            {"selected", p.selected}};
}

SimilarityProfile profile_from_json(const json& j) {
    SimilarityProfile p;
    for (const auto& [id, s] : j.at("per_cdr").items()) {
        CdrScore score;
        score.scores = s.at("scores").get<std::vector<double>>();
        score.statistic = s.at("statistic").get<double>();
        score.zscore = s.at("zscore").get<double>();
        score.p_value = s.at("p_value").get<double>();
        p.per_cdr.emplace(id, std::move(score));
    }
    p.mu_hat = j.at("mu_hat").get<double>();
    p.sigma_hat = j.at("sigma_hat").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.selected = strings(j.at("selected"));
    return p;
}

json to_json(const ExtractedVariables& ev) {
    json values = json::object();
    for (const auto& [name, tv] : ev.values)
        values[name] = {{"value", to_json(tv.value)}, {"provenance", to_string(tv.provenance)}};
    return {{"cdr_id", ev.cdr_id}, {"values", values}, {"missing", ev.missing}, {"warnings", ev.warnings}};
}

ExtractedVariables extracted_from_json(const json& j) {
    ExtractedVariables ev;
    ev.cdr_id = j.at("cdr_id").get<std::string>();
    for (const auto& [name, tv] : j.at("values").items()) {
        const auto prov = parse_provenance(tv.at("provenance").get<std::string>());
        if (!prov) throw std::invalid_argument("unknown provenance for '" + name + "'");
        ev.values.emplace(name, TypedValue{value_from_json(tv.at("value")), *prov});
    }
    ev.missing = strings(j.at("missing"));
    if (j.contains("warnings")) ev.warnings = strings(j.at("warnings"));
    return ev;
}

json to_json(const ExclusionVerdict& v) {
    return {{"cdr_id", v.cdr_id}, {"excluded", v.excluded}, {"reasons", v.reasons}};
}

ExclusionVerdict verdict_from_json(const json& j) {
    ExclusionVerdict v;
    v.cdr_id = j.at("cdr_id").get<std::string>();
    v.excluded = j.at("excluded").get<bool>();
    v.reasons = strings(j.at("reasons"));
    return v;
}

json to_json(const Outcome& o) {
    return {{"cdr_id", o.cdr_id}, {"label", o.label}, {"is_positive", o.is_positive}};
}

json to_json(const CdrResult& r) {
    json j = {{"cdr_id", r.cdr_id}, {"kind", to_string(r.kind)}};
    j["outcome"] = r.outcome ? to_json(*r.outcome) : json(nullptr);
    j["reasons"] = r.reasons;
    j["error"] = r.error;
    j["error_path"] = r.error_path;
    j["pending"] = r.pending;
    return j;
}

namespace {

CdrResult result_from_json(const json& j) {
    CdrResult r;
    r.cdr_id = j.at("cdr_id").get<std::string>();
    const auto kind = parse_result_kind(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown result kind");
    r.kind = *kind;
    if (j.contains("outcome") && !j.at("outcome").is_null()) {
        const auto& o = j.at("outcome");
        r.outcome = Outcome{o.at("cdr_id").get<std::string>(), o.at("label").get<std::string>(),
                            o.at("is_positive").get<bool>()};
    }
    r.reasons = strings(j.value("reasons", json::array()));
    r.error = j.value("error", "");
    r.error_path = j.value("error_path", "");
    r.pending = strings(j.value("pending", json::array()));
    return r;
}

}  // namespace

json to_json(const ExecutionReport& r) {
    json per = json::array();
    for (const auto& c : r.per_cdr) per.push_back(to_json(c));
    return {{"per_cdr", per}, {"durations", r.durations}};
}

ExecutionReport report_from_json(const json& j) {
    ExecutionReport r;
    for (const auto& c : j.at("per_cdr")) r.per_cdr.push_back(result_from_json(c));
    if (j.contains("durations")) r.durations = j.at("durations").get<std::map<std::string, double>>();
    return r;
}

json to_json(const AnalysisSession& s) {
    json extractions = json::array();
    for (const auto& ev : s.extractions) extractions.push_back(to_json(ev));
    json verdicts = json::array();
    for (const auto& v : s.verdicts) verdicts.push_back(to_json(v));
    return {{"session_id", s.session_id},
            {"status", to_string(s.status)},
            {"note", s.note},
            {"note_meta", to_json(s.note_meta)},
            {"interactive", s.interactive},
            {"selection", to_json(s.selection)},
            {"profile", to_json(s.profile)},
            {"extractions", extractions},
            {"verdicts", verdicts},
            {"pending", s.pending},
            {"report", to_json(s.report)},
            {"timings", {{"t_sel", s.timings.t_sel}, {"t_exe", s.timings.t_exe}, {"t_tot", s.timings.t_tot}}},
            {"error", s.error ? json(*s.error) : json(nullptr)}};
}

AnalysisSession session_from_json(const json& j) {
    AnalysisSession s;
    s.session_id = j.at("session_id").get<std::string>();
    const auto status = parse_session_status(j.at("status").get<std::string>());
    if (!status) throw std::invalid_argument("unknown session status");
    s.status = *status;
    s.note = j.at("note").get<std::string>();
    s.note_meta = note_meta_from_json(j.at("note_meta"));
    s.interactive = j.at("interactive").get<bool>();
    s.selection = selection_config_from_json(j.at("selection"));
    s.profile = profile_from_json(j.at("profile"));
    for (const auto& ev : j.at("extractions")) s.extractions.push_back(extracted_from_json(ev));
    for (const auto& v : j.at("verdicts")) s.verdicts.push_back(verdict_from_json(v));
    s.pending = j.at("pending").get<std::map<std::string, std::vector<std::string>>>();
    s.report = report_from_json(j.at("report"));
    const auto& t = j.at("timings");
    s.timings = {t.at("t_sel").get<double>(), t.at("t_exe").get<double>(), t.at("t_tot").get<double>()};
    if (!j.at("error").is_null()) s.error = j.at("error").get<std::string>();
    return s;
}

json strip_volatile(const json& j) {
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [key, v] : j.items()) {
            if (key == "session_id" || key == "timings" || key == "durations" || key == "seconds") continue;
            out[key] = strip_volatile(v);
        }
        return out;
    }
    if (j.is_array()) {
        json out = json::array();
        for (const auto& v : j) out.push_back(strip_volatile(v));
        return out;
    }
    return j;
}

}  // namespace cdr

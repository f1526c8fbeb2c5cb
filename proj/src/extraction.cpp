#include "cdr/extraction.hpp"

#include <map>
#include <thread>

#include "cdr/prompts.hpp"
#include "cdr/rule_executor.hpp"

namespace cdr {

ExtractionPrompt build_prompt(std::string_view note, const CdrDefinition& def) {
    std::string vars;
    for (const auto& v : def.variables) {
        if (!vars.empty()) vars += '\n';
        vars += "- " + v.name + " (" + describe(v.type) + "): " + v.definition;
    }
    ExtractionPrompt p;
    p.cdr_id = def.id;
    p.system_text = trim(prompts::system_text());
    p.rendered_text = prompts::render(prompts::extraction_template(), {{"cdr_id", def.id},
                                                                       {"cdr_name", def.name},
                                                                       {"variables", vars},
                                                                       {"note", std::string(note)}});
    return p;
}

namespace {

std::string strip_decoration(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '`' || s.front() == ' '))
        s.erase(s.begin());
    while (!s.empty() && (s.back() == '`' || s.back() == ' ')) s.pop_back();
    return s;
}

}  // namespace

ExtractedVariables parse_extraction(std::string_view raw, const CdrDefinition& def) {
    ExtractedVariables ev;
    ev.cdr_id = def.id;

    std::map<std::string, std::pair<std::string, std::size_t>> last;  // name -> (value text, line no)
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto eol = raw.find('\n', pos);
        if (eol == std::string_view::npos) eol = raw.size();
        const std::string_view line = raw.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;

        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const std::string name = to_lower(strip_decoration(std::string(line.substr(0, colon))));
        if (name.empty()) continue;
        if (!def.find_variable(name)) {
            ev.warnings.push_back("line " + std::to_string(line_no) + ": unknown variable '" + name + "' ignored");
            continue;
        }
        last[name] = {strip_decoration(std::string(line.substr(colon + 1))), line_no};
    }

    for (const auto& spec : def.variables) {
        auto it = last.find(spec.name);
        if (it == last.end()) {
            ev.missing.push_back(spec.name);
            continue;
        }
        const auto& [text, line] = it->second;
        if (auto v = coerce(text, spec.type)) {
            ev.values.emplace(spec.name, TypedValue{std::move(*v), Provenance::Extracted});
        } else {
            ev.warnings.push_back("line " + std::to_string(line) + ": cannot read '" + text + "' as " +
                                  describe(spec.type) + " for '" + spec.name + "'");
            ev.missing.push_back(spec.name);
        }
    }
    return ev;
}

ExtractedVariables impute_negative(ExtractedVariables ev, const CdrDefinition& def) {
    for (const auto& name : ev.missing) {
        const VariableSpec* spec = def.find_variable(name);
        if (!spec || ev.values.count(name)) continue;
        ev.values.emplace(name, TypedValue{spec->negative_default, Provenance::Imputed});
    }
    ev.missing.clear();
    return ev;
}

ExclusionVerdict apply_exclusions(const ExtractedVariables& ev, const NoteMeta& meta, const CdrDefinition& def) {
    ExclusionVerdict verdict;
    verdict.cdr_id = def.id;
    auto lookup = [&](std::string_view name) -> std::optional<Value> {
        if (auto it = ev.values.find(name); it != ev.values.end()) return it->second.value;
        return metadata_value(meta, name);
    };
    for (const auto& rule : def.exclusions)
        if (evaluate_partial(rule.when, lookup) == Truth::True) verdict.reasons.push_back(rule.reason);
    verdict.excluded = !verdict.reasons.empty();
    return verdict;
}

ExtractionResult extract(std::string_view note, const CdrDefinition& def, LlmProvider& provider,
                         const ExtractionOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const ExtractionPrompt prompt = build_prompt(note, def);
    ExtractionResult result;

    const int attempts = std::max(1, options.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        result.attempts = attempt;
        try {
            const std::string raw = provider.complete({prompt.system_text, prompt.rendered_text, 0.0});
            result.variables = parse_extraction(raw, def);
            result.error.reset();
            break;
        } catch (const ProviderError& e) {
            result.error = e.what();
            if (!e.retryable()) break;
            if (attempt < attempts) std::this_thread::sleep_for(options.backoff);
        } catch (const std::exception& e) {
            result.error = e.what();
            break;
        }
    }
    if (result.error) result.variables = parse_extraction("", def);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace cdr

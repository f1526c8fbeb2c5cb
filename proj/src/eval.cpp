#include "cdr/eval.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "cdr/prompts.hpp"
#include "cdr/serialization.hpp"

namespace cdr {

using nlohmann::json;

json to_json(const LabeledNote& n) {
    json sets = json::array();
    for (const auto& s : n.label_sets) sets.push_back(s);
    json j = {{"note_id", n.note_id}, {"note", n.note}, {"note_meta", to_json(n.note_meta)}, {"label_sets", sets}};
    if (!n.outcome_labels.empty()) {
        json o = json::object();
        for (const auto& [id, pos] : n.outcome_labels) o[id] = pos ? "positive" : "negative";
        j["outcome_labels"] = o;
    }
    return j;
}

LabeledNote labeled_note_from_json(const json& j) {
    LabeledNote n;
    n.note_id = j.at("note_id").get<std::string>();
    n.note = j.at("note").get<std::string>();
    if (j.contains("note_meta") && !j.at("note_meta").is_null()) n.note_meta = note_meta_from_json(j.at("note_meta"));
    for (const auto& s : j.at("label_sets")) n.label_sets.push_back(s.get<CdrSet>());
    if (j.contains("outcome_labels")) {
        for (const auto& [id, v] : j.at("outcome_labels").items()) {
            const auto label = v.get<std::string>();
            if (label != "positive" && label != "negative")
                throw std::invalid_argument("outcome label for '" + id + "' must be positive or negative");
            n.outcome_labels[id] = label == "positive";
        }
    }
    return n;
}

std::vector<LabeledNote> load_dataset(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open dataset " + file.string());
    std::vector<LabeledNote> notes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            notes.push_back(labeled_note_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return notes;
}

void save_dataset(const std::filesystem::path& file, std::span<const LabeledNote> notes) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write dataset " + file.string());
    for (const auto& n : notes) out << to_json(n).dump() << '\n';
    if (!out) throw std::runtime_error("write failed for " + file.string());
}

void validate_dataset(std::span<const LabeledNote> notes, const Registry& registry) {
    std::set<std::string> seen;
    for (const auto& n : notes) {
        if (!seen.insert(n.note_id).second) throw std::invalid_argument("duplicate note id '" + n.note_id + "'");
        if (n.label_sets.empty()) throw std::invalid_argument("note '" + n.note_id + "' has no label sets");
        for (const auto& s : n.label_sets)
            for (const auto& id : s)
                if (!registry.find(id))
                    throw std::invalid_argument("note '" + n.note_id + "' labels unknown CDR '" + id + "'");
        for (const auto& [id, _] : n.outcome_labels)
            if (!registry.find(id))
                throw std::invalid_argument("note '" + n.note_id + "' has an outcome for unknown CDR '" + id + "'");
    }
}

namespace {

void check_aligned(std::span<const Prediction> p, std::span<const LabeledNote> l) {
    if (p.size() != l.size())
        throw std::invalid_argument("predictions (" + std::to_string(p.size()) + ") and labels (" +
                                    std::to_string(l.size()) + ") differ in length");
    if (p.empty()) throw std::invalid_argument("no notes to score");
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i].note_id != l[i].note_id)
            throw std::invalid_argument("note id mismatch at " + std::to_string(i) + ": '" + p[i].note_id + "' vs '" +
                                        l[i].note_id + "'");
}

CdrSet with_no_cdr(const CdrSet& s) {
    return s.empty() ? CdrSet{kNoCdr} : s;
}

F1Counts note_counts(const CdrSet& predicted, const CdrSet& label) {
    F1Counts c;
    for (const auto& id : predicted) (label.count(id) ? c.tp : c.fp)++;
    for (const auto& id : label)
        if (!predicted.count(id)) ++c.fn;
    return c;
}

bool in_any(const std::vector<CdrSet>& sets, const std::string& id) {
    for (const auto& s : sets)
        if (s.count(id)) return true;
    return false;
}

}  // namespace

double ea_accuracy(std::span<const Prediction> predictions, std::span<const LabeledNote> labels) {
    check_aligned(predictions, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i].failed) continue;
        for (const auto& s : labels[i].label_sets)
            if (s == predictions[i].selected) {
                ++correct;
                break;
            }
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double F1Counts::f1() const {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

F1Counts f1_counts(std::span<const Prediction> predictions, std::span<const LabeledNote> labels) {
    check_aligned(predictions, labels);
    F1Counts total;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const CdrSet predicted = predictions[i].failed ? CdrSet{} : with_no_cdr(predictions[i].selected);
        std::optional<F1Counts> best;
        for (const auto& s : labels[i].label_sets) {
            const F1Counts c = note_counts(predicted, with_no_cdr(s));
            if (!best || c.f1() > best->f1()) best = c;
        }
        if (!best) throw std::invalid_argument("note '" + labels[i].note_id + "' has no label sets");
        total.tp += best->tp;
        total.fp += best->fp;
        total.fn += best->fn;
    }
    return total;
}

double f1_score(std::span<const Prediction> predictions, std::span<const LabeledNote> labels) {
    return f1_counts(predictions, labels).f1();
}

SensSpec sensitivity_specificity(std::span<const Prediction> predictions, std::span<const LabeledNote> labels) {
    check_aligned(predictions, labels);
    SensSpec r;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& p = predictions[i];
        if (p.failed) continue;
        for (const auto& id : p.selected) {
            if (!in_any(labels[i].label_sets, id)) continue;
            auto truth = labels[i].outcome_labels.find(id);
            if (truth == labels[i].outcome_labels.end()) continue;
            auto pred = p.outcome_positive.find(id);
            if (pred == p.outcome_positive.end()) {
                ++r.not_executed;
                continue;
            }
            if (truth->second) (pred->second ? r.tp : r.fn)++;
            else (pred->second ? r.fp : r.tn)++;
        }
    }
    if (r.tp + r.fn > 0) r.sensitivity = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    if (r.tn + r.fp > 0) r.specificity = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
    return r;
}

std::string_view to_string(EvalMode m) {
    return m == EvalMode::Agent ? "agent" : "baseline";
}

std::optional<EvalMode> parse_eval_mode(std::string_view s) {
    if (s == "agent") return EvalMode::Agent;
    if (s == "baseline") return EvalMode::Baseline;
    return std::nullopt;
}

namespace {

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const EvalReport& r) {
    json per = json::array();
    for (const auto& d : r.per_note) {
        json j = {{"note_id", d.note_id},
                  {"selected", d.selected},
                  {"outcomes", d.outcomes},
                  {"ea_correct", d.ea_correct},
                  {"error", d.error ? json(*d.error) : json(nullptr)},
                  {"warnings", d.warnings},
                  {"timings", {{"t_sel", d.t_sel}, {"t_exe", d.t_exe}, {"t_tot", d.t_tot}}}};
        per.push_back(std::move(j));
    }
    return {{"mode", to_string(r.mode)},
            {"notes", r.notes},
            {"failed", r.failed},
            {"registry_digest", r.registry_digest},
            {"ea_accuracy", r.ea_accuracy},
            {"f1", r.f1},
            {"f1_counts", {{"tp", r.f1_counts.tp}, {"fp", r.f1_counts.fp}, {"fn", r.f1_counts.fn}}},
            {"sensitivity", optional_number(r.outcome.sensitivity)},
            {"specificity", optional_number(r.outcome.specificity)},
            {"outcome_counts",
             {{"tp", r.outcome.tp},
              {"fn", r.outcome.fn},
              {"tn", r.outcome.tn},
              {"fp", r.outcome.fp},
              {"not_executed", r.outcome.not_executed}}},
            {"timings", {{"t_sel", optional_number(r.t_sel)}, {"t_exe", optional_number(r.t_exe)},
                         {"t_tot", optional_number(r.t_tot)}}},
            {"per_note", per}};
}

json strip_timings(const json& report) {
    return strip_volatile(report);
}

std::string baseline_prompt(std::string_view note, const Registry& registry) {
    std::string cdrs;
    for (const auto& d : registry.definitions()) {
        cdrs += "- id: " + d.id + "\n  name: " + d.name + "\n  description: " + trim(d.description) + "\n  variables:";
        for (const auto& v : d.variables) cdrs += "\n    - " + v.name + " (" + describe(v.type) + "): " + v.definition;
        cdrs += "\n  rule: " + serialize_rule(d.rule).dump();
        cdrs += "\n  outcomes: ";
        for (std::size_t i = 0; i < d.outcomes.size(); ++i) cdrs += (i ? " | " : "") + d.outcomes[i];
        cdrs += "\n";
    }
    if (!cdrs.empty()) cdrs.pop_back();
    return prompts::render(prompts::baseline_template(), {{"cdrs", cdrs}, {"note", std::string(note)}});
}

namespace {

std::string strip_answer_token(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '`' || s.front() == '*' || s.front() == '"' || s.front() == '\''))
        s.erase(s.begin());
    while (!s.empty() && (s.back() == '`' || s.back() == '*' || s.back() == '"' || s.back() == '\'' || s.back() == '.'))
        s.pop_back();
    return trim(s);
}

const CdrDefinition* find_ci(const Registry& registry, const std::string& id) {
    return registry.find(to_lower(strip_answer_token(id)));
}

}  // namespace

std::optional<BaselineAnswer> parse_baseline_answer(std::string_view answer, const Registry& registry) {
    BaselineAnswer out;
    bool saw_selected = false;
    std::size_t pos = 0;
    while (pos <= answer.size()) {
        auto eol = answer.find('\n', pos);
        if (eol == std::string_view::npos) eol = answer.size();
        std::string line = strip_answer_token(std::string(answer.substr(pos, eol - pos)));
        pos = eol + 1;
        while (!line.empty() && (line.front() == '-' || line.front() == ' ')) line.erase(line.begin());
        const std::string lower = to_lower(line);

        if (lower.rfind("selected", 0) == 0) {
            const auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            saw_selected = true;
            std::string list = line.substr(colon + 1);
            for (char& c : list)
                if (c == ';') c = ',';
            std::size_t p = 0;
            while (p <= list.size()) {
                auto comma = list.find(',', p);
                if (comma == std::string::npos) comma = list.size();
                const std::string token = strip_answer_token(list.substr(p, comma - p));
                p = comma + 1;
                if (token.empty() || to_lower(token) == "none") continue;
                if (const auto* def = find_ci(registry, token)) out.selected.insert(def->id);
                else out.warnings.push_back("unknown CDR '" + token + "' in selection");
            }
        } else if (lower.rfind("outcome", 0) == 0) {
            const auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            const std::string id = line.substr(7, colon - 7);
            const auto* def = find_ci(registry, id);
            if (!def) {
                out.warnings.push_back("outcome for unknown CDR '" + strip_answer_token(id) + "'");
                continue;
            }
            const std::string label = to_lower(strip_answer_token(line.substr(colon + 1)));
            bool matched = false;
            for (const auto& o : def->outcomes)
                if (to_lower(o) == label) {
                    out.outcomes[def->id] = o;
                    matched = true;
                }
            if (!matched) out.warnings.push_back("unrecognized outcome '" + label + "' for " + def->id);
        }
    }
    if (!saw_selected) return std::nullopt;
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

struct NoteRun {
    Prediction prediction;
    NoteDiagnostics diag;
};

NoteRun run_agent(const LabeledNote& n, const Pipeline& pipeline, const PipelineConfig& config) {
    NoteRun r;
    r.prediction.note_id = r.diag.note_id = n.note_id;
    try {
        const AnalysisSession s = pipeline.analyze(n.note, n.note_meta, config);
        r.diag.t_sel = s.timings.t_sel;
        r.diag.t_exe = s.timings.t_exe;
        r.diag.t_tot = s.timings.t_tot;
        if (s.status == SessionStatus::Error) {
            r.prediction.failed = true;
            r.diag.error = s.error.value_or("analysis failed");
            return r;
        }
        r.diag.selected = s.profile.selected;
        r.prediction.selected = CdrSet(s.profile.selected.begin(), s.profile.selected.end());
        for (const auto& res : s.report.per_cdr) {
            switch (res.kind) {
                case ResultKind::Outcome:
                    r.diag.outcomes[res.cdr_id] = res.outcome->label;
                    r.prediction.outcome_positive[res.cdr_id] = res.outcome->is_positive;
                    break;
                case ResultKind::Excluded: r.diag.outcomes[res.cdr_id] = "excluded"; break;
                case ResultKind::Error: r.diag.outcomes[res.cdr_id] = "error: " + res.error; break;
                case ResultKind::Pending: r.diag.outcomes[res.cdr_id] = "pending"; break;
            }
        }
        for (const auto& ev : s.extractions)
            for (const auto& w : ev.warnings) r.diag.warnings.push_back(ev.cdr_id + ": " + w);
    } catch (const std::exception& e) {
        r.prediction.failed = true;
        r.diag.error = e.what();
    }
    return r;
}

NoteRun run_baseline(const LabeledNote& n, const Registry& registry, LlmProvider& llm) {
    NoteRun r;
    r.prediction.note_id = r.diag.note_id = n.note_id;
    const auto start = Clock::now();
    try {
        const std::string answer = llm.complete({trim(prompts::system_text()), baseline_prompt(n.note, registry), 0.0});
        auto parsed = parse_baseline_answer(answer, registry);
        if (!parsed) throw std::runtime_error("baseline answer has no 'selected:' line");
        r.prediction.selected = parsed->selected;
        r.diag.selected.assign(parsed->selected.begin(), parsed->selected.end());
        r.diag.warnings = parsed->warnings;
        for (const auto& id : parsed->selected) {
            auto it = parsed->outcomes.find(id);
            if (it == parsed->outcomes.end()) {
                r.diag.outcomes[id] = "error: no outcome given";
                continue;
            }
            r.diag.outcomes[id] = it->second;
            r.prediction.outcome_positive[id] = registry.find(id)->is_positive(it->second);
        }
    } catch (const std::exception& e) {
        r.prediction.failed = true;
        r.diag.error = e.what();
    }
    r.diag.t_tot = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

}  // namespace

EvalReport run_eval(std::span<const LabeledNote> dataset, std::shared_ptr<const Registry> registry,
                    std::shared_ptr<EmbeddingProvider> embedder, std::shared_ptr<LlmProvider> llm,
                    const EvalOptions& options) {
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");
    if (options.parallelism < 1) throw std::invalid_argument("parallelism must be at least 1");
    validate_dataset(dataset, *registry);

    PipelineConfig config = options.pipeline;
    config.interactive = false;
    const Pipeline pipeline(registry, embedder, llm, config);

    std::vector<NoteRun> runs(dataset.size());
    const auto run = [&](std::size_t i) {
        runs[i] = options.mode == EvalMode::Agent ? run_agent(dataset[i], pipeline, config)
                                                  : run_baseline(dataset[i], *registry, *llm);
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), dataset.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < dataset.size(); ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < dataset.size(); i = next++) run(i);
            });
        for (auto& th : pool) th.join();
    }

    EvalReport report;
    report.mode = options.mode;
    report.notes = dataset.size();
    report.registry_digest = registry->source_digest();
    std::vector<Prediction> predictions;
    predictions.reserve(runs.size());
    double sum_sel = 0, sum_exe = 0, sum_tot = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        auto& r = runs[i];
        if (r.prediction.failed) {
            ++report.failed;
        } else {
            sum_sel += r.diag.t_sel;
            sum_exe += r.diag.t_exe;
            sum_tot += r.diag.t_tot;
            for (const auto& s : dataset[i].label_sets)
                if (s == r.prediction.selected) r.diag.ea_correct = true;
        }
        predictions.push_back(r.prediction);
        report.per_note.push_back(std::move(r.diag));
    }
    report.ea_accuracy = ea_accuracy(predictions, dataset);
    report.f1_counts = f1_counts(predictions, dataset);
    report.f1 = report.f1_counts.f1();
    report.outcome = sensitivity_specificity(predictions, dataset);

    const std::size_t ok = report.notes - report.failed;
    if (ok > 0) {
        const double n = static_cast<double>(ok);
        report.t_tot = sum_tot / n;
        if (options.mode == EvalMode::Agent) {
            report.t_sel = sum_sel / n;
            report.t_exe = sum_exe / n;
        }
    }
    return report;
}

}  // namespace cdr

// cdr-agent: command-line front end for the CDR pipeline.

#include <csignal>
#include <unistd.h>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cdr/eval.hpp"
#include "cdr/pipeline.hpp"
#include "cdr/serialization.hpp"
#include "cdr/service.hpp"

namespace {

using namespace cdr;

struct CommonOptions {
    std::vector<std::string> registries;
    std::string provider = "mock";
    std::string llm_fixture;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_providers = true) {
    cmd->add_option("--registry", o.registries, "CDR definition directory (repeatable)");
    if (!with_providers) return;
    cmd->add_option("--provider", o.provider, "Embedding/LLM backends")->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_option("--llm-fixture", o.llm_fixture, "Canned responses for the mock LLM")->check(CLI::ExistingFile);
}

std::vector<std::filesystem::path> registry_dirs(const CommonOptions& o) {
    if (!o.registries.empty()) return {o.registries.begin(), o.registries.end()};
    if (const char* env = std::getenv("CDR_AGENT_REGISTRY")) return {env};
    return {CDR_DEFAULT_REGISTRY};
}

std::shared_ptr<const Registry> load(const CommonOptions& o) {
    const auto dirs = registry_dirs(o);
    return std::make_shared<const Registry>(load_registry(dirs));
}

std::pair<std::shared_ptr<EmbeddingProvider>, std::shared_ptr<LlmProvider>> providers(const CommonOptions& o) {
    if (o.provider == "remote") {
        return {std::make_shared<RemoteEmbeddingProvider>(RemoteEmbeddingConfig::from_env()),
                std::make_shared<RemoteLlmProvider>(RemoteLlmConfig::from_env())};
    }
    auto llm = o.llm_fixture.empty() ? std::make_shared<MockLlmProvider>()
                                     : std::make_shared<MockLlmProvider>(MockLlmProvider::from_fixture_file(o.llm_fixture));
    return {std::make_shared<MockEmbeddingProvider>(), llm};
}

std::string read_text(const std::string& path) {
    std::ostringstream ss;
    if (path == "-") {
        ss << std::cin.rdbuf();
    } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path);
        ss << in.rdbuf();
    }
    return ss.str();
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

void print_session(const AnalysisSession& s, const Registry& registry, std::ostream& out) {
    out << "session " << s.session_id << "  status " << to_string(s.status) << "\n";
    if (s.error) out << "error: " << *s.error << "\n";
    if (s.profile.per_cdr.empty()) return;

    out << "\nselection (mu " << fixed(s.profile.mu_hat) << ", sigma " << fixed(s.profile.sigma_hat) << ", alpha "
        << s.profile.alpha << ")\n";
    std::vector<std::pair<std::string, const CdrScore*>> rows;
    for (const auto& [id, score] : s.profile.per_cdr) rows.emplace_back(id, &score);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.second->statistic != b.second->statistic ? a.second->statistic > b.second->statistic : a.first < b.first;
    });
    for (const auto& [id, score] : rows) {
        const bool sel = std::find(s.profile.selected.begin(), s.profile.selected.end(), id) != s.profile.selected.end();
        out << "  " << (sel ? "* " : "  ") << std::left << std::setw(22) << id << std::right << " score "
            << fixed(score->statistic) << "  z " << std::setw(7) << fixed(score->zscore, 2) << "  p "
            << fixed(score->p_value) << "\n";
    }
    if (s.profile.selected.empty()) {
        out << "\nno applicable CDR\n";
        return;
    }

    out << "\nresults\n";
    for (const auto& r : s.report.per_cdr) {
        out << "  " << r.cdr_id << ": ";
        switch (r.kind) {
            case ResultKind::Outcome:
                out << r.outcome->label << (r.outcome->is_positive ? "  [positive]" : "") << "\n";
                break;
            case ResultKind::Excluded:
                out << "excluded\n";
                for (const auto& why : r.reasons) out << "      " << why << "\n";
                break;
            case ResultKind::Error:
                out << "error: " << r.error << "\n";
                break;
            case ResultKind::Pending:
                out << "waiting for " << r.pending.size() << " variable(s)\n";
                break;
        }
        for (const auto& ev : s.extractions) {
            if (ev.cdr_id != r.cdr_id) continue;
            const auto* def = registry.find(ev.cdr_id);
            for (const auto& spec : def->variables) {
                out << "      " << std::left << std::setw(30) << spec.name << std::right;
                if (auto it = ev.values.find(spec.name); it != ev.values.end())
                    out << display(it->second.value) << "  (" << to_string(it->second.provenance) << ")\n";
                else
                    out << "?\n";
            }
            for (const auto& w : ev.warnings) out << "      warning: " << w << "\n";
        }
    }
    out << "\ntimings  t_sel " << fixed(s.timings.t_sel) << " s  t_exe " << fixed(s.timings.t_exe) << " s  t_tot "
        << fixed(s.timings.t_tot) << " s\n";
}

// Asks for every pending variable on the terminal until the session
// completes. Returns false on end of input.
bool prompt_pending(AnalysisSession& s, const Pipeline& pipeline) {
    while (s.status == SessionStatus::AwaitingInput) {
        const auto [cdr_id, names] = *s.pending.begin();
        const auto* def = pipeline.registry().find(cdr_id);
        std::cout << "\n" << def->name << " needs " << names.size() << " value(s) the note does not give:\n";
        std::map<std::string, nlohmann::json> values;
        for (const auto& name : names) {
            const auto* spec = def->find_variable(name);
            for (;;) {
                std::cout << "  " << name << " (" << describe(spec->type) << ") - " << spec->definition << "\n  > "
                          << std::flush;
                std::string line;
                if (!std::getline(std::cin, line)) return false;
                if (auto v = coerce(line, spec->type)) {
                    values.emplace(name, to_json(*v));
                    break;
                }
                std::cout << "  not a valid " << describe(spec->type) << "\n";
            }
        }
        pipeline.resolve_variables(s, cdr_id, values);
    }
    return true;
}

int cmd_analyze(const CommonOptions& common, const std::string& note_file, const SelectionConfig& sel,
                bool interactive, bool as_json, std::optional<double> age, const std::string& sex) {
    auto registry = load(common);
    auto [embedder, llm] = providers(common);
    PipelineConfig config;
    config.selection = sel;
    config.interactive = interactive;
    Pipeline pipeline(registry, embedder, llm, config);

    NoteMeta meta;
    meta.patient_age_years = age;
    if (!sex.empty()) meta.patient_sex = sex;

    AnalysisSession s = pipeline.analyze(trim(read_text(note_file)), meta, config);
    if (interactive && s.status == SessionStatus::AwaitingInput) {
        print_session(s, *registry, std::cout);
        if (!prompt_pending(s, pipeline)) {
            std::cerr << "input ended with variables still pending\n";
            return 1;
        }
        std::cout << "\n";
    }
    if (as_json) std::cout << to_json(s).dump(2) << "\n";
    else print_session(s, *registry, std::cout);
    return s.status == SessionStatus::Error ? 1 : 0;
}

int cmd_validate(const CommonOptions& common) {
    int errors = 0;
    std::size_t files = 0;
    std::set<std::string> ids;
    for (const auto& dir : registry_dirs(common)) {
        std::vector<std::filesystem::path> paths;
        if (!std::filesystem::is_directory(dir)) {
            std::cout << dir.string() << ": not a directory\n";
            ++errors;
            continue;
        }
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".json") paths.push_back(e.path());
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) {
            ++files;
            try {
                const auto def = parse_definition_file(p);
                const auto violations = validate_definition(def);
                if (!ids.insert(def.id).second) {
                    std::cout << p.string() << ": DUPLICATE_ID " << def.id << "\n";
                    ++errors;
                }
                for (const auto& v : violations) std::cout << p.string() << ": " << v.code << " " << v.path << " " << v.message << "\n";
                errors += static_cast<int>(violations.size());
                if (!violations.empty()) continue;
                for (const auto& v : lint_definition(def))
                    std::cout << p.string() << ": warning " << v.code << " " << v.path << " " << v.message << "\n";
                const auto mono = check_boolean_monotonicity(def);
                if (!mono.monotone)
                    std::cout << p.string() << ": note: not monotone in its boolean inputs (" << mono.counterexample << ")\n";
                std::cout << p.string() << ": ok (" << def.id << ", " << def.variables.size() << " variables, depth "
                          << rule_depth(def.rule) << ")\n";
            } catch (const RegistryError& e) {
                std::cout << e.file() << ":" << e.line() << ": " << e.field() << ": " << e.what() << "\n";
                ++errors;
            }
        }
    }
    if (files == 0) {
        std::cout << "no definitions found\n";
        return 1;
    }
    std::cout << files << " file(s), " << errors << " error(s)\n";
    return errors == 0 ? 0 : 1;
}

int cmd_serve(const CommonOptions& common, const std::string& host, int port, int ttl, const std::string& journal,
              int parallelism) {
    // Block the signals before any thread starts so only the waiter sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto registry = load(common);
    auto [embedder, llm] = providers(common);
    PipelineConfig config;
    config.extraction_parallelism = parallelism;
    auto pipeline = std::make_shared<const Pipeline>(registry, embedder, llm, config);
    auto store = std::make_shared<SessionStore>(
        std::chrono::seconds(ttl), journal.empty() ? std::nullopt : std::optional<std::filesystem::path>(journal));
    if (const auto n = store->recover()) std::cerr << "recovered " << n << " session(s) from " << journal << "\n";
    auto sessions = std::make_shared<SessionManager>(pipeline, store);

    Service service(sessions);
    const int bound = service.bind(host, port);
    std::cerr << "cdr-agent listening on " << host << ":" << bound << " with " << registry->size() << " CDR(s)\n";

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        std::cerr << "signal " << sig << ", shutting down\n";
        service.stop();
    });
    service.listen();
    // listen() can also return on its own (socket error); wake the waiter.
    kill(getpid(), SIGTERM);
    waiter.join();
    return 0;
}

int cmd_eval(const CommonOptions& common, const std::string& dataset_file, const std::string& mode_name,
             const std::string& out_file, const SelectionConfig& sel, int parallelism, bool no_timings) {
    auto registry = load(common);
    auto [embedder, llm] = providers(common);
    const auto dataset = load_dataset(dataset_file);
    EvalOptions options;
    options.mode = *parse_eval_mode(mode_name);
    options.pipeline.selection = sel;
    options.parallelism = parallelism;
    const auto report = run_eval(dataset, registry, embedder, llm, options);
    const auto doc = no_timings ? strip_timings(to_json(report)) : to_json(report);
    if (out_file.empty() || out_file == "-") {
        std::cout << doc.dump(2) << "\n";
    } else {
        std::ofstream out(out_file);
        out << doc.dump(2) << "\n";
        if (!out) throw std::runtime_error("cannot write " + out_file);
    }
    std::cerr << to_string(report.mode) << ": " << report.notes << " notes, " << report.failed << " failed, EA "
              << fixed(report.ea_accuracy) << ", F1 " << fixed(report.f1) << "\n";
    return 0;
}

int cmd_gen_synthetic(const CommonOptions& common, const std::string& tabular, const std::string& templates,
                      std::size_t n, double fraction, std::uint64_t seed, bool paraphrase, const std::string& out) {
    SyntheticOptions options;
    options.n = n;
    options.positive_fraction = fraction;
    options.seed = seed;
    std::shared_ptr<LlmProvider> llm;
    if (paraphrase) {
        llm = providers(common).second;
        options.paraphrase = llm.get();
    }
    const auto notes = gen_synthetic(read_csv(tabular), load_templates(templates), options);
    save_dataset(out, notes);
    std::size_t positives = 0;
    for (const auto& note : notes)
        for (const auto& [_, pos] : note.outcome_labels) positives += pos;
    std::cerr << "wrote " << notes.size() << " notes (" << positives << " positive) to " << out << "\n";
    return 0;
}

void add_selection(CLI::App* cmd, SelectionConfig& sel) {
    cmd->add_option("--alpha", sel.alpha, "Significance level for CDR selection")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--truncations", sel.num_truncations, "Random note truncations")->check(CLI::NonNegativeNumber);
    cmd->add_option("--retention", sel.retention_ratio, "Fraction of tokens each truncation keeps");
    cmd->add_option("--seed", sel.rng_seed, "Truncation RNG seed");
    cmd->add_flag("--keywords", sel.include_keywords, "Append CDR keywords to the selection text");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clinical decision rule agent"};
    app.require_subcommand(1);
    CommonOptions common;
    SelectionConfig sel;

    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    add_common(serve, common);
    std::string host = "127.0.0.1";
    int port = 8080, ttl = 4 * 3600, parallelism = 1;
    std::string journal;
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port, 0 for any free one")->check(CLI::Range(0, 65535));
    serve->add_option("--session-ttl", ttl, "Idle seconds before a session expires")->check(CLI::PositiveNumber);
    serve->add_option("--journal", journal, "Append sessions to this JSON-lines file and recover them on start");
    serve->add_option("--parallelism", parallelism, "Concurrent extractions per note")->check(CLI::PositiveNumber);

    auto* analyze = app.add_subcommand("analyze", "Analyze one note and print the report");
    add_common(analyze, common);
    add_selection(analyze, sel);
    std::string note_file;
    bool interactive = false, as_json = false;
    std::optional<double> age;
    std::string sex;
    analyze->add_option("--note", note_file, "Note file, - for stdin")->required();
    analyze->add_flag("--interactive", interactive, "Ask for variables the note does not give");
    analyze->add_flag("--json", as_json, "Print the session as JSON");
    analyze->add_option("--age", age, "Patient age in years");
    analyze->add_option("--sex", sex, "Patient sex")->check(CLI::IsMember({"female", "male", "other"}));

    auto* validate = app.add_subcommand("validate", "Check CDR definitions");
    add_common(validate, common, false);

    auto* eval = app.add_subcommand("eval", "Score agent or baseline on a labeled dataset");
    add_common(eval, common);
    add_selection(eval, sel);
    std::string dataset, mode = "agent", out;
    eval->add_option("--dataset", dataset, "JSON-lines dataset")->required()->check(CLI::ExistingFile);
    eval->add_option("--mode", mode, "agent or baseline")->check(CLI::IsMember({"agent", "baseline"}));
    eval->add_option("--out", out, "Report file (default stdout)");
    eval->add_option("--parallelism", parallelism, "Notes evaluated concurrently")->check(CLI::PositiveNumber);
    bool no_timings = false;
    eval->add_flag("--no-timings", no_timings, "Leave run-dependent timings out of the report");

    auto* gen = app.add_subcommand("gen-synthetic", "Render template notes from a feature table");
    add_common(gen, common);
    std::string tabular, templates, gen_out;
    std::size_t n = 0;
    double fraction = 0.2;
    std::uint64_t seed = 0;
    bool paraphrase = false;
    gen->add_option("--tabular", tabular, "Feature CSV")->required()->check(CLI::ExistingFile);
    gen->add_option("--templates", templates, "Sentence templates JSON")->required()->check(CLI::ExistingFile);
    gen->add_option("--n", n, "Number of notes")->required();
    gen->add_option("--positive-fraction", fraction, "Share of positive-outcome notes")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--seed", seed, "Sampling seed");
    gen->add_flag("--paraphrase", paraphrase, "Rewrite each note through the LLM provider");
    gen->add_option("--out", gen_out, "Output JSON-lines file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) return cmd_serve(common, host, port, ttl, journal, parallelism);
        if (*analyze) return cmd_analyze(common, note_file, sel, interactive, as_json, age, sex);
        if (*validate) return cmd_validate(common);
        if (*eval) return cmd_eval(common, dataset, mode, out, sel, parallelism, no_timings);
        if (*gen) return cmd_gen_synthetic(common, tabular, templates, n, fraction, seed, paraphrase, gen_out);
    } catch (const RegistryError& e) {
        std::cerr << "registry error: " << e.file() << ":" << e.line() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

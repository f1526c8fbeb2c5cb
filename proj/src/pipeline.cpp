#include "cdr/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "cdr/serialization.hpp"

namespace cdr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct CdrWork {
    ExtractedVariables variables;
    ExclusionVerdict verdict;
    CdrResult result;
    std::vector<std::string> pending;
    double seconds = 0;
};

CdrWork process_cdr(std::string_view note, const NoteMeta& meta, const CdrDefinition& def, LlmProvider& llm,
                    const PipelineConfig& config) {
    const auto start = Clock::now();
    CdrWork w;
    ExtractionResult ex = extract(note, def, llm, config.extraction);
    w.variables = std::move(ex.variables);
    w.verdict.cdr_id = def.id;

    if (ex.error) {
        w.result = execute_item({&def, w.variables, w.verdict, "variable extraction failed: " + *ex.error});
    } else if (config.interactive) {
        // Exclusions are checked on what the note gave us; a CDR that is
        // already excluded never asks the clinician for anything.
        w.verdict = apply_exclusions(w.variables, meta, def);
        if (!w.verdict.excluded && !w.variables.complete()) {
            w.pending = w.variables.missing;
            w.result.cdr_id = def.id;
            w.result.kind = ResultKind::Pending;
            w.result.pending = w.pending;
        } else {
            w.result = execute_item({&def, w.variables, w.verdict, std::nullopt});
        }
    } else {
        w.variables = impute_negative(std::move(w.variables), def);
        w.verdict = apply_exclusions(w.variables, meta, def);
        w.result = execute_item({&def, w.variables, w.verdict, std::nullopt});
    }
    w.seconds = seconds_since(start);
    return w;
}

}  // namespace

std::string_view to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::Selected: return "selected";
        case SessionStatus::AwaitingInput: return "awaiting_input";
        case SessionStatus::Completed: return "completed";
        case SessionStatus::Error: return "error";
    }
    return "error";
}

std::optional<SessionStatus> parse_session_status(std::string_view s) {
    if (s == "selected") return SessionStatus::Selected;
    if (s == "awaiting_input") return SessionStatus::AwaitingInput;
    if (s == "completed") return SessionStatus::Completed;
    if (s == "error") return SessionStatus::Error;
    return std::nullopt;
}

void PipelineConfig::validate() const {
    selection.validate();
    if (extraction_parallelism < 1) throw std::invalid_argument("extraction_parallelism must be at least 1");
    if (extraction.max_attempts < 1) throw std::invalid_argument("extraction max_attempts must be at least 1");
}

Pipeline::Pipeline(std::shared_ptr<const Registry> registry, std::shared_ptr<EmbeddingProvider> embedder,
                   std::shared_ptr<LlmProvider> llm, PipelineConfig defaults)
    : registry_(std::move(registry)), embedder_(std::move(embedder)), llm_(std::move(llm)),
      defaults_(std::move(defaults)) {
    if (!registry_ || !embedder_ || !llm_) throw std::invalid_argument("pipeline needs a registry and both providers");
    defaults_.validate();
}

AnalysisSession Pipeline::analyze(std::string_view note, const NoteMeta& meta) const {
    return analyze(note, meta, defaults_);
}

AnalysisSession Pipeline::analyze(std::string_view note, const NoteMeta& meta, const PipelineConfig& config) const {
    if (trim(note).empty()) throw std::invalid_argument("note is empty");
    config.validate();

    const auto start = Clock::now();
    AnalysisSession s;
    s.session_id = new_session_id();
    s.note = std::string(note);
    s.note_meta = meta;
    s.interactive = config.interactive;
    s.selection = config.selection;

    try {
        s.profile = select_cdrs(note, *registry_, config.selection, *embedder_, &cache_);
    } catch (const std::exception& e) {
        s.status = SessionStatus::Error;
        s.error = std::string("CDR selection failed: ") + e.what();
        s.timings.t_sel = s.timings.t_tot = seconds_since(start);
        return s;
    }
    s.timings.t_sel = seconds_since(start);
    s.status = SessionStatus::Selected;

    const auto& ids = s.profile.selected;
    std::vector<CdrWork> work(ids.size());
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.extraction_parallelism),
                                                      ids.size());
    const auto run = [&](std::size_t i) {
        const CdrDefinition* def = registry_->find(ids[i]);
        work[i] = process_cdr(note, meta, *def, *llm_, config);
    };
    if (workers <= 1) {
        for (std::size_t i = 0; i < ids.size(); ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < ids.size(); i = next++) run(i);
            });
        for (auto& th : pool) th.join();
    }

    double total_cdr_seconds = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& w = work[i];
        total_cdr_seconds += w.seconds;
        if (!w.pending.empty()) s.pending[ids[i]] = w.pending;
        s.extractions.push_back(std::move(w.variables));
        s.verdicts.push_back(std::move(w.verdict));
        s.report.per_cdr.push_back(std::move(w.result));
    }
    s.report.durations["selection"] = s.timings.t_sel;
    s.report.durations["execution"] = total_cdr_seconds;

    s.timings.t_exe = ids.empty() ? 0.0 : total_cdr_seconds / static_cast<double>(ids.size());
    s.timings.t_tot = seconds_since(start);
    s.status = s.pending.empty() ? SessionStatus::Completed : SessionStatus::AwaitingInput;
    return s;
}

void Pipeline::resolve_variables(AnalysisSession& session, const std::string& cdr_id,
                                 const std::map<std::string, nlohmann::json>& values) const {
    if (session.status != SessionStatus::AwaitingInput)
        throw SessionError(SessionError::Code::NotAwaitingInput,
                           "session is " + std::string(to_string(session.status)) + ", not awaiting input");
    auto pending_it = session.pending.find(cdr_id);
    if (pending_it == session.pending.end())
        throw SessionError(SessionError::Code::NotPending, "no variables pending for CDR '" + cdr_id + "'");
    const CdrDefinition* def = registry_->find(cdr_id);
    if (!def) throw SessionError(SessionError::Code::NotPending, "CDR '" + cdr_id + "' is not in the registry");

    auto& pending = pending_it->second;
    std::map<std::string, Value> typed;
    for (const auto& [name, raw] : values) {
        if (std::find(pending.begin(), pending.end(), name) == pending.end())
            throw SessionError(SessionError::Code::UnknownVariable,
                               "'" + name + "' is not a pending variable of '" + cdr_id + "'");
        const VariableSpec* spec = def->find_variable(name);
        auto v = spec ? coerce_json(raw, spec->type) : std::nullopt;
        if (!v)
            throw SessionError(SessionError::Code::TypeMismatch,
                               "value " + raw.dump() + " for '" + name + "' is not a valid " +
                                   (spec ? describe(spec->type) : std::string("value")));
        typed.emplace(name, std::move(*v));
    }

    std::size_t idx = 0;
    while (idx < session.extractions.size() && session.extractions[idx].cdr_id != cdr_id) ++idx;
    if (idx == session.extractions.size())
        throw SessionError(SessionError::Code::NotPending, "session has no extraction for '" + cdr_id + "'");

    // Validated; mutate from here on.
    auto& ev = session.extractions[idx];
    for (auto& [name, v] : typed) {
        ev.values.insert_or_assign(name, TypedValue{std::move(v), Provenance::UserSupplied});
        std::erase(ev.missing, name);
        std::erase(pending, name);
    }

    auto result_it = std::find_if(session.report.per_cdr.begin(), session.report.per_cdr.end(),
                                  [&](const CdrResult& r) { return r.cdr_id == cdr_id; });
    if (pending.empty()) {
        session.pending.erase(pending_it);
        session.verdicts[idx] = apply_exclusions(ev, session.note_meta, *def);
        CdrResult r = execute_item({def, ev, session.verdicts[idx], std::nullopt});
        if (result_it != session.report.per_cdr.end()) *result_it = std::move(r);
        else session.report.per_cdr.push_back(std::move(r));
    } else if (result_it != session.report.per_cdr.end()) {
        result_it->pending = pending;
    }
    if (session.pending.empty()) session.status = SessionStatus::Completed;
}

std::string new_session_id() {
    static thread_local std::mt19937_64 rng{[] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
        return std::mt19937_64(seq);
    }()};
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int half = 0; half < 2; ++half) {
        std::uint64_t x = rng();
        for (int i = 0; i < 16; ++i, x >>= 4) id += kHex[x & 0xf];
    }
    return id;
}

SessionStore::SessionStore(std::chrono::seconds ttl, std::optional<std::filesystem::path> journal)
    : ttl_(ttl), journal_path_(std::move(journal)) {
    if (ttl_.count() <= 0) throw std::invalid_argument("session TTL must be positive");
}

std::size_t SessionStore::recover() {
    if (!journal_path_ || !std::filesystem::exists(*journal_path_)) return 0;
    std::ifstream in(*journal_path_);
    std::map<std::string, AnalysisSession> latest;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            auto s = session_from_json(nlohmann::json::parse(line));
            latest.insert_or_assign(s.session_id, std::move(s));
        } catch (const std::exception&) {
            // A torn final line from a crash is expected; skip it.
        }
    }
    std::lock_guard lock(mutex_);
    for (auto& [id, s] : latest) {
        auto slot = std::make_shared<Slot>();
        slot->session = std::move(s);
        slot->last_access = Clock::now();
        slots_.insert_or_assign(id, std::move(slot));
    }
    return latest.size();
}

void SessionStore::journal(const AnalysisSession& session) {
    if (!journal_path_) return;
    const std::string line = to_json(session).dump() + "\n";
    std::lock_guard lock(journal_mutex_);
    std::ofstream out(*journal_path_, std::ios::app);
    out << line;
    out.flush();
    if (!out) throw std::runtime_error("cannot append to session journal " + journal_path_->string());
}

void SessionStore::put(const AnalysisSession& session) {
    purge_expired();
    auto slot = std::make_shared<Slot>();
    slot->session = session;
    slot->last_access = Clock::now();
    journal(session);
    std::lock_guard lock(mutex_);
    slots_.insert_or_assign(session.session_id, std::move(slot));
}

std::shared_ptr<SessionStore::Slot> SessionStore::slot(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = slots_.find(id);
    if (it == slots_.end()) return nullptr;
    if (Clock::now() - it->second->last_access > ttl_) {
        slots_.erase(it);
        return nullptr;
    }
    return it->second;
}

std::optional<AnalysisSession> SessionStore::get(const std::string& id) {
    auto s = slot(id);
    if (!s) return std::nullopt;
    std::lock_guard lock(s->mutex);
    s->last_access = Clock::now();
    return s->session;
}

AnalysisSession SessionStore::update(const std::string& id, const std::function<void(AnalysisSession&)>& mutate) {
    auto s = slot(id);
    if (!s) throw SessionError(SessionError::Code::UnknownSession, "unknown session '" + id + "'");
    std::lock_guard lock(s->mutex);
    AnalysisSession copy = s->session;
    mutate(copy);
    journal(copy);
    s->session = copy;
    s->last_access = Clock::now();
    return copy;
}

std::size_t SessionStore::purge_expired() {
    std::lock_guard lock(mutex_);
    const auto now = Clock::now();
    return std::erase_if(slots_, [&](const auto& kv) { return now - kv.second->last_access > ttl_; });
}

std::size_t SessionStore::size() const {
    std::lock_guard lock(mutex_);
    return slots_.size();
}

SessionManager::SessionManager(std::shared_ptr<const Pipeline> pipeline, std::shared_ptr<SessionStore> store)
    : pipeline_(std::move(pipeline)), store_(std::move(store)) {
    if (!pipeline_ || !store_) throw std::invalid_argument("session manager needs a pipeline and a store");
}

AnalysisSession SessionManager::analyze(std::string_view note, const NoteMeta& meta, const PipelineConfig& config) {
    AnalysisSession s = pipeline_->analyze(note, meta, config);
    store_->put(s);
    return s;
}

AnalysisSession SessionManager::resolve_variables(const std::string& session_id, const std::string& cdr_id,
                                                  const std::map<std::string, nlohmann::json>& values) {
    return store_->update(session_id,
                          [&](AnalysisSession& s) { pipeline_->resolve_variables(s, cdr_id, values); });
}

std::optional<AnalysisSession> SessionManager::get(const std::string& session_id) {
    return store_->get(session_id);
}

}  // namespace cdr

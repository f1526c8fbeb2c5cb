#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cdr/embedding.hpp"
#include "cdr/extraction.hpp"
#include "cdr/llm.hpp"
#include "cdr/registry.hpp"
#include "cdr/rule_executor.hpp"
#include "cdr/selection.hpp"

namespace cdr {

enum class SessionStatus { Selected, AwaitingInput, Completed, Error };

std::string_view to_string(SessionStatus s);
std::optional<SessionStatus> parse_session_status(std::string_view s);

/// Wall-clock seconds. t_exe is the mean per-CDR extraction + execution
/// time; t_tot spans the whole analysis.
struct Timings {
    double t_sel = 0;
    double t_exe = 0;
    double t_tot = 0;

    friend bool operator==(const Timings&, const Timings&) = default;
};

struct AnalysisSession {
    std::string session_id;
    std::string note;
    NoteMeta note_meta;
    bool interactive = false;
    SelectionConfig selection;
    SimilarityProfile profile;
    /// In selection order, one per selected CDR.
    std::vector<ExtractedVariables> extractions;
    std::vector<ExclusionVerdict> verdicts;
    /// Variables awaiting human input, per CDR (interactive mode only).
    std::map<std::string, std::vector<std::string>> pending;
    ExecutionReport report;
    Timings timings;
    SessionStatus status = SessionStatus::Selected;
    std::optional<std::string> error;

    friend bool operator==(const AnalysisSession&, const AnalysisSession&) = default;
};

struct PipelineConfig {
    SelectionConfig selection;
    bool interactive = false;
    int extraction_parallelism = 1;
    ExtractionOptions extraction;

    void validate() const;
};

/// Raised by resolve_variables(); the session is left unchanged.
class SessionError : public std::runtime_error {
public:
    enum class Code { UnknownSession, NotAwaitingInput, NotPending, UnknownVariable, TypeMismatch };

    SessionError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Code code() const { return code_; }

private:
    Code code_;
};

/// Selection -> extraction -> exclusion -> execution for one note.
/// Stateless apart from the CDR embedding cache; safe to share.
class Pipeline {
public:
    Pipeline(std::shared_ptr<const Registry> registry, std::shared_ptr<EmbeddingProvider> embedder,
             std::shared_ptr<LlmProvider> llm, PipelineConfig defaults = {});

    /// Never throws for provider trouble: selection failures yield
    /// status Error with the cause, extraction failures become per-CDR
    /// error records. Throws std::invalid_argument for an empty note or
    /// an invalid config.
    AnalysisSession analyze(std::string_view note, const NoteMeta& meta, const PipelineConfig& config) const;
    AnalysisSession analyze(std::string_view note, const NoteMeta& meta = {}) const;

    /// Stores clinician-supplied values for pending variables of one
    /// CDR; once a CDR has nothing pending it runs exclusion + execution,
    /// and once nothing is pending at all the session completes.
    /// Validates everything before mutating; throws SessionError.
    void resolve_variables(AnalysisSession& session, const std::string& cdr_id,
                           const std::map<std::string, nlohmann::json>& values) const;

    const Registry& registry() const { return *registry_; }
    const PipelineConfig& defaults() const { return defaults_; }
    const EmbeddingCache& cache() const { return cache_; }

private:
    std::shared_ptr<const Registry> registry_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    std::shared_ptr<LlmProvider> llm_;
    PipelineConfig defaults_;
    mutable EmbeddingCache cache_;
};

std::string new_session_id();

/// In-memory sessions with idle expiry and an optional append-only
/// JSON-lines journal (one full session per line, last line per id wins).
/// Mutations of one session are serialized.
class SessionStore {
public:
    explicit SessionStore(std::chrono::seconds ttl = std::chrono::hours(4),
                          std::optional<std::filesystem::path> journal = std::nullopt);

    /// Replays the journal, if configured and present. Returns the number
    /// of sessions restored.
    std::size_t recover();

    void put(const AnalysisSession& session);
    std::optional<AnalysisSession> get(const std::string& id);

    /// Applies `mutate` under the session's lock and persists the result.
    /// A throwing `mutate` leaves the stored session unchanged.
    AnalysisSession update(const std::string& id, const std::function<void(AnalysisSession&)>& mutate);

    std::size_t purge_expired();
    std::size_t size() const;

private:
    struct Slot {
        std::mutex mutex;
        AnalysisSession session;
        std::chrono::steady_clock::time_point last_access;
    };

    std::shared_ptr<Slot> slot(const std::string& id);
    void journal(const AnalysisSession& session);

    std::chrono::seconds ttl_;
    std::optional<std::filesystem::path> journal_path_;
    mutable std::mutex mutex_;
    std::mutex journal_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
};

/// Pipeline plus session storage: the surface behind the HTTP API and
/// the interactive CLI.
class SessionManager {
public:
    SessionManager(std::shared_ptr<const Pipeline> pipeline, std::shared_ptr<SessionStore> store);

    AnalysisSession analyze(std::string_view note, const NoteMeta& meta, const PipelineConfig& config);
    AnalysisSession resolve_variables(const std::string& session_id, const std::string& cdr_id,
                                      const std::map<std::string, nlohmann::json>& values);
    std::optional<AnalysisSession> get(const std::string& session_id);

    const Pipeline& pipeline() const { return *pipeline_; }

private:
    std::shared_ptr<const Pipeline> pipeline_;
    std::shared_ptr<SessionStore> store_;
};

}  // namespace cdr

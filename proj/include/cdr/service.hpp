#pragma once

#include <memory>
#include <string>
#include <thread>

#include "cdr/pipeline.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace cdr {

/// Parses the optional `overrides` object of POST /v1/analyze on top of
/// `base`. Accepted keys: alpha, num_truncations, retention_ratio,
/// rng_seed, include_keywords, interactive, extraction_parallelism.
/// Throws std::invalid_argument on unknown keys or bad values.
PipelineConfig apply_overrides(PipelineConfig base, const nlohmann::json& overrides);

/// JSON API over a SessionManager:
///   GET  /healthz
///   GET  /v1/registry, GET /v1/registry/{id}
///   POST /v1/analyze                {note, note_meta?, overrides?}
///   GET  /v1/sessions/{id}
///   POST /v1/sessions/{id}/variables {cdr_id, values}
/// Errors are {"error": {"code", "message"}} with 400, 404, 409, 422,
/// 502 (provider) or 500.
class Service {
public:
    explicit Service(std::shared_ptr<SessionManager> sessions);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds; port 0 picks a free one. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Call after bind().
    void listen();
    /// bind() + listen() on a background thread.
    int start_background(const std::string& host = "127.0.0.1", int port = 0);
    void stop();

private:
    void routes();

    std::shared_ptr<SessionManager> sessions_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace cdr

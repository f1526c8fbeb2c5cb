#include "cdr/service.hpp"

#include "cdr/http_client.hpp"
#include "cdr/serialization.hpp"
#include "httplib.h"

namespace cdr {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

int status_of(SessionError::Code c) {
    switch (c) {
        case SessionError::Code::UnknownSession: return 404;
        case SessionError::Code::NotAwaitingInput: return 409;
        default: return 422;
    }
}

std::string_view code_of(SessionError::Code c) {
    switch (c) {
        case SessionError::Code::UnknownSession: return "unknown_session";
        case SessionError::Code::NotAwaitingInput: return "not_awaiting_input";
        case SessionError::Code::NotPending: return "not_pending";
        case SessionError::Code::UnknownVariable: return "unknown_variable";
        case SessionError::Code::TypeMismatch: return "type_mismatch";
    }
    return "invalid";
}

json parse_body(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw std::invalid_argument("request body must be a JSON object");
    return body;
}

// Wraps a handler so every failure maps to the structured error body.
template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const SessionError& e) {
            send_error(res, status_of(e.code()), code_of(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const std::invalid_argument& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const ProviderError& e) {
            send_error(res, 502, "provider_error", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

}  // namespace

PipelineConfig apply_overrides(PipelineConfig base, const json& overrides) {
    if (overrides.is_null()) return base;
    if (!overrides.is_object()) throw std::invalid_argument("overrides must be an object");
    json selection = to_json(base.selection);
    for (const auto& [key, v] : overrides.items()) {
        if (key == "interactive") {
            if (!v.is_boolean()) throw std::invalid_argument("overrides.interactive must be a boolean");
            base.interactive = v.get<bool>();
        } else if (key == "extraction_parallelism") {
            if (!v.is_number_integer()) throw std::invalid_argument("overrides.extraction_parallelism must be an integer");
            base.extraction_parallelism = v.get<int>();
        } else if (selection.contains(key)) {
            const auto& cur = selection[key];
            const bool ok = cur.is_boolean() ? v.is_boolean()
                            : cur.is_number_float() ? v.is_number()
                                                    : v.is_number_integer() && (key != "rng_seed" || v.get<std::int64_t>() >= 0);
            if (!ok) throw std::invalid_argument("overrides." + key + " has the wrong type");
            selection[key] = v;
        } else {
            throw std::invalid_argument("unknown override '" + key + "'");
        }
    }
    base.selection = selection_config_from_json(selection);
    base.validate();
    return base;
}

Service::Service(std::shared_ptr<SessionManager> sessions)
    : sessions_(std::move(sessions)), server_(std::make_unique<httplib::Server>()) {
    if (!sessions_) throw std::invalid_argument("service needs a session manager");
    routes();
}

Service::~Service() { stop(); }

void Service::routes() {
    auto& srv = *server_;
    auto* sessions = sessions_.get();

    srv.Get("/healthz", guarded([sessions](const httplib::Request&, httplib::Response& res) {
                const auto& reg = sessions->pipeline().registry();
                send_json(res, 200, {{"status", "ok"}, {"cdrs", reg.size()}, {"registry_digest", reg.source_digest()}});
            }));

    srv.Get("/v1/registry", guarded([sessions](const httplib::Request&, httplib::Response& res) {
                json out = json::array();
                for (const auto& d : sessions->pipeline().registry().definitions())
                    out.push_back({{"id", d.id}, {"name", d.name}, {"description", d.description}});
                send_json(res, 200, out);
            }));

    srv.Get(R"(/v1/registry/([^/]+))", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
                const auto* def = sessions->pipeline().registry().find(req.matches[1].str());
                if (!def) return send_error(res, 404, "unknown_cdr", "unknown CDR '" + req.matches[1].str() + "'");
                send_json(res, 200, serialize_definition(*def));
            }));

    srv.Post("/v1/analyze", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 if (!body.contains("note") || !body.at("note").is_string())
                     throw std::invalid_argument("'note' must be a string");
                 NoteMeta meta;
                 if (body.contains("note_meta") && !body.at("note_meta").is_null())
                     meta = note_meta_from_json(body.at("note_meta"));
                 const PipelineConfig config =
                     apply_overrides(sessions->pipeline().defaults(), body.value("overrides", json(nullptr)));
                 const auto session = sessions->analyze(body.at("note").get<std::string>(), meta, config);
                 send_json(res, 200, to_json(session));
             }));

    srv.Get(R"(/v1/sessions/([0-9a-f]+))", guarded([sessions](const httplib::Request& req, httplib::Response& res) {
                const auto s = sessions->get(req.matches[1].str());
                if (!s) throw SessionError(SessionError::Code::UnknownSession, "unknown session '" + req.matches[1].str() + "'");
                send_json(res, 200, to_json(*s));
            }));

    srv.Post(R"(/v1/sessions/([0-9a-f]+)/variables)",
             guarded([sessions](const httplib::Request& req, httplib::Response& res) {
                 const json body = parse_body(req);
                 if (!body.contains("cdr_id") || !body.at("cdr_id").is_string())
                     throw std::invalid_argument("'cdr_id' must be a string");
                 if (!body.contains("values") || !body.at("values").is_object())
                     throw std::invalid_argument("'values' must be an object");
                 std::map<std::string, json> values;
                 for (const auto& [k, v] : body.at("values").items()) values.emplace(k, v);
                 const auto s = sessions->resolve_variables(req.matches[1].str(), body.at("cdr_id").get<std::string>(),
                                                            values);
                 send_json(res, 200, to_json(s));
             }));

    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        // Only fill in bodies for errors raised by routing itself.
        if (!res.body.empty()) return;
        if (res.status == 404) send_error(res, 404, "not_found", "no such endpoint");
        else if (res.status == 405) send_error(res, 405, "method_not_allowed", "method not allowed");
    });
}

int Service::bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void Service::listen() { server_->listen_after_bind(); }

int Service::start_background(const std::string& host, int port) {
    const int bound = bind(host, port);
    thread_ = std::thread([this] { listen(); });
    server_->wait_until_ready();
    return bound;
}

void Service::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace cdr

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rpsim/case_model.hpp"
#include "rpsim/latent_policy.hpp"
#include "rpsim/session.hpp"

namespace httplib {
class Server;
}

namespace rpsim {

/// Read-only set of loaded cases keyed by case_id.
class CaseLibrary {
public:
    /// Loads every *.json file in `dir`. Throws SchemaError / CategoryError / ReferenceError.
    static CaseLibrary load_dir(const std::filesystem::path& dir);

    void add(PatientProfile profile);
    std::shared_ptr<const PatientProfile> find(const std::string& case_id) const;
    std::vector<std::string> ids() const;
    std::size_t size() const { return cases_.size(); }

private:
    std::map<std::string, std::shared_ptr<const PatientProfile>> cases_;
};

enum class Role { Clinician, Evaluator };

struct ServiceOptions {
    ProtocolSpec confirmation = ProtocolSpec::adaptive(5, 20);
    ProtocolSpec intervention = ProtocolSpec::success_capped(20);
    PolicyConfig policy = PolicyConfig::defaults();
    /// Bearer token -> role.
    std::map<std::string, Role> tokens;
    /// Seeds session-id generation; random when absent.
    std::optional<std::uint64_t> id_seed;
};

struct ServiceResponse {
    int status = 200;
    json body;
};

/// HTTP status for a library error code.
int http_status_for(const std::string& error_code);

/// Transport-independent request handler. Thread-safe; per-session work is
/// serialized by the session, and reads never wait on an in-flight turn.
class SessionService {
public:
    SessionService(CaseLibrary cases, SessionBackends backends, ServiceOptions options);

    /// `authorization` is the raw Authorization header value.
    ServiceResponse handle(const std::string& method, const std::string& path, const std::string& authorization,
                           const std::string& body);

    std::size_t session_count() const;

private:
    struct Snapshot {
        SessionStatus status = SessionStatus::Active;
        std::optional<StopReason> stop_reason;
        int turn_index = 0;
        int turns_remaining = 0;
        std::optional<double> remaining_seconds;
        double taken_at = 0.0;
    };

    struct Entry {
        std::shared_ptr<Session> session;
        ProtocolSpec protocol;
        mutable std::mutex snap_mu;
        Snapshot snap;
    };

    std::optional<Role> authorize(const std::string& authorization) const;
    std::shared_ptr<Entry> entry(const std::string& id) const;
    std::string next_id();
    void refresh(Entry& e) const;
    json envelope(const Entry& e) const;

    ServiceResponse create(const std::string& body);
    ServiceResponse post_turn(const std::string& id, const std::string& body);
    ServiceResponse post_findings(const std::string& id, const std::string& body);
    ServiceResponse get_envelope(const std::string& id) const;
    ServiceResponse export_record(const std::string& id, Role role) const;
    ServiceResponse list_cases() const;

    CaseLibrary cases_;
    SessionBackends backends_;
    ServiceOptions options_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::mt19937_64 rng_;
    std::uint64_t counter_ = 0;
};

/// Serves a SessionService over HTTP on a background thread.
class HttpServer {
public:
    HttpServer(SessionService& service, std::string host, int port);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and starts listening; port 0 picks a free port. Throws ConfigError.
    void start();
    void stop();
    int port() const { return port_; }
    /// Blocks until stop() is called from another thread.
    void wait();

private:
    SessionService& service_;
    std::string host_;
    int port_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace rpsim

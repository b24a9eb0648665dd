#include "rpsim/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>

#include "rpsim/error.hpp"

namespace fs = std::filesystem;

namespace rpsim {

namespace {

ServiceResponse error_response(int status, const std::string& code, const std::string& message) {
    return {status, {{"code", code}, {"message", message}}};
}

ServiceResponse error_response(const Error& e) { return error_response(http_status_for(e.code()), e.code(), e.what()); }

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    const auto q = path.find('?');
    for (char ch : path.substr(0, q)) {
        if (ch == '/') {
            if (!cur.empty()) parts.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
}

std::optional<json> parse_body(const std::string& body) {
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
    try {
        json j = json::parse(body);
        if (!j.is_object()) return std::nullopt;
        return j;
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

}  // namespace

CaseLibrary CaseLibrary::load_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw SchemaError("case directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    CaseLibrary lib;
    for (const auto& f : files) lib.add(load_profile_file(f.string()));
    return lib;
}

void CaseLibrary::add(PatientProfile profile) {
    const std::string id = profile.case_id;
    if (cases_.contains(id)) throw SchemaError("duplicate case_id '" + id + "'");
    cases_.emplace(id, std::make_shared<const PatientProfile>(std::move(profile)));
}

std::shared_ptr<const PatientProfile> CaseLibrary::find(const std::string& case_id) const {
    auto it = cases_.find(case_id);
    return it == cases_.end() ? nullptr : it->second;
}

std::vector<std::string> CaseLibrary::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : cases_) out.push_back(id);
    return out;
}

int http_status_for(const std::string& code) {
    if (code == "SchemaError" || code == "CategoryError" || code == "InvalidProtocol" ||
        code == "MissingIntervention" || code == "ReferenceError" || code == "ConfigError")
        return 422;
    if (code == "SessionClosed" || code == "TooEarly" || code == "WrongTask") return 409;
    if (code == "TurnBudgetExhausted") return 429;
    if (code == "JudgeUnavailable" || code == "JudgeMalformed" || code == "JudgeOutOfRange" ||
        code == "ResponderUnavailable" || code == "LeakUnremovable" || code == "AdapterError" ||
        code == "BackendMissing")
        return 502;
    return 500;
}

SessionService::SessionService(CaseLibrary cases, SessionBackends backends, ServiceOptions options)
    : cases_(std::move(cases)), backends_(std::move(backends)), options_(std::move(options)) {
    if (!backends_.evaluator || !backends_.responder || !backends_.clock)
        throw BackendMissing("service needs an evaluator, a responder and a clock");
    options_.confirmation.validate();
    options_.intervention.validate();
    options_.policy.validate();
    rng_.seed(options_.id_seed ? *options_.id_seed : std::random_device{}());
}

std::size_t SessionService::session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

std::optional<Role> SessionService::authorize(const std::string& authorization) const {
    static constexpr std::string_view kPrefix = "Bearer ";
    if (!authorization.starts_with(kPrefix)) return std::nullopt;
    auto it = options_.tokens.find(authorization.substr(kPrefix.size()));
    if (it == options_.tokens.end()) return std::nullopt;
    return it->second;
}

std::shared_ptr<SessionService::Entry> SessionService::entry(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::string SessionService::next_id() {
    std::lock_guard lock(mu_);
    char buf[40];
    std::snprintf(buf, sizeof buf, "s%04llx-%016llx", static_cast<unsigned long long>(++counter_ & 0xffff),
                  static_cast<unsigned long long>(rng_()));
    return buf;
}

void SessionService::refresh(Entry& e) const {
    Snapshot s;
    s.status = e.session->status();
    s.stop_reason = e.session->stop_reason();
    s.turn_index = e.session->turn_index();
    s.turns_remaining = std::max(0, e.protocol.turn_budget() - s.turn_index);
    s.remaining_seconds = e.session->remaining_seconds();
    s.taken_at = backends_.clock->now_seconds();
    std::lock_guard lock(e.snap_mu);
    e.snap = s;
}

json SessionService::envelope(const Entry& e) const {
    Snapshot s;
    {
        std::lock_guard lock(e.snap_mu);
        s = e.snap;
    }
    json remaining = nullptr;
    if (s.remaining_seconds) {
        double r = *s.remaining_seconds;
        if (s.status == SessionStatus::Active) r = std::max(0.0, r - (backends_.clock->now_seconds() - s.taken_at));
        remaining = r;
    }
    return {{"session_id", e.session->id()},
            {"task", task_name(e.session->task())},
            {"protocol", mode_name(e.protocol.mode)},
            {"status", status_name(s.status)},
            {"stop_reason", s.stop_reason ? json(stop_reason_name(*s.stop_reason)) : json(nullptr)},
            {"turn_index", s.turn_index},
            {"turns_remaining", s.turns_remaining},
            {"min_turns_before_findings", e.protocol.min_turns_before_findings},
            {"remaining_seconds", remaining},
            {"clinician_view", view_to_json(e.session->view())}};
}

ServiceResponse SessionService::handle(const std::string& method, const std::string& path,
                                       const std::string& authorization, const std::string& body) {
    const auto parts = split_path(path);
    if (method == "GET" && parts.size() == 1 && parts[0] == "health") return {200, {{"status", "ok"}}};

    const auto role = authorize(authorization);
    if (!role) return error_response(401, "Unauthorized", "missing or unknown bearer token");

    try {
        if (parts.size() == 1 && parts[0] == "cases" && method == "GET") return list_cases();
        if (parts.empty() || parts[0] != "sessions") return error_response(404, "NotFound", "no route for " + path);
        if (parts.size() == 1 && method == "POST") return create(body);
        if (parts.size() == 2 && method == "GET") return get_envelope(parts[1]);
        if (parts.size() == 3 && parts[2] == "turns" && method == "POST") return post_turn(parts[1], body);
        if (parts.size() == 3 && parts[2] == "findings" && method == "POST") return post_findings(parts[1], body);
        if (parts.size() == 3 && parts[2] == "export" && method == "GET") return export_record(parts[1], *role);
        return error_response(404, "NotFound", "no route for " + method + " " + path);
    } catch (const Error& e) {
        return error_response(e);
    } catch (const std::exception& e) {
        return error_response(500, "InternalError", e.what());
    }
}

ServiceResponse SessionService::list_cases() const {
    json out = json::array();
    for (const auto& id : cases_.ids()) {
        const auto p = cases_.find(id);
        out.push_back({{"case_id", id}, {"supports_intervention", p->intervention.has_value()}});
    }
    return {200, {{"cases", out}}};
}

ServiceResponse SessionService::create(const std::string& body) {
    const auto req = parse_body(body);
    if (!req) return error_response(400, "BadRequest", "request body must be a JSON object");
    if (!req->contains("case_id") || !(*req)["case_id"].is_string() || !req->contains("task") ||
        !(*req)["task"].is_string())
        throw SchemaError("case_id and task are required strings");
    const TaskKind task = parse_task((*req)["task"].get<std::string>());
    const auto profile = cases_.find((*req)["case_id"].get<std::string>());
    if (!profile) return error_response(404, "UnknownCase", "no case '" + (*req)["case_id"].get<std::string>() + "'");

    ProtocolSpec protocol = task == TaskKind::Confirmation ? options_.confirmation : options_.intervention;
    if (req->contains("protocol") && !(*req)["protocol"].is_null()) {
        json pj = (*req)["protocol"];
        if (pj.is_object() && !pj.contains("task")) pj["task"] = task_name(task);
        if (pj.is_object() && !pj.contains("wall_clock_limit") && protocol.wall_clock_limit)
            pj["wall_clock_limit"] = *protocol.wall_clock_limit;
        protocol = protocol_from_json(pj);
        if (protocol.task != task) throw InvalidProtocol("protocol task does not match the session task");
    }

    auto e = std::make_shared<Entry>();
    e->protocol = protocol;
    e->session = Session::start(next_id(), profile, protocol, options_.policy, backends_,
                                req->value("clinician", std::string("human")));
    refresh(*e);
    {
        std::lock_guard lock(mu_);
        sessions_.emplace(e->session->id(), e);
    }
    return {201, envelope(*e)};
}

ServiceResponse SessionService::post_turn(const std::string& id, const std::string& body) {
    const auto e = entry(id);
    if (!e) return error_response(404, "UnknownSession", "no session '" + id + "'");
    const auto req = parse_body(body);
    if (!req) return error_response(400, "BadRequest", "request body must be a JSON object");
    if (!req->contains("utterance") || !(*req)["utterance"].is_string())
        throw SchemaError("utterance is a required string");
    bool stop = false;
    if (req->contains("stop_signal")) {
        if (!(*req)["stop_signal"].is_boolean()) throw SchemaError("stop_signal must be a boolean");
        stop = (*req)["stop_signal"].get<bool>();
    }
    std::optional<std::string> nonce;
    if (req->contains("nonce") && !(*req)["nonce"].is_null()) {
        if (!(*req)["nonce"].is_string()) throw SchemaError("nonce must be a string");
        nonce = (*req)["nonce"].get<std::string>();
    }
    ClinicianTurnResult result;
    try {
        result = e->session->post_clinician_turn((*req)["utterance"].get<std::string>(), stop, nonce);
    } catch (const Error&) {
        refresh(*e);
        throw;
    }
    refresh(*e);
    return {200, {{"patient_reply", result.patient_reply}, {"turn_index", result.turn_index}, {"envelope", envelope(*e)}}};
}

ServiceResponse SessionService::post_findings(const std::string& id, const std::string& body) {
    const auto e = entry(id);
    if (!e) return error_response(404, "UnknownSession", "no session '" + id + "'");
    const auto req = parse_body(body);
    if (!req) return error_response(400, "BadRequest", "request body must be a JSON object");
    if (!req->contains("findings")) throw SchemaError("findings is required");
    auto findings = findings_from_json((*req)["findings"]);
    const std::size_t n = findings.size();
    e->session->submit_findings(std::move(findings));
    refresh(*e);
    return {200, {{"accepted", n}, {"envelope", envelope(*e)}}};
}

ServiceResponse SessionService::get_envelope(const std::string& id) const {
    const auto e = entry(id);
    if (!e) return error_response(404, "UnknownSession", "no session '" + id + "'");
    return {200, envelope(*e)};
}

ServiceResponse SessionService::export_record(const std::string& id, Role role) const {
    if (role != Role::Evaluator) return error_response(403, "Forbidden", "export requires the evaluator role");
    const auto e = entry(id);
    if (!e) return error_response(404, "UnknownSession", "no session '" + id + "'");
    if (e->session->status() != SessionStatus::Closed)
        return error_response(409, "SessionNotClosed", "session '" + id + "' is not closed");
    return {200, record_to_json(e->session->record())};
}

HttpServer::HttpServer(SessionService& service, std::string host, int port)
    : service_(service), host_(std::move(host)), port_(port), server_(std::make_unique<httplib::Server>()) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        const auto out = service_.handle(req.method, req.path, req.get_header_value("Authorization"), req.body);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    server_->Get(".*", handler);
    server_->Post(".*", handler);
    server_->set_payload_max_length(1 << 20);
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
    if (port_ == 0) {
        port_ = server_->bind_to_any_port(host_);
        if (port_ < 0) throw ConfigError("cannot bind " + host_);
    } else if (!server_->bind_to_port(host_, port_)) {
        throw ConfigError("cannot bind " + host_ + ":" + std::to_string(port_));
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void HttpServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

void HttpServer::wait() {
    if (thread_.joinable()) thread_.join();
}

}  // namespace rpsim

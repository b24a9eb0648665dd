#include "rpsim/session.hpp"

#include <algorithm>
#include <set>

#include "rpsim/error.hpp"
#include "rpsim/text.hpp"

namespace rpsim {

std::string_view mode_name(ProtocolMode m) {
    switch (m) {
        case ProtocolMode::FixedTurns: return "fixed";
        case ProtocolMode::AdaptiveConfirmation: return "adaptive";
        case ProtocolMode::SuccessCapped: return "success_capped";
    }
    return "fixed";
}

ProtocolMode parse_mode(std::string_view name) {
    if (name == "fixed") return ProtocolMode::FixedTurns;
    if (name == "adaptive") return ProtocolMode::AdaptiveConfirmation;
    if (name == "success_capped") return ProtocolMode::SuccessCapped;
    throw InvalidProtocol("unknown protocol mode '" + std::string(name) + "'");
}

ProtocolSpec ProtocolSpec::fixed(TaskKind task, int turns) {
    ProtocolSpec p;
    p.task = task;
    p.mode = ProtocolMode::FixedTurns;
    p.fixed_turns = turns;
    p.min_turns_before_findings = std::min(5, turns);
    return p;
}

ProtocolSpec ProtocolSpec::adaptive(int min_stop_turn, int cap) {
    ProtocolSpec p;
    p.task = TaskKind::Confirmation;
    p.mode = ProtocolMode::AdaptiveConfirmation;
    p.min_stop_turn = min_stop_turn;
    p.cap = cap;
    return p;
}

ProtocolSpec ProtocolSpec::success_capped(int cap) {
    ProtocolSpec p;
    p.task = TaskKind::Intervention;
    p.mode = ProtocolMode::SuccessCapped;
    p.cap = cap;
    return p;
}

int ProtocolSpec::turn_budget() const { return mode == ProtocolMode::FixedTurns ? fixed_turns : cap; }

void ProtocolSpec::validate() const {
    if (mode == ProtocolMode::FixedTurns && fixed_turns < 1) throw InvalidProtocol("fixed_turns must be >= 1");
    if (mode != ProtocolMode::FixedTurns) {
        if (cap < 1) throw InvalidProtocol("cap must be >= 1");
        if (cap < min_stop_turn) throw InvalidProtocol("cap must be >= min_stop_turn");
        if (min_stop_turn < 1) throw InvalidProtocol("min_stop_turn must be >= 1");
    }
    if (mode == ProtocolMode::AdaptiveConfirmation && task != TaskKind::Confirmation)
        throw InvalidProtocol("adaptive stopping applies to confirmation sessions only");
    if (mode == ProtocolMode::SuccessCapped && task != TaskKind::Intervention)
        throw InvalidProtocol("success-capped stopping applies to intervention sessions only");
    if (min_turns_before_findings < 0 || min_turns_before_findings > turn_budget())
        throw InvalidProtocol("min_turns_before_findings must lie in [0, turn budget]");
    if (wall_clock_limit && !(*wall_clock_limit > 0.0)) throw InvalidProtocol("wall_clock_limit must be positive");
}

json protocol_to_json(const ProtocolSpec& p) {
    return {{"task", task_name(p.task)},
            {"mode", mode_name(p.mode)},
            {"fixed_turns", p.fixed_turns},
            {"min_stop_turn", p.min_stop_turn},
            {"cap", p.cap},
            {"min_turns_before_findings", p.min_turns_before_findings},
            {"wall_clock_limit", p.wall_clock_limit ? json(*p.wall_clock_limit) : json(nullptr)}};
}

ProtocolSpec protocol_from_json(const json& j) {
    static const std::set<std::string> known = {"task", "mode", "fixed_turns", "min_stop_turn",
                                                "cap", "min_turns_before_findings", "wall_clock_limit"};
    if (!j.is_object()) throw InvalidProtocol("protocol must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) throw InvalidProtocol("unknown protocol field '" + it.key() + "'");
    }
    try {
        ProtocolSpec p;
        p.task = parse_task(j.at("task").get<std::string>());
        p.mode = parse_mode(j.at("mode").get<std::string>());
        p.fixed_turns = j.value("fixed_turns", p.fixed_turns);
        p.min_stop_turn = j.value("min_stop_turn", p.min_stop_turn);
        p.cap = j.value("cap", p.cap);
        if (p.mode == ProtocolMode::FixedTurns) p.min_turns_before_findings = std::min(5, p.fixed_turns);
        p.min_turns_before_findings = j.value("min_turns_before_findings", p.min_turns_before_findings);
        if (j.contains("wall_clock_limit") && !j["wall_clock_limit"].is_null())
            p.wall_clock_limit = j["wall_clock_limit"].get<double>();
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw InvalidProtocol(std::string("malformed protocol: ") + e.what());
    } catch (const SchemaError& e) {
        throw InvalidProtocol(e.what());
    }
}

std::string_view stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::TurnLimit: return "TurnLimit";
        case StopReason::ClinicianStop: return "ClinicianStop";
        case StopReason::Success: return "Success";
        case StopReason::WallClock: return "WallClock";
        case StopReason::FindingsSubmitted: return "FindingsSubmitted";
        case StopReason::Failure: return "Failure";
    }
    return "Failure";
}

StopReason parse_stop_reason(std::string_view name) {
    for (auto r : {StopReason::TurnLimit, StopReason::ClinicianStop, StopReason::Success, StopReason::WallClock,
                   StopReason::FindingsSubmitted, StopReason::Failure}) {
        if (stop_reason_name(r) == name) return r;
    }
    throw SchemaError("unknown stop reason '" + std::string(name) + "'");
}

std::string_view status_name(SessionStatus s) {
    switch (s) {
        case SessionStatus::Active: return "Active";
        case SessionStatus::AwaitingFindings: return "AwaitingFindings";
        case SessionStatus::Closed: return "Closed";
    }
    return "Closed";
}

SessionStatus parse_status(std::string_view name) {
    if (name == "Active") return SessionStatus::Active;
    if (name == "AwaitingFindings") return SessionStatus::AwaitingFindings;
    if (name == "Closed") return SessionStatus::Closed;
    throw SchemaError("unknown session status '" + std::string(name) + "'");
}

json findings_to_json(const SubmittedFindings& f) {
    json out = json::array();
    for (const auto& x : f) out.push_back({{"category", category_label(x.category)}, {"description", x.description}});
    return out;
}

SubmittedFindings findings_from_json(const json& j) {
    if (!j.is_array()) throw SchemaError("findings must be an array");
    SubmittedFindings out;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("category") || !item.contains("description") ||
            !item["category"].is_string() || !item["description"].is_string()) {
            throw SchemaError("each finding needs a string category and description");
        }
        Finding f;
        f.category = parse_category(item["category"].get<std::string>());
        f.description = item["description"].get<std::string>();
        if (text::tokenize(f.description).empty()) throw SchemaError("finding description must not be empty");
        out.push_back(std::move(f));
    }
    return out;
}

json turn_to_json(const TurnRecord& t) {
    return {{"turn_index", t.outcome.new_state.turn_index},
            {"utterance", t.utterance},
            {"stop_signal", t.stop_signal},
            {"pending_question", t.pending_question ? json(*t.pending_question) : json(nullptr)},
            {"analysis", analysis_to_json(t.analysis)},
            {"overlaps", t.overlaps},
            {"outcome", step_outcome_to_json(t.outcome)},
            {"reply", reply_to_json(t.reply)},
            {"timestamp", t.timestamp},
            {"nonce", t.nonce ? json(*t.nonce) : json(nullptr)}};
}

TurnRecord turn_from_json(const json& j) {
    TurnRecord t;
    t.utterance = j.at("utterance").get<std::string>();
    t.stop_signal = j.at("stop_signal").get<bool>();
    if (!j.at("pending_question").is_null()) t.pending_question = j["pending_question"].get<std::string>();
    t.analysis = analysis_from_json(j.at("analysis"));
    t.overlaps = j.at("overlaps").get<std::vector<double>>();
    t.outcome = step_outcome_from_json(j.at("outcome"));
    t.reply = reply_from_json(j.at("reply"));
    t.timestamp = j.at("timestamp").get<double>();
    if (!j.at("nonce").is_null()) t.nonce = j["nonce"].get<std::string>();
    return t;
}

json record_summary_to_json(const SessionRecord& r) {
    return {{"session_id", r.session_id},
            {"case_id", r.case_id},
            {"protocol", protocol_to_json(r.protocol)},
            {"profile", profile_to_json(r.profile)},
            {"layout", layout_to_json(r.layout)},
            {"policy", policy_to_json(r.policy)},
            {"policy_version", r.policy.version},
            {"evaluator_backend", r.evaluator_backend},
            {"responder_backend", r.responder_backend},
            {"clinician", r.clinician},
            {"turn_count", r.turns.size()},
            {"findings", r.findings ? findings_to_json(*r.findings) : json(nullptr)},
            {"final_state", agent_state_to_json(r.final_state)},
            {"status", status_name(r.status)},
            {"stop_reason", r.stop_reason ? json(stop_reason_name(*r.stop_reason)) : json(nullptr)},
            {"failure", r.failure ? json(*r.failure) : json(nullptr)},
            {"started_at", r.started_at},
            {"ended_at", r.ended_at}};
}

json record_to_json(const SessionRecord& r) {
    json j = record_summary_to_json(r);
    json turns = json::array();
    for (const auto& t : r.turns) turns.push_back(turn_to_json(t));
    j["turns"] = std::move(turns);
    return j;
}

SessionRecord record_from_json(const json& j) {
    try {
        SessionRecord r;
        r.session_id = j.at("session_id").get<std::string>();
        r.case_id = j.at("case_id").get<std::string>();
        r.protocol = protocol_from_json(j.at("protocol"));
        r.profile = profile_from_json(j.at("profile"));
        r.layout = layout_from_json(j.at("layout"));
        r.policy = policy_from_json(j.at("policy"));
        r.evaluator_backend = j.at("evaluator_backend").get<std::string>();
        r.responder_backend = j.at("responder_backend").get<std::string>();
        r.clinician = j.at("clinician").get<std::string>();
        if (j.contains("turns")) {
            for (const auto& t : j["turns"]) r.turns.push_back(turn_from_json(t));
        }
        if (!j.at("findings").is_null()) r.findings = findings_from_json(j["findings"]);
        r.final_state = agent_state_from_json(j.at("final_state"));
        r.status = parse_status(j.at("status").get<std::string>());
        if (!j.at("stop_reason").is_null()) r.stop_reason = parse_stop_reason(j["stop_reason"].get<std::string>());
        if (!j.at("failure").is_null()) r.failure = j["failure"].get<std::string>();
        r.started_at = j.at("started_at").get<double>();
        r.ended_at = j.at("ended_at").get<double>();
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed session record: ") + e.what());
    }
}

double SystemClock::now_seconds() const {
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

double StepClock::now_seconds() const {
    std::lock_guard lock(mu_);
    const double t = now_;
    now_ += step_;
    return t;
}

void StepClock::set(double t) {
    std::lock_guard lock(mu_);
    now_ = t;
}

json clinician_result_to_json(const ClinicianTurnResult& r) {
    return {{"patient_reply", r.patient_reply},
            {"turn_index", r.turn_index},
            {"turns_remaining", r.turns_remaining},
            {"status", status_name(r.status)},
            {"stop_reason", r.stop_reason ? json(stop_reason_name(*r.stop_reason)) : json(nullptr)}};
}

std::unique_ptr<Session> Session::start(std::string session_id, std::shared_ptr<const PatientProfile> profile,
                                        ProtocolSpec protocol, PolicyConfig policy, SessionBackends backends,
                                        std::string clinician_name) {
    if (!profile) throw BackendMissing("no patient profile supplied");
    if (!backends.evaluator) throw BackendMissing("no turn evaluator configured");
    if (!backends.responder) throw BackendMissing("no patient responder configured");
    if (!backends.clock) backends.clock = std::make_shared<SystemClock>();
    protocol.validate();
    policy.validate();
    for (const auto& c : profile->hidden_concerns) {
        if (c.cluster_id >= policy.cluster_count()) {
            throw ConfigError("concern '" + c.id + "' uses cluster " + std::to_string(c.cluster_id) +
                              " but the policy declares " + std::to_string(policy.cluster_count()));
        }
    }

    std::unique_ptr<Session> s(new Session());
    s->view_ = project_clinician_view(*profile, protocol.task);
    s->id_ = std::move(session_id);
    s->profile_ = std::move(profile);
    s->protocol_ = protocol;
    s->policy_ = std::move(policy);
    s->backends_ = std::move(backends);
    s->state_ = initial_agent_state(s->profile_->concern_count());

    auto& r = s->record_;
    r.session_id = s->id_;
    r.case_id = s->profile_->case_id;
    r.protocol = s->protocol_;
    r.profile = *s->profile_;
    r.layout = layout_for(*s->profile_, s->protocol_.task);
    r.policy = s->policy_;
    r.evaluator_backend = s->backends_.evaluator->name();
    r.responder_backend = s->backends_.responder->name();
    r.clinician = std::move(clinician_name);
    r.final_state = s->state_;
    r.started_at = s->backends_.clock->now_seconds();
    return s;
}

std::vector<DialogueLine> Session::transcript() const {
    std::lock_guard lock(mu_);
    std::vector<DialogueLine> out;
    for (const auto& t : record_.turns) {
        out.push_back({"clinician", t.utterance});
        out.push_back({"patient", t.reply.text});
    }
    return out;
}

ClinicianTurnResult Session::post_clinician_turn(const std::string& utterance, bool stop_signal,
                                                 const std::optional<std::string>& nonce) {
    std::lock_guard lock(mu_);
    if (nonce) {
        if (auto it = nonce_results_.find(*nonce); it != nonce_results_.end()) return it->second;
    }
    refresh_clock_locked();
    if (record_.status != SessionStatus::Active) {
        if (record_.stop_reason == StopReason::TurnLimit) throw TurnBudgetExhausted("turn budget exhausted");
        throw SessionClosed("session " + id_ + " is no longer accepting turns");
    }
    if (state_.turn_index >= protocol_.turn_budget()) throw TurnBudgetExhausted("turn budget exhausted");
    if (text::tokenize(utterance).empty()) throw SchemaError("utterance must not be empty");

    const PatientProfile& profile = *profile_;
    const ConcernLayout& layout = record_.layout;

    // Everything below builds the turn off to the side; nothing is committed
    // until the responder has produced a clean reply.
    TurnRecord turn;
    turn.utterance = utterance;
    turn.stop_signal = stop_signal;
    turn.nonce = nonce;
    if (!record_.turns.empty()) turn.pending_question = record_.turns.back().reply.asks_clarification;

    std::vector<std::string> history;
    const std::size_t n = record_.turns.size();
    for (std::size_t i = n > history_window_ ? n - history_window_ : 0; i < n; ++i)
        history.push_back(record_.turns[i].utterance);

    turn.analysis = backends_.evaluator->evaluate(utterance, history, turn.pending_question);
    if (!turn.analysis.rubric.valid()) throw JudgeOutOfRange("evaluator produced a rubric outside [0,1]");

    turn.overlaps.reserve(profile.concern_count());
    for (const auto& c : profile.hidden_concerns) turn.overlaps.push_back(text::overlap_score(utterance, c.content));

    turn.outcome = step(protocol_.task, state_, turn.analysis, turn.overlaps, layout, policy_);
    const AgentState& next = turn.outcome.new_state;

    std::vector<std::size_t> queue = undisclosed_;
    bool addressed_now = false;
    for (const auto& tr : turn.outcome.transitions) {
        if (tr.to == ConcernState::Revealed) queue.push_back(tr.concern);
        if (tr.to == ConcernState::Addressed) addressed_now = true;
    }

    std::vector<DialogueLine> dialogue;
    for (const auto& t : record_.turns) {
        dialogue.push_back({"clinician", t.utterance});
        dialogue.push_back({"patient", t.reply.text});
    }
    dialogue.push_back({"clinician", utterance});

    ReplyContext ctx{profile, protocol_.task, next, queue, addressed_now, layout.primary, dialogue};
    turn.reply = backends_.responder->reply(ctx);
    if (!leaked_concerns(turn.reply.text, profile, next).empty())
        throw LeakUnremovable("patient reply mentions a concern that is still hidden");
    for (const auto& id : turn.reply.disclosed_concern_ids) {
        const auto idx = profile.concern_index(id);
        if (!idx || next.states[*idx] == ConcernState::Hidden)
            throw LeakUnremovable("patient reply claims to disclose hidden concern '" + id + "'");
        std::erase(queue, *idx);
    }
    turn.timestamp = backends_.clock->now_seconds();

    // Commit.
    state_ = next;
    undisclosed_ = std::move(queue);
    record_.turns.push_back(turn);
    record_.final_state = state_;
    if (backends_.sink) backends_.sink->on_turn(id_, record_.turns.back());

    const StopDecision d = should_stop_locked();
    if (d.stop) close_locked(*d.reason);

    ClinicianTurnResult result = result_locked(turn.reply.text);
    if (nonce) nonce_results_.emplace(*nonce, result);
    return result;
}

StopDecision Session::should_stop() const {
    std::lock_guard lock(mu_);
    return should_stop_locked();
}

StopDecision Session::should_stop_locked() const {
    if (record_.status != SessionStatus::Active) return StopDecision::halt(*record_.stop_reason);
    const int t = state_.turn_index;
    const bool signalled = !record_.turns.empty() && record_.turns.back().stop_signal;

    switch (protocol_.mode) {
        case ProtocolMode::FixedTurns:
            if (t >= protocol_.fixed_turns) return StopDecision::halt(StopReason::TurnLimit);
            break;
        case ProtocolMode::AdaptiveConfirmation:
            if (signalled && t >= protocol_.min_stop_turn) return StopDecision::halt(StopReason::ClinicianStop);
            if (t >= protocol_.cap) return StopDecision::halt(StopReason::TurnLimit);
            break;
        case ProtocolMode::SuccessCapped:
            if (record_.layout.primary && intervention_gate(state_, *record_.layout.primary))
                return StopDecision::halt(StopReason::Success);
            if (t >= protocol_.cap) return StopDecision::halt(StopReason::TurnLimit);
            break;
    }
    if (protocol_.wall_clock_limit) {
        const double elapsed = backends_.clock->now_seconds() - record_.started_at;
        if (elapsed >= *protocol_.wall_clock_limit) return StopDecision::halt(StopReason::WallClock);
    }
    return StopDecision::go();
}

void Session::refresh_clock_locked() {
    if (record_.status != SessionStatus::Active || !protocol_.wall_clock_limit) return;
    const double elapsed = backends_.clock->now_seconds() - record_.started_at;
    if (elapsed >= *protocol_.wall_clock_limit) close_locked(StopReason::WallClock);
}

void Session::close_locked(StopReason reason) {
    const bool awaiting = protocol_.task == TaskKind::Confirmation && reason != StopReason::FindingsSubmitted &&
                          reason != StopReason::Failure && !record_.findings;
    record_.stop_reason = reason;
    record_.ended_at = backends_.clock->now_seconds();
    record_.status = awaiting ? SessionStatus::AwaitingFindings : SessionStatus::Closed;
    if (record_.status == SessionStatus::Closed && backends_.sink) backends_.sink->on_close(record_);
}

ClinicianTurnResult Session::result_locked(const std::string& reply) const {
    ClinicianTurnResult r;
    r.patient_reply = reply;
    r.turn_index = state_.turn_index;
    r.turns_remaining = std::max(0, protocol_.turn_budget() - state_.turn_index);
    r.status = record_.status;
    r.stop_reason = record_.stop_reason;
    return r;
}

void Session::submit_findings(SubmittedFindings findings) {
    std::lock_guard lock(mu_);
    if (protocol_.task != TaskKind::Confirmation) throw WrongTask("findings are only collected in confirmation sessions");
    if (record_.status == SessionStatus::Closed) throw SessionClosed("session " + id_ + " is closed");
    if (state_.turn_index < protocol_.min_turns_before_findings) {
        throw TooEarly("findings need at least " + std::to_string(protocol_.min_turns_before_findings) +
                       " clinician turns; session is at " + std::to_string(state_.turn_index));
    }
    for (const auto& f : findings) {
        if (text::tokenize(f.description).empty()) throw SchemaError("finding description must not be empty");
    }
    record_.findings = std::move(findings);
    if (record_.status == SessionStatus::Active) {
        close_locked(StopReason::FindingsSubmitted);
    } else {
        record_.status = SessionStatus::Closed;
        if (backends_.sink) backends_.sink->on_close(record_);
    }
}

void Session::fail(const std::string& message) {
    std::lock_guard lock(mu_);
    if (record_.status == SessionStatus::Closed) return;
    record_.failure = message;
    close_locked(StopReason::Failure);
}

SessionStatus Session::status() const {
    std::lock_guard lock(mu_);
    return record_.status;
}

std::optional<StopReason> Session::stop_reason() const {
    std::lock_guard lock(mu_);
    return record_.stop_reason;
}

int Session::turn_index() const {
    std::lock_guard lock(mu_);
    return state_.turn_index;
}

std::optional<double> Session::remaining_seconds() const {
    std::lock_guard lock(mu_);
    if (!protocol_.wall_clock_limit) return std::nullopt;
    if (record_.status != SessionStatus::Active) return 0.0;
    const double elapsed = backends_.clock->now_seconds() - record_.started_at;
    return std::max(0.0, *protocol_.wall_clock_limit - elapsed);
}

bool Session::gate() const {
    std::lock_guard lock(mu_);
    return record_.layout.primary && intervention_gate(state_, *record_.layout.primary);
}

SessionRecord Session::record() const {
    std::lock_guard lock(mu_);
    return record_;
}

ScriptedClinician::ScriptedClinician(std::string name, std::vector<std::string> utterances, SubmittedFindings findings,
                                     std::optional<int> stop_from_turn)
    : name_(std::move(name)),
      utterances_(std::move(utterances)),
      findings_(std::move(findings)),
      stop_from_turn_(stop_from_turn) {
    if (utterances_.empty()) throw ConfigError("scripted clinician '" + name_ + "' has no utterances");
}

ClinicianMove ScriptedClinician::next_turn(const ClinicianView&, const std::vector<DialogueLine>&) {
    const std::size_t i = std::min(next_, utterances_.size() - 1);
    ++next_;
    const int turn = static_cast<int>(next_);
    return {utterances_[i], stop_from_turn_ && turn >= *stop_from_turn_};
}

SubmittedFindings ScriptedClinician::extract_findings(const ClinicianView&, const std::vector<DialogueLine>&) {
    return findings_;
}

namespace {

json transcript_to_json(const std::vector<DialogueLine>& transcript) {
    json out = json::array();
    for (const auto& line : transcript) out.push_back({{"speaker", line.speaker}, {"text", line.text}});
    return out;
}

}  // namespace

HttpClinicianAgent::HttpClinicianAgent(std::shared_ptr<JsonTransport> transport) : transport_(std::move(transport)) {
    if (!transport_) throw BackendMissing("clinician endpoint not configured");
}

std::string HttpClinicianAgent::name() const { return "http:" + transport_->describe(); }

ClinicianMove HttpClinicianAgent::next_turn(const ClinicianView& view, const std::vector<DialogueLine>& transcript) {
    const json body = {{"request", "next_turn"},
                       {"schema_version", "rpsim-clinician-v1"},
                       {"view", view_to_json(view)},
                       {"transcript", transcript_to_json(transcript)}};
    const std::string raw = transport_->post(body);
    try {
        const json j = parse_adapter_payload(raw);
        ClinicianMove m;
        m.utterance = j.at("utterance").get<std::string>();
        m.stop = j.value("stop", false);
        return m;
    } catch (const json::exception& e) {
        throw AdapterError(std::string("clinician response malformed: ") + e.what());
    }
}

SubmittedFindings HttpClinicianAgent::extract_findings(const ClinicianView& view,
                                                       const std::vector<DialogueLine>& transcript) {
    const json body = {{"request", "extract_findings"},
                       {"schema_version", "rpsim-clinician-v1"},
                       {"categories", [] {
                            json labels = json::array();
                            for (auto c : kAllCategories) labels.push_back(category_label(c));
                            return labels;
                        }()},
                       {"view", view_to_json(view)},
                       {"transcript", transcript_to_json(transcript)}};
    const std::string raw = transport_->post(body);
    try {
        return findings_from_json(parse_adapter_payload(raw).at("findings"));
    } catch (const json::exception& e) {
        throw AdapterError(std::string("findings response malformed: ") + e.what());
    }
}

SessionRecord run_ai_session(std::string session_id, std::shared_ptr<const PatientProfile> profile,
                             const ProtocolSpec& protocol, ClinicianAgent& clinician, const PolicyConfig& policy,
                             const SessionBackends& backends) {
    auto session = Session::start(std::move(session_id), std::move(profile), protocol, policy, backends,
                                  clinician.name());
    try {
        while (session->status() == SessionStatus::Active) {
            const ClinicianMove move = clinician.next_turn(session->view(), session->transcript());
            session->post_clinician_turn(move.utterance, move.stop);
        }
        if (session->status() == SessionStatus::AwaitingFindings) {
            session->submit_findings(clinician.extract_findings(session->view(), session->transcript()));
        }
    } catch (const Error& e) {
        session->fail(e.code() + ": " + e.what());
    } catch (const std::exception& e) {
        session->fail(e.what());
    }
    return session->record();
}

std::vector<StepOutcome> replay_record(const SessionRecord& record) { return replay_record(record, record.policy); }

std::vector<StepOutcome> replay_record(const SessionRecord& record, const PolicyConfig& policy) {
    std::vector<StepOutcome> out;
    out.reserve(record.turns.size());
    AgentState state = initial_agent_state(record.profile.concern_count());
    for (const auto& t : record.turns) {
        out.push_back(step(record.task(), state, t.analysis, t.overlaps, record.layout, policy));
        state = out.back().new_state;
    }
    return out;
}

}  // namespace rpsim

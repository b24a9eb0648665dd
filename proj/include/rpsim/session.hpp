#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpsim/case_model.hpp"
#include "rpsim/dynamics.hpp"
#include "rpsim/latent_policy.hpp"
#include "rpsim/patient_responder.hpp"
#include "rpsim/turn_evaluator.hpp"

namespace rpsim {

enum class ProtocolMode { FixedTurns, AdaptiveConfirmation, SuccessCapped };

std::string_view mode_name(ProtocolMode m);
ProtocolMode parse_mode(std::string_view name);

struct ProtocolSpec {
    TaskKind task = TaskKind::Confirmation;
    ProtocolMode mode = ProtocolMode::FixedTurns;
    int fixed_turns = 8;
    int min_stop_turn = 5;
    int cap = 20;
    int min_turns_before_findings = 5;
    std::optional<double> wall_clock_limit;

    static ProtocolSpec fixed(TaskKind task, int turns);
    static ProtocolSpec adaptive(int min_stop_turn = 5, int cap = 20);
    static ProtocolSpec success_capped(int cap = 20);

    /// Maximum number of clinician turns this protocol allows.
    int turn_budget() const;
    /// Throws InvalidProtocol.
    void validate() const;

    bool operator==(const ProtocolSpec&) const = default;
};

json protocol_to_json(const ProtocolSpec& p);
ProtocolSpec protocol_from_json(const json& j);

enum class StopReason { TurnLimit, ClinicianStop, Success, WallClock, FindingsSubmitted, Failure };

std::string_view stop_reason_name(StopReason r);
StopReason parse_stop_reason(std::string_view name);

struct StopDecision {
    bool stop = false;
    std::optional<StopReason> reason;

    static StopDecision go() { return {}; }
    static StopDecision halt(StopReason r) { return {true, r}; }
};

enum class SessionStatus { Active, AwaitingFindings, Closed };

std::string_view status_name(SessionStatus s);
SessionStatus parse_status(std::string_view name);

struct Finding {
    ConcernCategory category = ConcernCategory::MisinformationOrMisconceptions;
    std::string description;

    bool operator==(const Finding&) const = default;
};

using SubmittedFindings = std::vector<Finding>;

json findings_to_json(const SubmittedFindings& f);
/// Throws SchemaError (empty description) or CategoryError.
SubmittedFindings findings_from_json(const json& j);

struct TurnRecord {
    std::string utterance;
    bool stop_signal = false;
    std::optional<std::string> pending_question;
    TurnAnalysis analysis;
    std::vector<double> overlaps;
    StepOutcome outcome;
    PatientReply reply;
    double timestamp = 0.0;
    std::optional<std::string> nonce;

    bool operator==(const TurnRecord&) const = default;
};

json turn_to_json(const TurnRecord& t);
TurnRecord turn_from_json(const json& j);

struct SessionRecord {
    std::string session_id;
    std::string case_id;
    ProtocolSpec protocol;
    PatientProfile profile;
    ConcernLayout layout;
    PolicyConfig policy;
    std::string evaluator_backend;
    std::string responder_backend;
    std::string clinician;
    std::vector<TurnRecord> turns;
    std::optional<SubmittedFindings> findings;
    AgentState final_state;
    SessionStatus status = SessionStatus::Active;
    std::optional<StopReason> stop_reason;
    std::optional<std::string> failure;
    double started_at = 0.0;
    double ended_at = 0.0;

    TaskKind task() const { return protocol.task; }
};

/// Closing-summary object (everything except the turns).
json record_summary_to_json(const SessionRecord& r);
json record_to_json(const SessionRecord& r);
SessionRecord record_from_json(const json& j);

class Clock {
public:
    virtual ~Clock() = default;
    virtual double now_seconds() const = 0;
};

class SystemClock final : public Clock {
public:
    double now_seconds() const override;
};

/// Deterministic clock: returns `start + step * calls`.
class StepClock final : public Clock {
public:
    explicit StepClock(double start = 0.0, double step = 1.0) : now_(start), step_(step) {}
    double now_seconds() const override;
    void set(double t);

private:
    mutable std::mutex mu_;
    mutable double now_;
    double step_;
};

/// Receives trace events as they are committed.
class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void on_turn(const std::string& session_id, const TurnRecord& turn) = 0;
    virtual void on_close(const SessionRecord& record) = 0;
};

struct SessionBackends {
    std::shared_ptr<const EvaluatorBackend> evaluator;
    std::shared_ptr<const PatientResponder> responder;
    std::shared_ptr<const Clock> clock;
    std::shared_ptr<TraceSink> sink;
};

/// The only thing a clinician ever receives back from a turn.
struct ClinicianTurnResult {
    std::string patient_reply;
    int turn_index = 0;
    int turns_remaining = 0;
    SessionStatus status = SessionStatus::Active;
    std::optional<StopReason> stop_reason;

    bool operator==(const ClinicianTurnResult&) const = default;
};

json clinician_result_to_json(const ClinicianTurnResult& r);

/// One dialogue. All mutations are serialized through an internal mutex.
class Session {
public:
    /// Throws MissingIntervention, BackendMissing, InvalidProtocol, ConfigError.
    static std::unique_ptr<Session> start(std::string session_id, std::shared_ptr<const PatientProfile> profile,
                                          ProtocolSpec protocol, PolicyConfig policy, SessionBackends backends,
                                          std::string clinician_name = "unspecified");

    const ClinicianView& view() const { return view_; }
    const std::string& id() const { return id_; }
    TaskKind task() const { return protocol_.task; }

    /// Evaluator -> overlaps -> dynamics -> reply, committed atomically.
    /// Throws TurnBudgetExhausted, SessionClosed, or whatever a backend threw
    /// (in which case nothing is committed).
    ClinicianTurnResult post_clinician_turn(const std::string& utterance, bool stop_signal = false,
                                            const std::optional<std::string>& nonce = std::nullopt);

    StopDecision should_stop() const;

    /// Throws WrongTask, TooEarly, SessionClosed, SchemaError.
    void submit_findings(SubmittedFindings findings);

    /// Closes with a failure marker; no-op if already closed.
    void fail(const std::string& message);

    SessionStatus status() const;
    std::optional<StopReason> stop_reason() const;
    int turn_index() const;
    std::optional<double> remaining_seconds() const;
    bool gate() const;
    std::vector<DialogueLine> transcript() const;

    SessionRecord record() const;

private:
    Session() = default;

    StopDecision should_stop_locked() const;
    void close_locked(StopReason reason);
    void refresh_clock_locked();
    ClinicianTurnResult result_locked(const std::string& reply) const;

    mutable std::mutex mu_;
    std::string id_;
    std::shared_ptr<const PatientProfile> profile_;
    ProtocolSpec protocol_;
    PolicyConfig policy_;
    SessionBackends backends_;
    ClinicianView view_;
    SessionRecord record_;
    AgentState state_;
    std::vector<std::size_t> undisclosed_;
    std::map<std::string, ClinicianTurnResult> nonce_results_;
    std::size_t history_window_ = 3;
};

struct ClinicianMove {
    std::string utterance;
    bool stop = false;
};

/// A clinician driven by the harness: scripted fixture, remote model, or a human bridge.
class ClinicianAgent {
public:
    virtual ~ClinicianAgent() = default;
    virtual ClinicianMove next_turn(const ClinicianView& view, const std::vector<DialogueLine>& transcript) = 0;
    /// Post-dialogue extraction for confirmation sessions.
    virtual SubmittedFindings extract_findings(const ClinicianView& view,
                                               const std::vector<DialogueLine>& transcript) = 0;
    virtual std::string name() const = 0;
};

/// Plays a fixed list of utterances (the last one repeats), signals STOP per
/// `stop_from_turn`, and returns canned findings.
class ScriptedClinician final : public ClinicianAgent {
public:
    ScriptedClinician(std::string name, std::vector<std::string> utterances, SubmittedFindings findings = {},
                      std::optional<int> stop_from_turn = std::nullopt);

    ClinicianMove next_turn(const ClinicianView& view, const std::vector<DialogueLine>& transcript) override;
    SubmittedFindings extract_findings(const ClinicianView& view, const std::vector<DialogueLine>& transcript) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    std::vector<std::string> utterances_;
    SubmittedFindings findings_;
    std::optional<int> stop_from_turn_;
    std::size_t next_ = 0;
};

/// Remote clinician model over the shared JSON convention.
class HttpClinicianAgent final : public ClinicianAgent {
public:
    explicit HttpClinicianAgent(std::shared_ptr<JsonTransport> transport);
    ClinicianMove next_turn(const ClinicianView& view, const std::vector<DialogueLine>& transcript) override;
    SubmittedFindings extract_findings(const ClinicianView& view, const std::vector<DialogueLine>& transcript) override;
    std::string name() const override;

private:
    std::shared_ptr<JsonTransport> transport_;
};

/// Drives a full session to its stop condition and returns the record.
/// Adapter and backend failures are captured in the record, not thrown.
SessionRecord run_ai_session(std::string session_id, std::shared_ptr<const PatientProfile> profile,
                             const ProtocolSpec& protocol, ClinicianAgent& clinician, const PolicyConfig& policy,
                             const SessionBackends& backends);

/// Re-runs the dynamics over the stored analyses and overlaps.
std::vector<StepOutcome> replay_record(const SessionRecord& record);
std::vector<StepOutcome> replay_record(const SessionRecord& record, const PolicyConfig& policy);

}  // namespace rpsim

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpsim/case_model.hpp"
#include "rpsim/dynamics.hpp"
#include "rpsim/transport.hpp"

namespace rpsim {

struct PatientReply {
    std::string text;
    std::vector<std::string> disclosed_concern_ids;
    std::optional<std::string> asks_clarification;
    bool challenge_cue = false;

    bool operator==(const PatientReply&) const = default;
};

json reply_to_json(const PatientReply& r);
PatientReply reply_from_json(const json& j);

struct DialogueLine {
    std::string speaker;  // "clinician" or "patient"
    std::string text;
};

/// Everything a responder may look at. The state machine has already run for
/// this turn; `to_disclose` lists revealed concerns not yet verbalized, oldest first.
struct ReplyContext {
    const PatientProfile& profile;
    TaskKind task;
    const AgentState& state;
    std::vector<std::size_t> to_disclose;
    bool addressed_now = false;
    std::optional<std::size_t> primary;
    const std::vector<DialogueLine>& dialogue;
};

class PatientResponder {
public:
    virtual ~PatientResponder() = default;
    virtual PatientReply reply(const ReplyContext& ctx) const = 0;
    virtual std::string name() const = 0;
};

struct ReplyStyle {
    std::size_t max_words = 60;
    std::size_t max_issues = 2;
};

/// Templated deterministic responder. Verbalizes at most `max_issues`
/// concerns per reply, and only concerns the machine has revealed.
class ScriptedResponder final : public PatientResponder {
public:
    explicit ScriptedResponder(ReplyStyle style = {}) : style_(style) {}
    PatientReply reply(const ReplyContext& ctx) const override;
    std::string name() const override { return "scripted-v1"; }

private:
    ReplyStyle style_;
};

struct ModelResponderConfig {
    std::string prompt_template;
    std::string schema_version = "rpsim-patient-v1";
    int max_attempts = 3;
    /// mentions_content threshold for the hidden-concern leak filter.
    double leak_threshold = 0.5;
    /// overlap_score at or above which a revealed concern counts as disclosed.
    double disclosure_overlap = 0.5;
    ReplyStyle style;
};

/// Builds the external-model prompt. Only concerns at or beyond Revealed are included.
std::string build_patient_prompt(const ReplyContext& ctx, const std::string& prompt_template);

/// Concerns still Hidden in `state` whose content `text` mentions.
std::vector<std::size_t> leaked_concerns(const std::string& text, const PatientProfile& profile,
                                         const AgentState& state, double threshold = 0.5);

/// Drops sentences that leak hidden concerns. Returns nullopt if nothing usable remains.
std::optional<std::string> remove_leaks(const std::string& text, const PatientProfile& profile,
                                        const AgentState& state, double threshold = 0.5);

class ModelResponder final : public PatientResponder {
public:
    ModelResponder(ModelResponderConfig cfg, std::shared_ptr<JsonTransport> transport);
    PatientReply reply(const ReplyContext& ctx) const override;
    std::string name() const override;

private:
    ModelResponderConfig cfg_;
    std::shared_ptr<JsonTransport> transport_;
};

}  // namespace rpsim

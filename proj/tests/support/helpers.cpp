#include "helpers.hpp"

#include <algorithm>
#include <cmath>

#include "rpsim/patient_responder.hpp"
#include "rpsim/turn_evaluator.hpp"

namespace testsupport {

using namespace rpsim;

std::filesystem::path source_dir() { return RPSIM_SOURCE_DIR; }

std::filesystem::path fixture_path(const std::string& relative) { return source_dir() / "fixtures" / relative; }

std::shared_ptr<const PatientProfile> fixture_case(const std::string& id) {
    return std::make_shared<const PatientProfile>(load_profile_file(fixture_path("cases/" + id + ".json").string()));
}

std::vector<std::string> fixture_case_ids() { return {"fx-001", "fx-002", "fx-003"}; }

AppConfig fixture_config() {
    AppConfig cfg = AppConfig::defaults();
    cfg.clinician_fixtures = fixture_path("clinicians");
    cfg.service.cases_dir = fixture_path("cases");
    return cfg;
}

SessionBackends scripted_backends() {
    SessionBackends b;
    b.evaluator = std::make_shared<LexicalEvaluator>();
    b.responder = std::make_shared<ScriptedResponder>();
    b.clock = std::make_shared<StepClock>(0.0, 1.0);
    return b;
}

SessionRecord run_fixture_session(const std::string& case_id, const std::string& clinician,
                                  const ProtocolSpec& protocol, const PolicyConfig& policy) {
    auto agent = make_clinician(fixture_config(), clinician, case_id);
    const std::string id = case_id + "." + clinician + "." + protocol_label(protocol) + "." +
                           std::string(task_name(protocol.task));
    return run_ai_session(id, fixture_case(case_id), protocol, *agent, policy, scripted_backends());
}

PolicyConfig probe_policy(std::size_t clusters) {
    PolicyConfig cfg = PolicyConfig::defaults(clusters);
    std::fill(cfg.w.begin(), cfg.w.end(), 0.0);
    cfg.w[kRubricDims] = 1.0;
    std::fill(cfg.w_addr.begin(), cfg.w_addr.end(), 0.0);
    cfg.w_addr[0] = 1.0;
    return cfg;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

TurnAnalysis analysis(Intent intent, double z0) {
    TurnAnalysis a;
    a.intent = intent;
    a.intent_probs[static_cast<std::size_t>(intent)] = 1.0;
    a.rubric[RubricDim::DataGathering] = z0;
    a.backend = "test";
    return a;
}

json minimal_case_json(std::size_t k, bool with_intervention) {
    json concerns = json::array();
    for (std::size_t i = 1; i <= k; ++i) {
        concerns.push_back({{"id", "c" + std::to_string(i)},
                            {"content", "Distinct worry number " + std::to_string(i) + "."},
                            {"category", "Emotional Discomfort or Fear"},
                            {"confidence", 0.5}});
    }
    json doc = {{"case_id", "min-" + std::to_string(k)},
                {"demographics",
                 {{"name", "A"},
                  {"age", 50},
                  {"sex", "female"},
                  {"marital_status", "single"},
                  {"education", "college"},
                  {"background", "Teacher."}}},
                {"clinical",
                 {{"admission_reason", "Routine visit."},
                  {"adherence_behavior", "Takes pills."},
                  {"medical_surgical_history", "None."}}},
                {"psychosocial",
                 {{"personality", "Calm."},
                  {"life_situation", "Lives alone."},
                  {"family_history", "None."},
                  {"lifestyle", "Active."},
                  {"family_dynamics", "Close sister."}}},
                {"hidden_concerns", concerns},
                {"roleplay", {{"response_style", "Short."}, {"disclosure_behavior", "Guarded."}}},
                {"self_management_domains", json::object()}};
    if (with_intervention) {
        doc["intervention"] = {{"primary_concern_id", "c1"},
                               {"initial_preference", "Skip it."},
                               {"target_plan", "Take it daily."}};
    }
    return doc;
}

PatientProfile synthetic_profile(const std::vector<ConcernCategory>& categories, std::optional<std::size_t> primary) {
    PatientProfile p;
    p.case_id = "synthetic";
    p.demographics.name = "Synthetic";
    for (std::size_t i = 0; i < categories.size(); ++i) {
        HiddenConcern c;
        c.id = "c" + std::to_string(i + 1);
        c.content = "concern " + std::to_string(i + 1);
        c.category = categories[i];
        c.cluster_id = static_cast<std::size_t>(categories[i]);
        p.hidden_concerns.push_back(c);
    }
    if (primary) p.intervention = InterventionSpec{p.hidden_concerns.at(*primary).id, "prefers not to", "plan"};
    return p;
}

SessionRecord synthetic_record(TaskKind task, const std::vector<ConcernCategory>& gold,
                               const std::vector<int>& reveal_turns, int turns, const std::vector<int>& meta,
                               std::optional<std::size_t> primary, int address_turn) {
    SessionRecord r;
    r.session_id = "synthetic";
    r.case_id = "synthetic";
    r.protocol = task == TaskKind::Confirmation ? ProtocolSpec::fixed(task, std::max(turns, 1))
                                                : ProtocolSpec::success_capped(20);
    r.profile = synthetic_profile(gold, primary);
    r.layout = layout_for(r.profile, task);
    r.policy = PolicyConfig::defaults();
    r.clinician = "synthetic";
    const std::size_t k = gold.size();
    AgentState s = initial_agent_state(k);
    for (int t = 1; t <= turns; ++t) {
        TurnRecord tr;
        const bool is_meta = std::find(meta.begin(), meta.end(), t) != meta.end();
        tr.utterance = "turn " + std::to_string(t);
        tr.analysis = analysis(is_meta ? Intent::MetaCategoryProbe : Intent::NaturalInquiry);
        tr.overlaps.assign(k, 0.0);
        s.turn_index = t;
        for (std::size_t i = 0; i < k; ++i) {
            if (reveal_turns[i] == t) {
                s.states[i] = ConcernState::Revealed;
                s.reveal_turn[i] = t;
            }
        }
        if (primary && address_turn == t) {
            s.states[*primary] = ConcernState::Addressed;
            s.address_turn = t;
        }
        tr.outcome.new_state = s;
        tr.outcome.blocked = is_meta;
        r.turns.push_back(tr);
    }
    r.final_state = s;
    r.status = SessionStatus::Closed;
    r.stop_reason = StopReason::TurnLimit;
    return r;
}

}  // namespace testsupport

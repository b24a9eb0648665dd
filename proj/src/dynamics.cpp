#include "rpsim/dynamics.hpp"

#include <algorithm>
#include <string>

#include "rpsim/error.hpp"

namespace rpsim {

std::string_view state_name(ConcernState s) {
    switch (s) {
        case ConcernState::Hidden: return "Hidden";
        case ConcernState::Revealed: return "Revealed";
        case ConcernState::Addressed: return "Addressed";
    }
    return "Hidden";
}

ConcernState parse_state(std::string_view name) {
    if (name == "Hidden") return ConcernState::Hidden;
    if (name == "Revealed") return ConcernState::Revealed;
    if (name == "Addressed") return ConcernState::Addressed;
    throw SchemaError("unknown concern state '" + std::string(name) + "'");
}

std::string_view trigger_name(Trigger t) {
    switch (t) {
        case Trigger::HighThreshold: return "HighThreshold";
        case Trigger::SustainedLow: return "SustainedLow";
        case Trigger::AddressGate: return "AddressGate";
    }
    return "HighThreshold";
}

Trigger parse_trigger(std::string_view name) {
    if (name == "HighThreshold") return Trigger::HighThreshold;
    if (name == "SustainedLow") return Trigger::SustainedLow;
    if (name == "AddressGate") return Trigger::AddressGate;
    throw SchemaError("unknown trigger '" + std::string(name) + "'");
}

std::size_t AgentState::revealed_count() const {
    return static_cast<std::size_t>(
        std::count_if(states.begin(), states.end(), [](ConcernState s) { return s != ConcernState::Hidden; }));
}

AgentState initial_agent_state(std::size_t concerns) {
    AgentState s;
    s.states.assign(concerns, ConcernState::Hidden);
    s.evidence.assign(concerns, 0.0);
    s.low_hits.assign(concerns, 0);
    s.reveal_turn.assign(concerns, std::nullopt);
    return s;
}

ConcernLayout layout_for(const PatientProfile& profile, TaskKind task) {
    ConcernLayout layout;
    for (const auto& c : profile.hidden_concerns) layout.clusters.push_back(c.cluster_id);
    if (task == TaskKind::Intervention) layout.primary = profile.primary_concern_index();
    return layout;
}

StepOutcome step_confirmation(const AgentState& state, const TurnAnalysis& analysis, std::span<const double> overlaps,
                              const ConcernLayout& layout, const PolicyConfig& cfg) {
    const std::size_t k = state.concern_count();
    if (overlaps.size() != k || layout.clusters.size() != k || state.evidence.size() != k ||
        state.low_hits.size() != k || state.reveal_turn.size() != k) {
        throw ArityMismatch("concern count mismatch between state, overlaps and layout");
    }

    StepOutcome out;
    out.new_state = state;
    AgentState& next = out.new_state;
    next.turn_index = state.turn_index + 1;
    const int t = next.turn_index;

    out.p_reveal.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        out.p_reveal[i] = reveal_probability(cfg, analysis.rubric, overlaps[i], layout.clusters[i]);

    if (cfg.meta_block && analysis.intent == Intent::MetaCategoryProbe) {
        out.blocked = true;
        return out;
    }

    const Thresholds th = effective_thresholds(cfg, state.revealed_count());
    for (std::size_t i = 0; i < k; ++i) {
        const double e = cfg.alpha * state.evidence[i] + (1.0 - cfg.alpha) * out.p_reveal[i];
        next.evidence[i] = e;
        if (state.states[i] != ConcernState::Hidden) continue;

        next.low_hits[i] = e >= th.lo ? state.low_hits[i] + 1 : 0;
        std::optional<Trigger> trigger;
        if (e >= th.hi) {
            trigger = Trigger::HighThreshold;
        } else if (next.low_hits[i] >= cfg.n_low) {
            trigger = Trigger::SustainedLow;
        }
        if (trigger) {
            next.states[i] = ConcernState::Revealed;
            next.reveal_turn[i] = t;
            out.transitions.push_back({i, ConcernState::Hidden, ConcernState::Revealed, *trigger});
        }
    }
    return out;
}

StepOutcome step_intervention(const AgentState& state, const TurnAnalysis& analysis, std::span<const double> overlaps,
                              const ConcernLayout& layout, const PolicyConfig& cfg) {
    if (!layout.primary) throw MissingPrimaryConcern("intervention step without a primary concern");
    const std::size_t c = *layout.primary;
    if (c >= state.concern_count()) throw ArityMismatch("primary concern index out of range");

    StepOutcome out = step_confirmation(state, analysis, overlaps, layout, cfg);
    AgentState& next = out.new_state;
    if (next.states[c] != ConcernState::Revealed) return out;

    const int t = next.turn_index;
    const double p = address_probability(cfg, analysis.rubric, layout.clusters[c]);
    out.p_addr = p;
    next.address_evidence = cfg.beta * state.address_evidence + (1.0 - cfg.beta) * p;
    out.address_eligible = (t - *next.reveal_turn[c]) >= static_cast<int>(cfg.lag);
    out.address_hit = out.address_eligible && p >= cfg.eta && next.address_evidence >= cfg.t_addr;
    next.address_hits = out.address_hit ? state.address_hits + 1 : 0;
    if (next.address_hits >= cfg.k_addr) {
        next.states[c] = ConcernState::Addressed;
        next.address_turn = t;
        out.transitions.push_back({c, ConcernState::Revealed, ConcernState::Addressed, Trigger::AddressGate});
    }
    return out;
}

StepOutcome step(TaskKind task, const AgentState& state, const TurnAnalysis& analysis, std::span<const double> overlaps,
                 const ConcernLayout& layout, const PolicyConfig& cfg) {
    return task == TaskKind::Intervention ? step_intervention(state, analysis, overlaps, layout, cfg)
                                          : step_confirmation(state, analysis, overlaps, layout, cfg);
}

bool intervention_gate(const AgentState& state, std::size_t primary) {
    return primary < state.states.size() && state.states[primary] == ConcernState::Addressed;
}

json agent_state_to_json(const AgentState& s) {
    json states = json::array();
    for (auto st : s.states) states.push_back(state_name(st));
    json reveal = json::array();
    for (const auto& r : s.reveal_turn) reveal.push_back(r ? json(*r) : json(nullptr));
    return {{"states", states},
            {"evidence", s.evidence},
            {"address_evidence", s.address_evidence},
            {"low_hits", s.low_hits},
            {"address_hits", s.address_hits},
            {"reveal_turn", reveal},
            {"address_turn", s.address_turn ? json(*s.address_turn) : json(nullptr)},
            {"turn_index", s.turn_index}};
}

AgentState agent_state_from_json(const json& j) {
    AgentState s;
    for (const auto& st : j.at("states")) s.states.push_back(parse_state(st.get<std::string>()));
    s.evidence = j.at("evidence").get<std::vector<double>>();
    s.address_evidence = j.at("address_evidence").get<double>();
    s.low_hits = j.at("low_hits").get<std::vector<std::size_t>>();
    s.address_hits = j.at("address_hits").get<std::size_t>();
    for (const auto& r : j.at("reveal_turn"))
        s.reveal_turn.push_back(r.is_null() ? std::nullopt : std::optional<int>(r.get<int>()));
    if (!j.at("address_turn").is_null()) s.address_turn = j["address_turn"].get<int>();
    s.turn_index = j.at("turn_index").get<int>();
    return s;
}

json step_outcome_to_json(const StepOutcome& o) {
    json transitions = json::array();
    for (const auto& tr : o.transitions) {
        transitions.push_back({{"concern", tr.concern},
                               {"from", state_name(tr.from)},
                               {"to", state_name(tr.to)},
                               {"trigger", trigger_name(tr.trigger)}});
    }
    return {{"new_state", agent_state_to_json(o.new_state)},
            {"transitions", transitions},
            {"blocked", o.blocked},
            {"p_reveal", o.p_reveal},
            {"p_addr", o.p_addr ? json(*o.p_addr) : json(nullptr)},
            {"address_eligible", o.address_eligible},
            {"address_hit", o.address_hit}};
}

StepOutcome step_outcome_from_json(const json& j) {
    StepOutcome o;
    o.new_state = agent_state_from_json(j.at("new_state"));
    for (const auto& tr : j.at("transitions")) {
        o.transitions.push_back({tr.at("concern").get<std::size_t>(), parse_state(tr.at("from").get<std::string>()),
                                 parse_state(tr.at("to").get<std::string>()),
                                 parse_trigger(tr.at("trigger").get<std::string>())});
    }
    o.blocked = j.at("blocked").get<bool>();
    o.p_reveal = j.at("p_reveal").get<std::vector<double>>();
    if (!j.at("p_addr").is_null()) o.p_addr = j["p_addr"].get<double>();
    o.address_eligible = j.at("address_eligible").get<bool>();
    o.address_hit = j.at("address_hit").get<bool>();
    return o;
}

json layout_to_json(const ConcernLayout& l) {
    return {{"clusters", l.clusters}, {"primary", l.primary ? json(*l.primary) : json(nullptr)}};
}

ConcernLayout layout_from_json(const json& j) {
    ConcernLayout l;
    l.clusters = j.at("clusters").get<std::vector<std::size_t>>();
    if (!j.at("primary").is_null()) l.primary = j["primary"].get<std::size_t>();
    return l;
}

}  // namespace rpsim

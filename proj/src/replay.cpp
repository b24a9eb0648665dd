#include "rpsim/replay.hpp"

#include "rpsim/error.hpp"

namespace rpsim {

TraceReplay replay_trace(const SessionRecord& record, const PolicyConfig& policy) {
    const std::size_t k = record.profile.concern_count();
    for (std::size_t i = 0; i < record.turns.size(); ++i) {
        const auto& t = record.turns[i];
        if (t.overlaps.size() != k || t.outcome.p_reveal.size() != k) {
            throw MissingProbabilities("session " + record.session_id + " turn " + std::to_string(i + 1) +
                                       " carries no per-concern probabilities");
        }
    }
    for (const auto& c : record.layout.clusters) {
        if (c >= policy.cluster_count())
            throw ConfigError("candidate '" + policy.version + "' has too few clusters for " + record.session_id);
    }

    TraceReplay out;
    out.session_id = record.session_id;
    out.task = record.task();
    out.concerns = k;
    AgentState state = initial_agent_state(k);
    const bool capped = record.protocol.mode == ProtocolMode::SuccessCapped && record.layout.primary;
    for (const auto& t : record.turns) {
        out.outcomes.push_back(step(record.task(), state, t.analysis, t.overlaps, record.layout, policy));
        state = out.outcomes.back().new_state;
        if (capped && intervention_gate(state, *record.layout.primary)) break;
    }
    out.revealed = state.revealed_count();
    if (record.task() == TaskKind::Intervention) out.address_turn = state.address_turn;
    return out;
}

ReplayReport replay_thresholds(const std::vector<SessionRecord>& traces, const std::vector<PolicyConfig>& candidates) {
    ReplayReport report;
    for (const auto& cand : candidates) {
        cand.validate();
        CandidateReport cr;
        cr.version = cand.version;
        cr.sessions = traces.size();
        double reveal_sum = 0.0;
        std::size_t interventions = 0, successes = 0;
        double address_sum = 0.0;
        for (const auto& rec : traces) {
            auto tr = replay_trace(rec, cand);
            reveal_sum += tr.reveal_rate();
            if (tr.task == TaskKind::Intervention) {
                ++interventions;
                if (tr.address_turn) {
                    ++successes;
                    address_sum += *tr.address_turn;
                }
            }
            cr.traces.push_back(std::move(tr));
        }
        if (!traces.empty()) cr.reveal_rate = reveal_sum / static_cast<double>(traces.size());
        if (interventions > 0) cr.success_rate = static_cast<double>(successes) / interventions;
        if (successes > 0) cr.mean_turn_to_address = address_sum / successes;
        report.candidates.push_back(std::move(cr));
    }
    return report;
}

json replay_report_to_json(const ReplayReport& report, bool include_traces) {
    json out = json::array();
    for (const auto& c : report.candidates) {
        json j = {{"version", c.version},
                  {"sessions", c.sessions},
                  {"reveal_rate", c.reveal_rate},
                  {"success_rate", c.success_rate ? json(*c.success_rate) : json(nullptr)},
                  {"mean_turn_to_address", c.mean_turn_to_address ? json(*c.mean_turn_to_address) : json(nullptr)}};
        if (include_traces) {
            json traces = json::array();
            for (const auto& t : c.traces) {
                traces.push_back({{"session_id", t.session_id},
                                  {"turns", t.outcomes.size()},
                                  {"revealed", t.revealed},
                                  {"concerns", t.concerns},
                                  {"address_turn", t.address_turn ? json(*t.address_turn) : json(nullptr)}});
            }
            j["traces"] = std::move(traces);
        }
        out.push_back(std::move(j));
    }
    return {{"candidates", out}};
}

std::vector<PolicyConfig> candidates_from_json(const json& j) {
    const json* list = &j;
    if (j.is_object()) {
        if (!j.contains("candidates")) throw ConfigError("candidates file needs a 'candidates' array");
        list = &j["candidates"];
    }
    if (!list->is_array() || list->empty()) throw ConfigError("candidates must be a non-empty array");
    std::vector<PolicyConfig> out;
    for (const auto& c : *list) out.push_back(policy_from_json(c));
    return out;
}

}  // namespace rpsim

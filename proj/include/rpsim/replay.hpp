#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpsim/latent_policy.hpp"
#include "rpsim/session.hpp"

namespace rpsim {

/// One recorded session re-run under a candidate policy.
struct TraceReplay {
    std::string session_id;
    TaskKind task = TaskKind::Confirmation;
    std::vector<StepOutcome> outcomes;
    std::size_t concerns = 0;
    std::size_t revealed = 0;
    std::optional<int> address_turn;

    double reveal_rate() const { return concerns == 0 ? 0.0 : static_cast<double>(revealed) / concerns; }
};

struct CandidateReport {
    std::string version;
    std::size_t sessions = 0;
    /// Mean per-session fraction of concerns revealed.
    double reveal_rate = 0.0;
    /// Over intervention sessions only; absent when there are none.
    std::optional<double> success_rate;
    /// Over successful intervention sessions only.
    std::optional<double> mean_turn_to_address;
    std::vector<TraceReplay> traces;
};

struct ReplayReport {
    std::vector<CandidateReport> candidates;
};

/// Replays the stored rubric vectors and overlaps of one record under
/// `policy`. Success-capped records stop at the first gate-true turn, since
/// the live session would have ended there. Throws MissingProbabilities when
/// the record lacks per-turn analyses.
TraceReplay replay_trace(const SessionRecord& record, const PolicyConfig& policy);

/// Pure function of its inputs. Throws MissingProbabilities and ConfigError.
ReplayReport replay_thresholds(const std::vector<SessionRecord>& traces, const std::vector<PolicyConfig>& candidates);

json replay_report_to_json(const ReplayReport& report, bool include_traces = false);

/// Candidates file: either a JSON array of policy objects or {"candidates": [...]}.
std::vector<PolicyConfig> candidates_from_json(const json& j);

}  // namespace rpsim

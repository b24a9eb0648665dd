#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rpsim/case_model.hpp"
#include "rpsim/latent_policy.hpp"
#include "rpsim/turn_evaluator.hpp"

namespace rpsim {

enum class ConcernState : int { Hidden = 0, Revealed = 1, Addressed = 2 };

std::string_view state_name(ConcernState s);
ConcernState parse_state(std::string_view name);

enum class Trigger { HighThreshold, SustainedLow, AddressGate };

std::string_view trigger_name(Trigger t);
Trigger parse_trigger(std::string_view name);

/// Per-session latent state. Turn indices are 1-based clinician turns;
/// turn_index is the number of clinician turns processed so far.
struct AgentState {
    std::vector<ConcernState> states;
    std::vector<double> evidence;
    double address_evidence = 0.0;
    std::vector<std::size_t> low_hits;
    std::size_t address_hits = 0;
    std::vector<std::optional<int>> reveal_turn;
    std::optional<int> address_turn;
    int turn_index = 0;

    std::size_t concern_count() const { return states.size(); }
    std::size_t revealed_count() const;

    bool operator==(const AgentState&) const = default;
};

AgentState initial_agent_state(std::size_t concerns);

struct Transition {
    std::size_t concern = 0;
    ConcernState from = ConcernState::Hidden;
    ConcernState to = ConcernState::Hidden;
    Trigger trigger = Trigger::HighThreshold;

    bool operator==(const Transition&) const = default;
};

struct StepOutcome {
    AgentState new_state;
    std::vector<Transition> transitions;
    bool blocked = false;
    std::vector<double> p_reveal;
    std::optional<double> p_addr;
    bool address_eligible = false;
    bool address_hit = false;

    bool operator==(const StepOutcome&) const = default;
};

/// Static concern metadata the machine needs: cluster per concern and c*.
struct ConcernLayout {
    std::vector<std::size_t> clusters;
    std::optional<std::size_t> primary;

    bool operator==(const ConcernLayout&) const = default;
};

ConcernLayout layout_for(const PatientProfile& profile, TaskKind task);

/// One clinician turn of reveal dynamics. Throws ArityMismatch.
StepOutcome step_confirmation(const AgentState& state, const TurnAnalysis& analysis, std::span<const double> overlaps,
                              const ConcernLayout& layout, const PolicyConfig& cfg);

/// Reveal dynamics followed by the address track for c*.
/// Throws MissingPrimaryConcern and ArityMismatch.
StepOutcome step_intervention(const AgentState& state, const TurnAnalysis& analysis, std::span<const double> overlaps,
                              const ConcernLayout& layout, const PolicyConfig& cfg);

/// Dispatches on the task.
StepOutcome step(TaskKind task, const AgentState& state, const TurnAnalysis& analysis, std::span<const double> overlaps,
                 const ConcernLayout& layout, const PolicyConfig& cfg);

/// True iff the primary concern is Addressed.
bool intervention_gate(const AgentState& state, std::size_t primary);

json agent_state_to_json(const AgentState& s);
AgentState agent_state_from_json(const json& j);
json step_outcome_to_json(const StepOutcome& o);
StepOutcome step_outcome_from_json(const json& j);
json layout_to_json(const ConcernLayout& l);
ConcernLayout layout_from_json(const json& j);

}  // namespace rpsim

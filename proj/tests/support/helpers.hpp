#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rpsim/case_model.hpp"
#include "rpsim/config.hpp"
#include "rpsim/dynamics.hpp"
#include "rpsim/latent_policy.hpp"
#include "rpsim/metrics.hpp"
#include "rpsim/session.hpp"

namespace testsupport {

std::filesystem::path source_dir();
std::filesystem::path fixture_path(const std::string& relative);

/// Loads fixtures/cases/<id>.json.
std::shared_ptr<const rpsim::PatientProfile> fixture_case(const std::string& id);
std::vector<std::string> fixture_case_ids();

/// Config whose relative paths point into the source tree.
rpsim::AppConfig fixture_config();

/// Lexical evaluator, scripted responder, logical clock, no sink.
rpsim::SessionBackends scripted_backends();

/// Drives a session with a scripted clinician from the fixtures.
rpsim::SessionRecord run_fixture_session(const std::string& case_id, const std::string& clinician,
                                         const rpsim::ProtocolSpec& protocol,
                                         const rpsim::PolicyConfig& policy = rpsim::PolicyConfig::defaults());

/// Policy with all weights zero except the overlap weight (reveal) and the
/// first rubric weight (address), so that p = σ(o) and p_addr = σ(w0·z0).
rpsim::PolicyConfig probe_policy(std::size_t clusters = 1);

double logit(double p);

rpsim::TurnAnalysis analysis(rpsim::Intent intent = rpsim::Intent::NaturalInquiry, double z0 = 0.0);

/// A minimal valid case document with `k` concerns named c1..ck.
rpsim::json minimal_case_json(std::size_t k = 1, bool with_intervention = false);

/// Profile with concerns of the given categories; ids c1..ck, content "concern <i>".
rpsim::PatientProfile synthetic_profile(const std::vector<rpsim::ConcernCategory>& categories,
                                        std::optional<std::size_t> primary = std::nullopt);

/// Candidates handed back verbatim, for scoring tests.
class StubMatcher final : public rpsim::FindingMatcher {
public:
    explicit StubMatcher(std::vector<rpsim::MatchCandidate> c) : c_(std::move(c)) {}
    std::vector<rpsim::MatchCandidate> candidates(const rpsim::SubmittedFindings&,
                                                  const std::vector<rpsim::HiddenConcern>&,
                                                  const std::vector<rpsim::DialogueLine>&) const override {
        return c_;
    }
    std::string name() const override { return "stub"; }

private:
    std::vector<rpsim::MatchCandidate> c_;
};

/// Builds a record whose per-turn states follow the given reveal and address
/// turns (0 = never). Turns in `meta` carry the meta-probe intent and are
/// marked blocked.
rpsim::SessionRecord synthetic_record(rpsim::TaskKind task, const std::vector<rpsim::ConcernCategory>& gold,
                                      const std::vector<int>& reveal_turns, int turns,
                                      const std::vector<int>& meta = {}, std::optional<std::size_t> primary = std::nullopt,
                                      int address_turn = 0);

}  // namespace testsupport

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpsim/latent_policy.hpp"
#include "rpsim/metrics.hpp"
#include "rpsim/patient_responder.hpp"
#include "rpsim/session.hpp"
#include "rpsim/transport.hpp"
#include "rpsim/turn_evaluator.hpp"

namespace rpsim {

struct BackendSpec {
    std::string backend;         // "lexical" / "judge", "scripted" / "model"
    std::string endpoint;        // key into AppConfig::endpoints
    std::string prompt_file;
    int max_attempts = 3;
    json options = json::object();
};

struct TokenSpec {
    std::string env;
    std::string role;  // "clinician" or "evaluator"
};

struct ServiceSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path cases_dir = "fixtures/cases";
    std::filesystem::path traces_dir = "traces";
    std::vector<TokenSpec> tokens;
    double wall_clock_seconds = 600.0;
};

struct AppConfig {
    std::map<std::string, HttpEndpointConfig> endpoints;
    BackendSpec evaluator{"lexical", "", "", 3, json::object()};
    BackendSpec responder{"scripted", "", "", 3, json::object()};
    BackendSpec matcher{"lexical", "", "", 3, json::object()};
    std::optional<std::string> style_judge_endpoint;
    std::optional<std::filesystem::path> policy_file;
    std::filesystem::path clinician_fixtures = "fixtures/clinicians";
    ProtocolSpec confirmation_protocol = ProtocolSpec::adaptive(5, 20);
    ProtocolSpec intervention_protocol = ProtocolSpec::success_capped(20);
    ServiceSettings service;
    int workers = 1;

    static AppConfig defaults();
};

/// Parses a config document. Relative paths resolve against `base_dir`. Throws ConfigError.
AppConfig config_from_json(const json& j, const std::filesystem::path& base_dir = ".");
AppConfig load_config_file(const std::filesystem::path& path);

std::shared_ptr<JsonTransport> transport_for(const AppConfig& cfg, const std::string& endpoint);

std::shared_ptr<const EvaluatorBackend> make_evaluator(const AppConfig& cfg);
std::shared_ptr<const PatientResponder> make_responder(const AppConfig& cfg);
std::unique_ptr<FindingMatcher> make_matcher(const AppConfig& cfg);
std::unique_ptr<StyleJudge> make_style_judge(const AppConfig& cfg);
PolicyConfig load_policy(const AppConfig& cfg);

struct ClinicianScript {
    std::vector<std::string> utterances;
    SubmittedFindings findings;
    std::optional<int> stop_from_turn;
};

/// A named scripted clinician: a default script plus optional per-case overrides.
struct ClinicianFixture {
    std::string name;
    ClinicianScript fallback;
    std::map<std::string, ClinicianScript> cases;

    const ClinicianScript& script_for(const std::string& case_id) const;
};

ClinicianFixture clinician_fixture_from_json(const json& j);
/// Built-in fixtures: "closed", "stop", "meta".
std::optional<ClinicianFixture> builtin_clinician_fixture(const std::string& name);

/// Resolves "scripted:<fixture>" or "http:<endpoint>". Throws ConfigError.
std::unique_ptr<ClinicianAgent> make_clinician(const AppConfig& cfg, const std::string& spec,
                                               const std::string& case_id);

}  // namespace rpsim

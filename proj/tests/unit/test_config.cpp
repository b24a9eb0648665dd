#include <doctest.h>

#include "helpers.hpp"
#include "rpsim/config.hpp"
#include "rpsim/error.hpp"

using namespace rpsim;
namespace fs = std::filesystem;

TEST_CASE("defaults") {
    const auto cfg = AppConfig::defaults();
    CHECK(cfg.evaluator.backend == "lexical");
    CHECK(cfg.responder.backend == "scripted");
    CHECK(cfg.matcher.backend == "lexical");
    CHECK(cfg.confirmation_protocol.mode == ProtocolMode::AdaptiveConfirmation);
    CHECK(cfg.intervention_protocol.mode == ProtocolMode::SuccessCapped);
    CHECK(cfg.confirmation_protocol.wall_clock_limit == std::optional<double>(600.0));
    CHECK(cfg.service.tokens.size() == 2);
    CHECK(load_policy(cfg) == PolicyConfig::defaults());
    CHECK(make_evaluator(cfg)->deterministic());
    CHECK(make_responder(cfg)->name() == "scripted-v1");
    CHECK(make_matcher(cfg)->name() == "lexical");
    CHECK(make_style_judge(cfg) == nullptr);
}

TEST_CASE("shipped example config loads with paths relative to its file") {
    const auto dir = testsupport::source_dir() / "config";
    const auto cfg = load_config_file(dir / "rpsim.example.json");
    CHECK(cfg.workers == 4);
    CHECK(cfg.endpoints.size() == 3);
    CHECK(cfg.endpoints.at("judge").api_key_env == "RPSIM_JUDGE_KEY");
    CHECK(*cfg.policy_file == dir / "policy.default.json");
    CHECK(cfg.service.cases_dir == dir / "../fixtures/cases");
    CHECK(fs::exists(cfg.service.cases_dir / "fx-001.json"));
    CHECK(load_policy(cfg) == PolicyConfig::defaults());
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(config_from_json(json{{"evaluatr", json::object()}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"service", {{"prot", 1}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"evaluator", {{"backend", "lexical"}, {"retries", 2}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"workers", 0}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"service", {{"tokens", json::array({{{"env", "X"}, {"role", "admin"}}})}}}}),
                    ConfigError);
    CHECK_THROWS_AS(load_config_file("/nonexistent/rpsim.json"), ConfigError);
}

TEST_CASE("protocol slots are validated") {
    const json swapped = {{"protocols", {{"confirmation", {{"task", "intervention"}, {"mode", "success_capped"}, {"cap", 20}}}}}};
    CHECK_THROWS_AS(config_from_json(swapped), ConfigError);
    const json bad = {{"protocols", {{"confirmation", {{"task", "confirmation"}, {"mode", "adaptive"}, {"min_stop_turn", 30}, {"cap", 20}}}}}};
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("unknown backends and missing endpoints") {
    auto cfg = AppConfig::defaults();
    cfg.evaluator.backend = "oracle";
    CHECK_THROWS_AS(make_evaluator(cfg), ConfigError);
    cfg = AppConfig::defaults();
    cfg.evaluator.backend = "judge";
    cfg.evaluator.endpoint = "judge";
    CHECK_THROWS_AS(make_evaluator(cfg), ConfigError);
    cfg = AppConfig::defaults();
    cfg.matcher.backend = "judge";
    CHECK_THROWS_AS(make_matcher(cfg), MatcherUnavailable);
    cfg = AppConfig::defaults();
    cfg.responder.backend = "model";
    cfg.responder.endpoint = "patient";
    CHECK_THROWS_AS(make_responder(cfg), ConfigError);
}

TEST_CASE("remote backends construct when configured") {
    auto cfg = AppConfig::defaults();
    cfg.endpoints["j"] = HttpEndpointConfig{"j", "http://127.0.0.1:1/judge", "", 1.0};
    cfg.evaluator = BackendSpec{"judge", "j", (testsupport::source_dir() / "config/prompts/judge.txt").string(), 3, json::object()};
    cfg.matcher = BackendSpec{"judge", "j", "", 3, json::object()};
    cfg.style_judge_endpoint = "j";
    CHECK_FALSE(make_evaluator(cfg)->deterministic());
    CHECK(make_matcher(cfg)->name().rfind("judge", 0) == 0);
    CHECK(make_style_judge(cfg) != nullptr);
}

TEST_CASE("clinician fixtures") {
    const auto cfg = testsupport::fixture_config();
    for (const char* name : {"closed", "stop", "meta"}) CHECK(builtin_clinician_fixture(name).has_value());
    CHECK_FALSE(builtin_clinician_fixture("elicit").has_value());
    CHECK(builtin_clinician_fixture("stop")->fallback.stop_from_turn == 1);

    auto agent = make_clinician(cfg, "scripted:elicit", "fx-002");
    const auto view = project_clinician_view(*testsupport::fixture_case("fx-002"), TaskKind::Confirmation);
    const auto move = agent->next_turn(view, {});
    CHECK(move.utterance == "What worries you about injecting yourself with needles?");
    CHECK_FALSE(move.stop);

    CHECK_THROWS_AS(make_clinician(cfg, "elicit", "fx-001"), ConfigError);
    CHECK_THROWS_AS(make_clinician(cfg, "scripted:", "fx-001"), ConfigError);
    CHECK_THROWS_AS(make_clinician(cfg, "scripted:nobody", "fx-001"), ConfigError);
    CHECK_THROWS_AS(make_clinician(cfg, "http:nowhere", "fx-001"), ConfigError);

    CHECK_THROWS_AS(clinician_fixture_from_json(json{{"name", "x"}, {"default", {{"utterances", json::array()}}}}),
                    ConfigError);
    CHECK_THROWS_AS(clinician_fixture_from_json(json{{"name", "x"},
                                                     {"default",
                                                      {{"utterances", {"Hi?"}},
                                                       {"findings", json::array({{{"category", "Stigma"}, {"description", "d"}}})}}}}),
                    ConfigError);
}

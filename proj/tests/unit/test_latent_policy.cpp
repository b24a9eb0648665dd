#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "rpsim/error.hpp"
#include "rpsim/latent_policy.hpp"

using namespace rpsim;

TEST_CASE("zero weights give one half") {
    PolicyConfig cfg = testsupport::probe_policy(2);
    std::fill(cfg.w.begin(), cfg.w.end(), 0.0);
    std::array<double, kRubricDims> z{};
    z.fill(0.7);
    CHECK(reveal_probability(cfg, RubricVector(z), 0.9, 1) == 0.5);
    std::fill(cfg.w_addr.begin(), cfg.w_addr.end(), 0.0);
    CHECK(address_probability(cfg, RubricVector(z), 0) == 0.5);
}

TEST_CASE("log 3 dot products give three quarters and one quarter") {
    PolicyConfig cfg = testsupport::probe_policy(1);
    cfg.w[kRubricDims] = std::log(3.0);
    CHECK(reveal_probability(cfg, RubricVector(), 1.0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    cfg.w_addr[0] = -std::log(3.0);
    RubricVector z;
    z[RubricDim::DataGathering] = 1.0;
    CHECK(address_probability(cfg, z, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("cluster deltas shift the logit") {
    PolicyConfig cfg = testsupport::probe_policy(2);
    cfg.deltas[1][kRubricDims] = std::log(3.0) - 1.0;
    CHECK(reveal_probability(cfg, RubricVector(), 1.0, 1) == doctest::Approx(0.75));
    CHECK_THROWS_AS(reveal_probability(cfg, RubricVector(), 1.0, 2), ArityMismatch);
}

TEST_CASE("sigmoid is stable at the extremes") {
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) == 0.0);
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(2.0) == doctest::Approx(oracle::logistic(2.0)));
    CHECK(sigmoid(-2.0) == doctest::Approx(oracle::logistic(-2.0)));
}

TEST_CASE("validation rejects inconsistent constants") {
    auto bad = [](auto mutate) {
        PolicyConfig cfg = PolicyConfig::defaults();
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    };
    CHECK_NOTHROW(PolicyConfig::defaults().validate());
    bad([](PolicyConfig& c) { c.t_lo = 0.8; });
    bad([](PolicyConfig& c) { c.alpha = 0.0; });
    bad([](PolicyConfig& c) { c.beta = 1.5; });
    bad([](PolicyConfig& c) { c.n_low = 0; });
    bad([](PolicyConfig& c) { c.k_addr = 0; });
    bad([](PolicyConfig& c) { c.eta = 1.0; });
    bad([](PolicyConfig& c) { c.t_addr = 0.0; });
    bad([](PolicyConfig& c) { c.w.pop_back(); });
    bad([](PolicyConfig& c) { c.deltas_addr.pop_back(); });
    bad([](PolicyConfig& c) { c.tightening->cap = 0.5; });
    bad([](PolicyConfig& c) { c.tightening->lo_increment = 0.1; });
    bad([](PolicyConfig& c) { c.w[0] = std::nan(""); });
}

TEST_CASE("progressive tightening is capped") {
    PolicyConfig cfg = PolicyConfig::defaults();
    CHECK(effective_thresholds(cfg, 0).hi == 0.75);
    CHECK(effective_thresholds(cfg, 2).hi == doctest::Approx(0.81));
    CHECK(effective_thresholds(cfg, 2).lo == doctest::Approx(0.61));
    CHECK(effective_thresholds(cfg, 50).hi == 0.95);
    cfg.tightening.reset();
    CHECK(effective_thresholds(cfg, 5).lo == 0.55);
}

TEST_CASE("policy JSON round-trips and validates") {
    PolicyConfig cfg = PolicyConfig::defaults(3);
    cfg.version = "x1";
    cfg.tightening.reset();
    const auto j = policy_to_json(cfg);
    CHECK(j["schema_version"] == kPolicySchemaVersion);
    CHECK(policy_from_json(j) == cfg);
    auto broken = j;
    broken["T_lo"] = 0.9;
    CHECK_THROWS_AS(policy_from_json(broken), ConfigError);
    auto wrong = j;
    wrong["schema_version"] = "other";
    CHECK_THROWS_AS(policy_from_json(wrong), ConfigError);
}

TEST_CASE("shipped default policy file equals the built-in defaults") {
    const auto cfg = load_policy_file((testsupport::source_dir() / "config/policy.default.json").string());
    CHECK(cfg == PolicyConfig::defaults());
}

TEST_CASE("fitting rejects degenerate input") {
    std::vector<PseudoLabeledTurn> one = {{{1.0, 0.0}, 1, 0}, {{0.0, 1.0}, 1, 0}};
    CHECK_THROWS_AS(fit_logistic(one, 0.1), DegenerateData);
    std::vector<PseudoLabeledTurn> ragged = {{{1.0, 0.0}, 1, 0}, {{0.0}, 0, 0}};
    CHECK_THROWS_AS(fit_logistic(ragged, 0.1), ArityMismatch);
}

TEST_CASE("symmetric data fits to one half") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<PseudoLabeledTurn> data;
    for (int i = 0; i < 100; ++i) {
        PseudoLabeledTurn t{{u(rng), u(rng), u(rng)}, 1, 0};
        data.push_back(t);
        t.label = 0;
        data.push_back(t);
    }
    const auto fit = fit_logistic(data, 0.01);
    for (double w : fit.w) CHECK(std::abs(w) < 1e-6);
    CHECK(fit.converged);
}

TEST_CASE("objective decreases along the fit and separable data is learned") {
    std::vector<PseudoLabeledTurn> data;
    for (int i = 0; i < 20; ++i) {
        data.push_back({{1.0, 0.1 * (i % 5)}, 1, 0});
        data.push_back({{-1.0, 0.1 * (i % 5)}, 0, 0});
    }
    const auto fit = fit_logistic(data, 0.01);
    CHECK(fit.train_accuracy == 1.0);
    for (std::size_t i = 1; i < fit.loss_curve.size(); ++i) CHECK(fit.loss_curve[i] <= fit.loss_curve[i - 1] + 1e-15);
    const auto zeros = std::vector<double>(2, 0.0);
    CHECK(logistic_objective(data, fit.w, fit.deltas, 0.01, 10.0) <
          logistic_objective(data, zeros, {zeros}, 0.01, 10.0));
}

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpsim/turn_evaluator.hpp"

namespace rpsim {

inline constexpr std::size_t kRevealArity = kRubricDims + 1;  // [z; o]
inline constexpr std::size_t kAddressArity = kRubricDims;     // z

/// Per-reveal threshold increments. Effective thresholds are
/// min(cap, base + increment * already_revealed).
struct TighteningSchedule {
    double hi_increment = 0.03;
    double lo_increment = 0.03;
    double cap = 0.95;

    bool operator==(const TighteningSchedule&) const = default;
};

struct Thresholds {
    double hi = 0.0;
    double lo = 0.0;
};

/// Learned weights plus every dynamics constant. Immutable once validated.
struct PolicyConfig {
    std::string version = "default-v1";

    std::vector<double> w;                         // kRevealArity
    std::vector<std::vector<double>> deltas;       // clusters x kRevealArity
    std::vector<double> w_addr;                    // kAddressArity
    std::vector<std::vector<double>> deltas_addr;  // clusters x kAddressArity

    double alpha = 0.6;
    double beta = 0.6;
    double t_hi = 0.75;
    double t_lo = 0.55;
    std::size_t n_low = 2;  // consecutive turns at or above t_lo
    double eta = 0.6;       // per-turn addressing quality gate
    double t_addr = 0.7;    // addressing EMA gate
    std::size_t k_addr = 2; // consecutive addressing hits
    std::size_t lag = 1;    // minimum turns between reveal and address
    std::optional<TighteningSchedule> tightening = TighteningSchedule{};
    bool meta_block = true;

    std::size_t cluster_count() const { return deltas.size(); }

    /// Throws ConfigError on any violated ordering or arity.
    void validate() const;

    /// Constants and hand-set weights used when no fitted policy is supplied.
    static PolicyConfig defaults(std::size_t clusters = kCategoryCount);

    bool operator==(const PolicyConfig&) const = default;
};

inline constexpr const char* kPolicySchemaVersion = "rpsim-policy-v1";

json policy_to_json(const PolicyConfig& cfg);
/// Parses and validates. Throws ConfigError.
PolicyConfig policy_from_json(const json& j);
PolicyConfig load_policy_file(const std::string& path);

Thresholds effective_thresholds(const PolicyConfig& cfg, std::size_t already_revealed);

double sigmoid(double x);

/// σ((w + δ_cluster)ᵀ [z; o]).
double reveal_probability(const PolicyConfig& cfg, const RubricVector& z, double overlap, std::size_t cluster);
/// σ((w_addr + δaddr_cluster)ᵀ z).
double address_probability(const PolicyConfig& cfg, const RubricVector& z, std::size_t cluster);

struct PseudoLabeledTurn {
    std::vector<double> features;
    int label = 0;
    std::size_t cluster = 0;
};

struct FitOptions {
    double tolerance = 1e-7;
    std::size_t max_iterations = 20000;
    /// 0 means one past the largest cluster id seen.
    std::size_t cluster_count = 0;
    /// Deltas are penalized this many times harder than the shared vector.
    double delta_reg_multiplier = 10.0;
};

struct FitResult {
    std::vector<double> w;
    std::vector<std::vector<double>> deltas;
    bool converged = false;
    std::size_t iterations = 0;
    double final_gradient_norm = 0.0;
    std::vector<double> loss_curve;
    double train_accuracy = 0.0;
};

/// Full-batch gradient descent with Armijo backtracking on the mean
/// negative log-likelihood plus reg/2·|w|² + (m·reg)/2·Σ|δ|², from zeros.
/// Throws DegenerateData for single-class input and ArityMismatch for ragged
/// features. Hitting the iteration cap is reported through `converged`.
FitResult fit_logistic(std::span<const PseudoLabeledTurn> turns, double reg, const FitOptions& opts = {});

/// Objective used by fit_logistic, exposed for tests.
double logistic_objective(std::span<const PseudoLabeledTurn> turns, const std::vector<double>& w,
                          const std::vector<std::vector<double>>& deltas, double reg, double delta_reg_multiplier);

json fit_report_to_json(const FitResult& fit);

}  // namespace rpsim

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rpsim/case_model.hpp"
#include "rpsim/transport.hpp"

namespace rpsim {

// Turn-level rubric dimensions, in feature order.
enum class RubricDim : std::size_t {
    DataGathering = 0,          // DG
    EmotionalResponsiveness,    // ER
    PartnershipActivation,      // PA
    ConcernElicitation,         // CE
    SpaceProvision,             // SP
    NecessitySupport,           // NS
    ConcernMitigation,          // CM
    PlanSpecificity,            // PS
    PendingQuestionCoverage,    // PQC
    MetaProbeRisk,              // MR
};

inline constexpr std::size_t kRubricDims = 10;

std::string_view rubric_code(RubricDim d);
std::optional<RubricDim> parse_rubric_code(std::string_view code);

/// Ten scores in [0,1]. Construction clamps nothing; use valid() to check.
class RubricVector {
public:
    RubricVector() { values_.fill(0.0); }
    explicit RubricVector(const std::array<double, kRubricDims>& v) : values_(v) {}

    double operator[](RubricDim d) const { return values_[static_cast<std::size_t>(d)]; }
    double& operator[](RubricDim d) { return values_[static_cast<std::size_t>(d)]; }
    double at(std::size_t i) const { return values_.at(i); }

    const std::array<double, kRubricDims>& values() const { return values_; }
    bool valid() const;

    bool operator==(const RubricVector&) const = default;

private:
    std::array<double, kRubricDims> values_;
};

enum class Intent : std::size_t { NaturalInquiry = 0, MetaCategoryProbe, PlanProposal, EmpathyOnly, Other };
inline constexpr std::size_t kIntentCount = 5;

std::string_view intent_name(Intent i);
Intent parse_intent(std::string_view name);

struct TurnAnalysis {
    Intent intent = Intent::Other;
    std::array<double, kIntentCount> intent_probs{};
    RubricVector rubric;
    bool pending_question_covered = false;
    double empathy_strength = 0.0;
    bool open_question = false;
    std::string backend;
    /// Verbatim judge response, kept for replay when a remote judge produced this analysis.
    std::optional<std::string> raw_response;
    std::vector<std::string> warnings;

    bool operator==(const TurnAnalysis&) const = default;
};

json analysis_to_json(const TurnAnalysis& a);
TurnAnalysis analysis_from_json(const json& j);

/// argmax with ties broken by enum order.
Intent argmax_intent(const std::array<double, kIntentCount>& probs);

class EvaluatorBackend {
public:
    virtual ~EvaluatorBackend() = default;
    virtual TurnAnalysis evaluate(std::string_view utterance, const std::vector<std::string>& history_window,
                                  const std::optional<std::string>& pending_question) const = 0;
    virtual std::string name() const = 0;
    virtual bool deterministic() const = 0;
};

struct LexicalConfig {
    /// Phrases whose verbatim presence marks a meta-category probe.
    std::vector<std::string> meta_synonyms;
    double meta_threshold = 0.5;
    /// Minimum fraction of the pending question's content tokens that must be
    /// echoed for the question to count as covered.
    double pending_cover_threshold = 0.25;
    std::size_t history_window = 3;

    static LexicalConfig defaults();
    static LexicalConfig from_json(const json& j);
};

/// Open-question rule shared by the lexical backend and the style metrics:
/// ends in '?' and starts with or contains one of the lead words.
bool is_open_question(std::string_view utterance);

/// Deterministic keyword-lexicon evaluator. Pure function of its inputs.
class LexicalEvaluator final : public EvaluatorBackend {
public:
    explicit LexicalEvaluator(LexicalConfig cfg = LexicalConfig::defaults());

    TurnAnalysis evaluate(std::string_view utterance, const std::vector<std::string>& history_window,
                          const std::optional<std::string>& pending_question) const override;
    std::string name() const override { return "lexical-v1"; }
    bool deterministic() const override { return true; }

    const LexicalConfig& config() const { return cfg_; }

private:
    LexicalConfig cfg_;
};

struct JudgeConfig {
    std::string schema_version = "rpsim-judge-v1";
    std::string prompt_template;
    int max_attempts = 3;
    bool clamp_out_of_range = true;
    double meta_threshold = 0.5;
};

/// Parses a judge payload. Throws JudgeMalformed or JudgeOutOfRange.
TurnAnalysis parse_judge_payload(const json& payload, const JudgeConfig& cfg);

/// Remote LLM-judge client. Retries malformed responses, then gives up.
class JudgeEvaluator final : public EvaluatorBackend {
public:
    JudgeEvaluator(JudgeConfig cfg, std::shared_ptr<JsonTransport> transport);

    TurnAnalysis evaluate(std::string_view utterance, const std::vector<std::string>& history_window,
                          const std::optional<std::string>& pending_question) const override;
    std::string name() const override;
    bool deterministic() const override { return false; }

private:
    JudgeConfig cfg_;
    std::shared_ptr<JsonTransport> transport_;
};

}  // namespace rpsim

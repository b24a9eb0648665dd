#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rpsim/session.hpp"
#include "rpsim/transport.hpp"

namespace rpsim {

/// 2PR/(P+R), 0 when P+R = 0.
double f1_score(double precision, double recall);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    /// Empty predictions or empty gold give 0 rather than undefined.
    static Prf from_counts(std::size_t matched, std::size_t predicted, std::size_t gold);

    bool operator==(const Prf&) const = default;
};

// ---- matching -------------------------------------------------------------

struct MatchCandidate {
    std::size_t finding = 0;
    std::size_t concern = 0;
    double score = 0.0;
};

struct MatchPair {
    std::size_t finding = 0;
    std::size_t concern = 0;
    std::string concern_id;
    double score = 0.0;
    bool category_match = false;

    bool operator==(const MatchPair&) const = default;
};

/// Produces the admissible (finding, concern) pairs with their scores.
class FindingMatcher {
public:
    virtual ~FindingMatcher() = default;
    virtual std::vector<MatchCandidate> candidates(const SubmittedFindings& findings,
                                                   const std::vector<HiddenConcern>& gold,
                                                   const std::vector<DialogueLine>& transcript) const = 0;
    virtual std::string name() const = 0;
};

/// Admissible iff overlap_score(description, content) >= threshold.
class LexicalMatcher final : public FindingMatcher {
public:
    explicit LexicalMatcher(double threshold = 0.35) : threshold_(threshold) {}
    std::vector<MatchCandidate> candidates(const SubmittedFindings& findings, const std::vector<HiddenConcern>& gold,
                                           const std::vector<DialogueLine>& transcript) const override;
    std::string name() const override { return "lexical"; }
    double threshold() const { return threshold_; }

private:
    double threshold_;
};

/// Remote matcher. Expects {"pairs": [{"finding": i, "concern": j, "score": s}, ...]}
/// listing only the pairs it accepts. Any failure surfaces as MatcherUnavailable.
class JudgeMatcher final : public FindingMatcher {
public:
    JudgeMatcher(std::shared_ptr<JsonTransport> transport, std::string prompt_template = {});
    std::vector<MatchCandidate> candidates(const SubmittedFindings& findings, const std::vector<HiddenConcern>& gold,
                                           const std::vector<DialogueLine>& transcript) const override;
    std::string name() const override;

private:
    std::shared_ptr<JsonTransport> transport_;
    std::string prompt_template_;
};

/// Maximum-total-score one-to-one assignment by exhaustive search over the
/// admissible pairs. Totals within 1e-12 tie; ties go to the lexicographically
/// smallest list of (finding, concern) pairs. Result is sorted by finding.
std::vector<MatchCandidate> best_assignment(const std::vector<MatchCandidate>& candidates);

std::vector<MatchPair> match_findings(const SubmittedFindings& findings, const std::vector<HiddenConcern>& gold,
                                      const FindingMatcher& matcher, const std::vector<DialogueLine>& transcript = {});

// ---- per-record scores ----------------------------------------------------

struct ConfirmationScores {
    std::size_t concerns = 0;
    std::size_t revealed = 0;
    std::size_t findings = 0;
    double reveal_rate = 0.0;

    std::size_t coarse_matched = 0;
    Prf coarse;
    std::vector<MatchPair> matches;
    Prf fine;
    bool mbnr = false;
    std::size_t category_matched = 0;
    std::optional<double> category_accuracy;

    /// Matching restricted to concerns revealed in the trace.
    std::size_t process_matched = 0;
    Prf process;

    std::size_t turns = 0;
    std::size_t meta_turns = 0;
    std::size_t blocked_meta_turns = 0;
    double meta_probe_rate = 0.0;
    bool full_reveal = false;
    std::optional<int> turn_to_full_reveal;
};

struct InterventionScores {
    bool success = false;
    std::size_t concerns = 0;
    std::size_t revealed = 0;
    double reveal_rate = 0.0;
    std::optional<int> primary_reveal_turn;
    std::optional<int> turn_to_address;
    std::optional<int> reveal_to_address;
    std::size_t turns = 0;
    std::size_t meta_turns = 0;
    std::size_t blocked_meta_turns = 0;
    double meta_probe_rate = 0.0;
    /// Diagnostics over turns after the addressing turn; absent when there are none.
    std::optional<double> post_address_open_ratio;
    std::optional<double> post_address_challenge_ratio;
};

inline constexpr std::array<const char*, 5> kValueCategories = {
    "autonomy/control", "safety/risk avoidance", "trust/respect/dignity", "family/social responsibility",
    "practical burden/cost/logistics"};

/// Judge dimensions on the 0/1/2 scale plus detected patient values.
struct StyleJudgement {
    std::map<std::string, int> dims;
    std::vector<std::string> values;
    std::optional<std::string> raw_response;

    std::size_t values_detected() const { return values.size(); }
};

/// Dimension names the judge must return for a task.
std::vector<std::string> style_dims_for(TaskKind task);

/// Throws StyleJudgeMalformed.
StyleJudgement parse_style_judgement(const json& payload, TaskKind task);

class StyleJudge {
public:
    virtual ~StyleJudge() = default;
    virtual StyleJudgement judge(TaskKind task, const std::vector<DialogueLine>& transcript) const = 0;
    virtual std::string name() const = 0;
};

class HttpStyleJudge final : public StyleJudge {
public:
    HttpStyleJudge(std::shared_ptr<JsonTransport> transport, std::string prompt_template = {});
    StyleJudgement judge(TaskKind task, const std::vector<DialogueLine>& transcript) const override;
    std::string name() const override;

private:
    std::shared_ptr<JsonTransport> transport_;
    std::string prompt_template_;
};

struct ReadabilityCounts {
    std::size_t words = 0;
    std::size_t sentences = 0;
    std::size_t syllables = 0;

    ReadabilityCounts& operator+=(const ReadabilityCounts& o);
};

/// Syllable heuristic: letters only, lowercased; words of <= 3 letters count
/// one; otherwise count runs of vowels (a e i o u y), drop one for a final
/// silent 'e' (not "le" after a consonant) when more than one run remains.
std::size_t count_syllables(std::string_view word);

/// Words are whitespace tokens containing a letter. A sentence ends at a
/// token whose last character is '.', '!' or '?' once at least one word has
/// been seen since the previous end; trailing words count as one more.
ReadabilityCounts readability_counts(std::string_view text);

/// 206.835 - 1.015 (words/sentences) - 84.6 (syllables/words); absent without words.
std::optional<double> flesch_reading_ease(const ReadabilityCounts& c);
std::optional<double> flesch_reading_ease(std::string_view text);

struct StyleScores {
    std::size_t turns = 0;
    std::size_t words = 0;
    double words_per_turn = 0.0;
    ReadabilityCounts readability_counts;
    std::optional<double> readability;
    std::size_t early_turns = 0;
    std::size_t early_open = 0;
    double early_open_ratio = 0.0;
    std::size_t open_turns = 0;
    double overall_open_ratio = 0.0;
    std::optional<StyleJudgement> judge;
};

/// Throws MissingFindings and WrongTask.
ConfirmationScores score_confirmation(const SessionRecord& record, const FindingMatcher& matcher);
/// Throws WrongTask.
InterventionScores score_intervention(const SessionRecord& record);
StyleScores score_style(const SessionRecord& record, const StyleJudge* judge = nullptr);

json confirmation_scores_to_json(const ConfirmationScores& s);
json intervention_scores_to_json(const InterventionScores& s);
json style_scores_to_json(const StyleScores& s);

// ---- aggregation ----------------------------------------------------------

struct Grouping {
    bool by_clinician = true;
    bool by_protocol = true;
};

/// Group label of a record, e.g. "scripted:elicit|fixed-8".
std::string group_key(const SessionRecord& record, const Grouping& grouping);
std::string protocol_label(const ProtocolSpec& p);

struct CaseScores {
    std::string session_id;
    std::string case_id;
    TaskKind task = TaskKind::Confirmation;
    std::string group;
    std::optional<ConfirmationScores> confirmation;
    std::optional<InterventionScores> intervention;
    StyleScores style;
    /// Per-turn revealed fraction and gate, carried to the end of the record.
    std::vector<double> reveal_by_turn;
    std::vector<bool> addressed_by_turn;
};

CaseScores score_case(const SessionRecord& record, const FindingMatcher& matcher, const Grouping& grouping,
                      const StyleJudge* judge = nullptr);

struct MetricRow {
    std::string task;
    std::string group;
    std::string aggregation;  // "micro" or "macro"
    std::size_t cases = 0;
    std::vector<std::pair<std::string, std::optional<double>>> values;

    std::optional<double> get(const std::string& column) const;
};

struct CurvePoint {
    std::string task;
    std::string group;
    int turn = 0;
    double reveal_rate = 0.0;
    std::optional<double> success_rate;
};

struct AggregateReport {
    std::vector<MetricRow> confirmation;
    std::vector<MetricRow> intervention;
    std::vector<MetricRow> style;
    std::vector<CurvePoint> curves;
    std::vector<CaseScores> cases;
};

/// Throws EmptyBatch.
AggregateReport aggregate(const std::vector<CaseScores>& cases);
AggregateReport aggregate(const std::vector<SessionRecord>& records, const FindingMatcher& matcher,
                          const Grouping& grouping = {}, const StyleJudge* judge = nullptr);

std::string rows_to_csv(const std::vector<MetricRow>& rows);
json rows_to_json(const std::vector<MetricRow>& rows);
std::string curves_to_csv(const std::vector<CurvePoint>& curves);
json case_scores_to_json(const CaseScores& c);

}  // namespace rpsim

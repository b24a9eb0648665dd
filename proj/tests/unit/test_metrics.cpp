#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "rpsim/error.hpp"
#include "rpsim/metrics.hpp"

using namespace rpsim;
using testsupport::StubMatcher;
using testsupport::synthetic_record;

namespace {

constexpr auto Mis = ConcernCategory::MisinformationOrMisconceptions;
constexpr auto Fear = ConcernCategory::EmotionalDiscomfortOrFear;
constexpr auto Comm = ConcernCategory::CommunicationBarriers;
constexpr auto Fin = ConcernCategory::FinancialOrInsuranceConcern;

}  // namespace

TEST_CASE("f1 and counts") {
    CHECK(f1_score(0.5, 1.0) == doctest::Approx(2.0 / 3.0));
    CHECK(f1_score(0.0, 0.0) == 0.0);
    const auto p = Prf::from_counts(2, 4, 3);
    CHECK(p.precision == 0.5);
    CHECK(p.recall == doctest::Approx(2.0 / 3.0));
    CHECK(p.f1 == doctest::Approx(4.0 / 7.0));
    CHECK(Prf::from_counts(0, 0, 3) == Prf{});
    CHECK(Prf::from_counts(0, 2, 0) == Prf{});
}

TEST_CASE("confirmation scores on a worked example") {
    auto rec = synthetic_record(TaskKind::Confirmation, {Mis, Fear, Fin}, {2, 0, 4}, 6, {3});
    rec.findings = SubmittedFindings{{Mis, "one"}, {Fin, "two"}, {Comm, "three"}};
    const StubMatcher m({{0, 0, 0.9}, {1, 2, 0.8}, {2, 1, 0.5}});
    const auto s = score_confirmation(rec, m);
    CHECK(s.reveal_rate == doctest::Approx(2.0 / 3.0));
    CHECK(s.coarse_matched == 2);
    CHECK(s.coarse.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(s.matches.size() == 3);
    CHECK(s.fine.f1 == 1.0);
    CHECK(*s.category_accuracy == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(s.mbnr);
    CHECK(s.process_matched == 2);
    CHECK(s.process.recall == 1.0);
    CHECK(s.process.precision == doctest::Approx(2.0 / 3.0));
    CHECK(s.meta_turns == 1);
    CHECK(s.blocked_meta_turns == 1);
    CHECK(s.meta_probe_rate == doctest::Approx(1.0 / 6.0));
    CHECK_FALSE(s.full_reveal);
    CHECK_FALSE(s.turn_to_full_reveal.has_value());
}

TEST_CASE("matched but never revealed") {
    auto rec = synthetic_record(TaskKind::Confirmation, {Mis, Fear}, {0, 0}, 5);
    rec.findings = SubmittedFindings{{Mis, "guess"}};
    const auto s = score_confirmation(rec, StubMatcher({{0, 0, 1.0}}));
    CHECK(s.mbnr);
    CHECK(s.process_matched == 0);
    CHECK(s.process == Prf{});
}

TEST_CASE("full reveal turn is the last reveal") {
    auto rec = synthetic_record(TaskKind::Confirmation, {Mis, Fear}, {5, 2}, 6);
    rec.findings = SubmittedFindings{};
    const auto s = score_confirmation(rec, StubMatcher({}));
    CHECK(s.full_reveal);
    CHECK(s.turn_to_full_reveal == 5);
    CHECK(s.fine == Prf{});
    CHECK_FALSE(s.category_accuracy.has_value());
}

TEST_CASE("confirmation scoring needs findings and the right task") {
    const auto rec = synthetic_record(TaskKind::Confirmation, {Mis}, {0}, 5);
    CHECK_THROWS_AS(score_confirmation(rec, StubMatcher({})), MissingFindings);
    CHECK_THROWS_AS(score_intervention(rec), WrongTask);
}

TEST_CASE("intervention scores") {
    const auto ok = score_intervention(synthetic_record(TaskKind::Intervention, {Mis, Fear}, {2, 0}, 6, {}, 0, 6));
    CHECK(ok.success);
    CHECK(ok.primary_reveal_turn == 2);
    CHECK(ok.turn_to_address == 6);
    CHECK(ok.reveal_to_address == 4);

    const auto miss = score_intervention(synthetic_record(TaskKind::Intervention, {Mis, Fear}, {2, 3}, 8, {}, 0, 0));
    CHECK_FALSE(miss.success);
    CHECK(miss.reveal_rate == 1.0);
    CHECK_FALSE(miss.turn_to_address.has_value());
    CHECK_FALSE(miss.reveal_to_address.has_value());
}

TEST_CASE("assignment maximizes the total score") {
    const std::vector<MatchCandidate> c = {{0, 0, 0.9}, {0, 1, 0.8}, {1, 0, 0.85}};
    const auto best = best_assignment(c);
    REQUIRE(best.size() == 2);
    CHECK(best[0].concern == 1);
    CHECK(best[1].concern == 0);
    CHECK(best_assignment({}).empty());

    const std::vector<MatchCandidate> tie = {{0, 0, 1.0}, {0, 1, 1.0}};
    CHECK(best_assignment(tie).front().concern == 0);
}

TEST_CASE("lexical matcher admits by overlap") {
    const auto p = testsupport::fixture_case("fx-001");
    const SubmittedFindings f = {{Mis, "believes statins damage the liver"}, {Fin, "likes gardening"}};
    const auto pairs = match_findings(f, p->hidden_concerns, LexicalMatcher());
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].concern_id == "c1");
    CHECK(pairs[0].category_match);
}

TEST_CASE("syllables and reading ease") {
    for (std::string w : {"the", "table", "beautiful", "make", "queue", "rhythm", "cheese", "education"})
        CHECK(count_syllables(w) == oracle::syllables(w));
    CHECK(count_syllables("cat") == 1);
    const auto c = readability_counts("The cat sat. It was happy");
    CHECK(c.words == 6);
    CHECK(c.sentences == 2);
    CHECK_FALSE(flesch_reading_ease("").has_value());
    const std::string s = "The cat sat on the mat.";
    CHECK(*flesch_reading_ease(s) == doctest::Approx(*oracle::flesch(s)));
}

TEST_CASE("style scores") {
    auto rec = synthetic_record(TaskKind::Confirmation, {Mis}, {0}, 1);
    rec.turns[0].utterance = "How are you feeling?";
    rec.turns[0].analysis.open_question = true;
    const auto s = score_style(rec);
    CHECK(s.early_open_ratio == 1.0);
    CHECK(s.overall_open_ratio == 1.0);
    CHECK(s.words_per_turn == 4.0);

    const auto empty = score_style(synthetic_record(TaskKind::Confirmation, {Mis}, {0}, 0));
    CHECK_FALSE(empty.readability.has_value());
    CHECK(empty.words_per_turn == 0.0);
}

TEST_CASE("style judgement parsing") {
    const auto dims = style_dims_for(TaskKind::Intervention);
    json p = {{"values", json::array({"autonomy/control"})}};
    for (const auto& d : dims) p[d] = 2;
    const auto j = parse_style_judgement(p, TaskKind::Intervention);
    CHECK(j.values_detected() == 1);
    p[dims[0]] = 3;
    CHECK_THROWS_AS(parse_style_judgement(p, TaskKind::Intervention), StyleJudgeMalformed);
    p[dims[0]] = 1;
    p["values"] = json::array({"fame"});
    CHECK_THROWS_AS(parse_style_judgement(p, TaskKind::Intervention), StyleJudgeMalformed);
}

TEST_CASE("micro pools counts and macro averages cases") {
    auto a = synthetic_record(TaskKind::Confirmation, {Mis, Fear}, {1, 0}, 5);
    auto b = synthetic_record(TaskKind::Confirmation, {Mis, Fear, Comm, Fin}, {1, 2, 3, 4}, 5);
    a.findings = b.findings = SubmittedFindings{};
    const auto report = aggregate(std::vector<SessionRecord>{a, b}, StubMatcher({}));
    REQUIRE(report.confirmation.size() == 2);
    const auto& micro = report.confirmation[0];
    const auto& macro = report.confirmation[1];
    CHECK(micro.aggregation == "micro");
    CHECK(macro.aggregation == "macro");
    CHECK(micro.cases == 2);
    CHECK(*micro.get("reveal_rate") == doctest::Approx(5.0 / 6.0));
    CHECK(*macro.get("reveal_rate") == doctest::Approx(0.75));
    CHECK(*macro.get("full_reveal_rate") == 0.5);
    CHECK_FALSE(macro.get("no_such_column").has_value());
    REQUIRE(report.curves.size() == 5);
    CHECK(report.curves[0].reveal_rate == doctest::Approx(0.375));
    CHECK(report.curves[4].reveal_rate == doctest::Approx(0.75));
}

TEST_CASE("empty batch and CSV output") {
    CHECK_THROWS_AS(aggregate(std::vector<CaseScores>{}), EmptyBatch);
    auto r = synthetic_record(TaskKind::Intervention, {Mis}, {1}, 3, {}, 0, 3);
    const auto report = aggregate(std::vector<SessionRecord>{r}, StubMatcher({}));
    const auto csv = rows_to_csv(report.intervention);
    CHECK(csv.rfind("task,group,aggregation,cases,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("success_rate") != std::string::npos);
    CHECK(*report.intervention[0].get("success_rate") == 1.0);
    CHECK(rows_to_json(report.intervention).size() == 2);
    CHECK(curves_to_csv(report.curves).rfind("task,group,turn,reveal_rate,success_rate\n", 0) == 0);
    CHECK(protocol_label(ProtocolSpec::adaptive(5, 20)) == "adaptive-20");
    CHECK(protocol_label(ProtocolSpec::fixed(TaskKind::Confirmation, 8)) == "fixed-8");
}

#include <doctest.h>

#include "helpers.hpp"
#include "rpsim/case_model.hpp"
#include "rpsim/error.hpp"

using namespace rpsim;
using testsupport::minimal_case_json;

TEST_CASE("minimal document without intervention loads with one concern") {
    const auto p = profile_from_json(minimal_case_json(1));
    CHECK(p.concern_count() == 1);
    CHECK_FALSE(p.intervention.has_value());
    CHECK(p.hidden_concerns[0].cluster_id == static_cast<std::size_t>(ConcernCategory::EmotionalDiscomfortOrFear));
    CHECK_THROWS_AS(p.primary_concern_index(), MissingIntervention);
}

TEST_CASE("dangling primary concern is a reference error") {
    auto doc = minimal_case_json(2, true);
    doc["intervention"]["primary_concern_id"] = "c9";
    CHECK_THROWS_AS(profile_from_json(doc), ReferenceError);
}

TEST_CASE("category outside the four labels is rejected") {
    auto doc = minimal_case_json(1);
    doc["hidden_concerns"][0]["category"] = "Stigma";
    CHECK_THROWS_AS(profile_from_json(doc), CategoryError);
}

TEST_CASE("schema violations") {
    SUBCASE("missing required field") {
        auto doc = minimal_case_json(1);
        doc["demographics"].erase("age");
        CHECK_THROWS_AS(profile_from_json(doc), SchemaError);
    }
    SUBCASE("unknown field") {
        auto doc = minimal_case_json(1);
        doc["extra"] = 1;
        CHECK_THROWS_AS(profile_from_json(doc), SchemaError);
    }
    SUBCASE("duplicate concern id") {
        auto doc = minimal_case_json(2);
        doc["hidden_concerns"][1]["id"] = "c1";
        CHECK_THROWS_AS(profile_from_json(doc), SchemaError);
    }
    SUBCASE("no concerns") {
        auto doc = minimal_case_json(1);
        doc["hidden_concerns"] = json::array();
        CHECK_THROWS_AS(profile_from_json(doc), SchemaError);
    }
    SUBCASE("confidence out of range") {
        auto doc = minimal_case_json(1);
        doc["hidden_concerns"][0]["confidence"] = 1.5;
        CHECK_THROWS_AS(profile_from_json(doc), SchemaError);
    }
    SUBCASE("unknown self-management key") {
        auto doc = minimal_case_json(1);
        doc["self_management_domains"]["mood"] = "x";
        CHECK_THROWS_AS(profile_from_json(doc), SchemaError);
    }
    SUBCASE("invalid JSON text") { CHECK_THROWS_AS(load_profile("{not json"), SchemaError); }
}

TEST_CASE("explicit cluster id overrides the category default") {
    auto doc = minimal_case_json(1);
    doc["hidden_concerns"][0]["cluster_id"] = 7;
    CHECK(profile_from_json(doc).hidden_concerns[0].cluster_id == 7);
}

TEST_CASE("labels round-trip") {
    for (auto c : kAllCategories) CHECK(parse_category(category_label(c)) == c);
    CHECK(parse_task("confirmation") == TaskKind::Confirmation);
    CHECK(parse_task("intervention") == TaskKind::Intervention);
    CHECK_THROWS_AS(parse_task("other"), SchemaError);
}

TEST_CASE("profile serialization round-trips") {
    const auto p = *testsupport::fixture_case("fx-001");
    const auto q = profile_from_json(profile_to_json(p));
    CHECK(profile_to_json(q) == profile_to_json(p));
    CHECK(q.primary_concern_index() == 0);
}

TEST_CASE("clinician view never carries concern content") {
    for (const auto& id : testsupport::fixture_case_ids()) {
        const auto p = testsupport::fixture_case(id);
        for (auto task : {TaskKind::Confirmation, TaskKind::Intervention}) {
            const std::string dumped = view_to_json(project_clinician_view(*p, task)).dump();
            for (const auto& c : p->hidden_concerns) {
                CHECK(dumped.find(c.content) == std::string::npos);
                CHECK(dumped.find("hidden_concerns") == std::string::npos);
            }
            CHECK(dumped.find(p->psychosocial.personality) == std::string::npos);
        }
    }
}

TEST_CASE("intervention view needs an intervention block") {
    const auto p = profile_from_json(minimal_case_json(1));
    CHECK_THROWS_AS(project_clinician_view(p, TaskKind::Intervention), MissingIntervention);
    const auto v = project_clinician_view(profile_from_json(minimal_case_json(1, true)), TaskKind::Intervention);
    CHECK(v.target_plan == "Take it daily.");
    CHECK(v.initial_preference == "Skip it.");
}

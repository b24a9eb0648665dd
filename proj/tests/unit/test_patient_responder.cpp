#include <doctest.h>

#include "helpers.hpp"
#include "rpsim/error.hpp"
#include "rpsim/patient_responder.hpp"
#include "rpsim/text.hpp"

using namespace rpsim;

namespace {

class QueueTransport final : public JsonTransport {
public:
    explicit QueueTransport(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string post(const json& body) override {
        last = body;
        ++calls;
        if (replies_.empty()) throw AdapterError("down");
        auto r = replies_.front();
        if (replies_.size() > 1) replies_.erase(replies_.begin());
        return r;
    }
    std::string describe() const override { return "queue"; }
    int calls = 0;
    json last;

private:
    std::vector<std::string> replies_;
};

std::string reply_json(const std::string& text) { return json{{"text", text}}.dump(); }

}  // namespace

TEST_CASE("scripted responder discloses a newly revealed concern") {
    const auto p = testsupport::fixture_case("fx-001");
    AgentState s = initial_agent_state(3);
    s.states[1] = ConcernState::Revealed;
    const std::vector<DialogueLine> dialogue;
    const auto r = ScriptedResponder().reply({*p, TaskKind::Confirmation, s, {1}, false, std::nullopt, dialogue});
    CHECK(r.disclosed_concern_ids == std::vector<std::string>{"c2"});
    CHECK(text::mentions_content(r.text, p->hidden_concerns[1].content, 0.9));
    CHECK(leaked_concerns(r.text, *p, s).empty());
    CHECK(r.challenge_cue);
}

TEST_CASE("nothing revealed means a generic reply without hidden content") {
    for (const auto& id : testsupport::fixture_case_ids()) {
        const auto p = testsupport::fixture_case(id);
        const AgentState s = initial_agent_state(p->concern_count());
        const std::vector<DialogueLine> dialogue;
        const auto r = ScriptedResponder().reply({*p, TaskKind::Confirmation, s, {}, false, std::nullopt, dialogue});
        CHECK(r.disclosed_concern_ids.empty());
        CHECK(leaked_concerns(r.text, *p, s).empty());
        CHECK_FALSE(r.text.empty());
    }
}

TEST_CASE("at most two issues per reply") {
    const auto p = testsupport::fixture_case("fx-001");
    AgentState s = initial_agent_state(3);
    s.states = {ConcernState::Revealed, ConcernState::Revealed, ConcernState::Revealed};
    const std::vector<DialogueLine> dialogue;
    const auto r = ScriptedResponder().reply({*p, TaskKind::Confirmation, s, {0, 1, 2}, false, std::nullopt, dialogue});
    CHECK(r.disclosed_concern_ids == std::vector<std::string>{"c1", "c2"});
    CHECK(text::word_count(r.text) <= 60);
}

TEST_CASE("disclosing the primary concern in intervention asks for help") {
    const auto p = testsupport::fixture_case("fx-001");
    AgentState s = initial_agent_state(3);
    s.states[0] = ConcernState::Revealed;
    const std::vector<DialogueLine> dialogue;
    const auto r = ScriptedResponder().reply({*p, TaskKind::Intervention, s, {0}, false, 0, dialogue});
    CHECK(r.asks_clarification.has_value());

    s.states[0] = ConcernState::Addressed;
    const auto done = ScriptedResponder().reply({*p, TaskKind::Intervention, s, {}, true, 0, dialogue});
    CHECK(done.text.find("willing to try") != std::string::npos);
    CHECK_FALSE(done.asks_clarification.has_value());
}

TEST_CASE("model prompt carries only revealed concerns") {
    const auto p = testsupport::fixture_case("fx-001");
    AgentState s = initial_agent_state(3);
    s.states[2] = ConcernState::Revealed;
    const std::vector<DialogueLine> dialogue = {{"clinician", "How are you?"}};
    const ReplyContext ctx{*p, TaskKind::Confirmation, s, {2}, false, std::nullopt, dialogue};
    const auto prompt = build_patient_prompt(ctx, "Play the patient.");
    CHECK(prompt.find(p->hidden_concerns[2].content) != std::string::npos);
    CHECK(prompt.find(p->hidden_concerns[0].content) == std::string::npos);
    CHECK(prompt.find(p->hidden_concerns[1].content) == std::string::npos);
    CHECK(prompt.find("How are you?") != std::string::npos);
}

TEST_CASE("leak filter and sentence removal") {
    const auto p = testsupport::fixture_case("fx-001");
    const AgentState s = initial_agent_state(3);
    const std::string leak = "Statins damage the liver permanently, I read online.";
    CHECK(leaked_concerns(leak, *p, s) == std::vector<std::size_t>{0});
    CHECK(remove_leaks("I feel fine. " + leak, *p, s) == std::optional<std::string>("I feel fine."));
    CHECK_FALSE(remove_leaks(leak, *p, s).has_value());
}

TEST_CASE("model responder regenerates on a leak") {
    const auto p = testsupport::fixture_case("fx-001");
    const AgentState s = initial_agent_state(3);
    const std::vector<DialogueLine> dialogue;
    const ReplyContext ctx{*p, TaskKind::Confirmation, s, {}, false, std::nullopt, dialogue};

    auto t = std::make_shared<QueueTransport>(std::vector<std::string>{
        reply_json("I read that statins damage the liver permanently."), reply_json("I am doing okay, I guess.")});
    const auto r = ModelResponder(ModelResponderConfig{}, t).reply(ctx);
    CHECK(t->calls == 2);
    CHECK(r.text == "I am doing okay, I guess.");

    auto stuck = std::make_shared<QueueTransport>(std::vector<std::string>{reply_json("Statins damage the liver permanently.")});
    CHECK_THROWS_AS(ModelResponder(ModelResponderConfig{}, stuck).reply(ctx), LeakUnremovable);
    CHECK(stuck->calls == 3);

    auto trimmed = std::make_shared<QueueTransport>(
        std::vector<std::string>{reply_json("Not much to say. Statins damage the liver permanently.")});
    CHECK(ModelResponder(ModelResponderConfig{}, trimmed).reply(ctx).text == "Not much to say.");

    auto down = std::make_shared<QueueTransport>(std::vector<std::string>{});
    CHECK_THROWS_AS(ModelResponder(ModelResponderConfig{}, down).reply(ctx), ResponderUnavailable);
    CHECK_THROWS_AS(ModelResponder(ModelResponderConfig{}, nullptr), ResponderUnavailable);
}

TEST_CASE("model responder marks revealed concerns as disclosed") {
    const auto p = testsupport::fixture_case("fx-001");
    AgentState s = initial_agent_state(3);
    s.states[2] = ConcernState::Revealed;
    const std::vector<DialogueLine> dialogue;
    auto t = std::make_shared<QueueTransport>(
        std::vector<std::string>{reply_json("The copay for the new inhaler is more than I can afford. What can I do?")});
    const auto r = ModelResponder(ModelResponderConfig{}, t).reply({*p, TaskKind::Confirmation, s, {2}, false, std::nullopt, dialogue});
    CHECK(r.disclosed_concern_ids == std::vector<std::string>{"c3"});
    CHECK(r.asks_clarification == std::optional<std::string>("What can I do?"));
}

TEST_CASE("reply JSON round-trips") {
    PatientReply r{"Hi.", {"c1"}, std::string("Why?"), true};
    CHECK(reply_from_json(reply_to_json(r)) == r);
}

#include "rpsim/patient_responder.hpp"

#include <algorithm>
#include <sstream>

#include "rpsim/error.hpp"
#include "rpsim/text.hpp"

namespace rpsim {

namespace {

constexpr const char* kClarifyingQuestion = "What would you suggest I do about this?";

std::string as_sentence(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    if (!s.empty() && s.back() != '.' && s.back() != '?' && s.back() != '!') s.push_back('.');
    return s;
}

std::string lower_first(std::string s) {
    if (s.size() > 1 && std::isupper(static_cast<unsigned char>(s[0])) &&
        !std::isupper(static_cast<unsigned char>(s[1]))) {
        s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    }
    return s;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out.push_back(' ');
        out += p;
    }
    return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        cur.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(' ');
        s = b == std::string::npos ? std::string() : s.substr(b);
    }
    std::erase_if(out, [](const std::string& s) { return s.empty(); });
    return out;
}

}  // namespace

json reply_to_json(const PatientReply& r) {
    return {{"text", r.text},
            {"disclosed_concern_ids", r.disclosed_concern_ids},
            {"asks_clarification", r.asks_clarification ? json(*r.asks_clarification) : json(nullptr)},
            {"challenge_cue", r.challenge_cue}};
}

PatientReply reply_from_json(const json& j) {
    PatientReply r;
    r.text = j.at("text").get<std::string>();
    r.disclosed_concern_ids = j.at("disclosed_concern_ids").get<std::vector<std::string>>();
    if (!j.at("asks_clarification").is_null()) r.asks_clarification = j["asks_clarification"].get<std::string>();
    r.challenge_cue = j.at("challenge_cue").get<bool>();
    return r;
}

std::vector<std::size_t> leaked_concerns(const std::string& text, const PatientProfile& profile,
                                         const AgentState& state, double threshold) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < profile.hidden_concerns.size(); ++i) {
        if (state.states.at(i) != ConcernState::Hidden) continue;
        if (text::mentions_content(text, profile.hidden_concerns[i].content, threshold)) out.push_back(i);
    }
    return out;
}

std::optional<std::string> remove_leaks(const std::string& text, const PatientProfile& profile,
                                        const AgentState& state, double threshold) {
    std::vector<std::string> kept;
    for (auto& sentence : split_sentences(text)) {
        if (leaked_concerns(sentence, profile, state, threshold).empty()) kept.push_back(std::move(sentence));
    }
    auto out = join(kept);
    if (out.empty() || !leaked_concerns(out, profile, state, threshold).empty()) return std::nullopt;
    return out;
}

PatientReply ScriptedResponder::reply(const ReplyContext& ctx) const {
    PatientReply r;
    std::vector<std::string> parts;

    if (ctx.addressed_now) parts.emplace_back("Okay, that really helps. I am willing to try it.");

    const std::size_t n = std::min(style_.max_issues, ctx.to_disclose.size());
    bool disclosed_primary = false;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& concern = ctx.profile.hidden_concerns.at(ctx.to_disclose[j]);
        parts.push_back((j == 0 ? "To be honest, " : "Also, ") + lower_first(as_sentence(concern.content)));
        r.disclosed_concern_ids.push_back(concern.id);
        disclosed_primary = disclosed_primary || (ctx.primary && *ctx.primary == ctx.to_disclose[j]);
    }
    if (!r.disclosed_concern_ids.empty()) r.challenge_cue = true;

    const bool primary_open = ctx.task == TaskKind::Intervention && ctx.primary &&
                              ctx.state.states.at(*ctx.primary) == ConcernState::Revealed;
    if (disclosed_primary && primary_open) {
        parts.emplace_back(kClarifyingQuestion);
        r.asks_clarification = kClarifyingQuestion;
    }

    if (parts.empty()) {
        if (primary_open) {
            parts.emplace_back("I hear you, but I am still not sure I am ready for that.");
            r.challenge_cue = true;
        } else {
            std::string generic = "I am mostly here about " + lower_first(as_sentence(ctx.profile.clinical.admission_reason));
            if (!leaked_concerns(generic, ctx.profile, ctx.state).empty()) generic.clear();
            if (!generic.empty()) parts.push_back(std::move(generic));
            parts.emplace_back("I am not sure what else to say.");
        }
    }

    r.text = join(parts);
    if (text::word_count(r.text) > style_.max_words) r.text = text::truncate_words(r.text, style_.max_words);
    return r;
}

std::string build_patient_prompt(const ReplyContext& ctx, const std::string& prompt_template) {
    std::ostringstream out;
    out << prompt_template << "\n\n";
    out << "Response style: " << ctx.profile.roleplay.response_style << "\n";
    out << "Disclosure behavior: " << ctx.profile.roleplay.disclosure_behavior << "\n";
    const auto& d = ctx.profile.demographics;
    out << "You are " << d.name << ", age " << d.age << ", " << d.sex << ". " << d.background << "\n";
    out << "Reason for visit: " << ctx.profile.clinical.admission_reason << "\n";
    out << "Medical history: " << ctx.profile.clinical.medical_surgical_history << "\n";
    std::vector<std::string> shareable;
    for (std::size_t i = 0; i < ctx.profile.hidden_concerns.size(); ++i) {
        if (ctx.state.states.at(i) != ConcernState::Hidden) shareable.push_back(ctx.profile.hidden_concerns[i].content);
    }
    if (shareable.empty()) {
        out << "You have not yet shared any personal worries. Do not volunteer new worries.\n";
    } else {
        out << "Worries you are now ready to talk about:\n";
        for (const auto& s : shareable) out << "- " << s << "\n";
    }
    if (ctx.addressed_now) out << "The clinician has just resolved your main worry; accept the plan.\n";
    out << "Conversation so far:\n";
    for (const auto& line : ctx.dialogue) out << line.speaker << ": " << line.text << "\n";
    out << "Reply in at most two short sentences.";
    return out.str();
}

ModelResponder::ModelResponder(ModelResponderConfig cfg, std::shared_ptr<JsonTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
    if (!transport_) throw ResponderUnavailable("patient model endpoint not configured");
}

std::string ModelResponder::name() const { return "model:" + transport_->describe(); }

PatientReply ModelResponder::reply(const ReplyContext& ctx) const {
    const json request = {{"prompt", build_patient_prompt(ctx, cfg_.prompt_template)},
                          {"schema_version", cfg_.schema_version}};
    std::string text;
    bool clean = false;
    for (int attempt = 0; attempt < std::max(1, cfg_.max_attempts) && !clean; ++attempt) {
        std::string raw;
        try {
            raw = transport_->post(request);
        } catch (const AdapterError& e) {
            throw ResponderUnavailable(e.what());
        }
        try {
            const auto j = json::parse(raw);
            if (j.contains("text") && j["text"].is_string()) {
                text = j["text"].get<std::string>();
            } else if (j.contains("content") && j["content"].is_string()) {
                text = j["content"].get<std::string>();
            } else {
                throw ResponderUnavailable("patient model response carries no text");
            }
        } catch (const json::exception& e) {
            throw ResponderUnavailable(std::string("patient model response is not JSON: ") + e.what());
        }
        clean = leaked_concerns(text, ctx.profile, ctx.state, cfg_.leak_threshold).empty();
    }
    if (!clean) {
        auto trimmed = remove_leaks(text, ctx.profile, ctx.state, cfg_.leak_threshold);
        if (!trimmed) throw LeakUnremovable("patient model kept leaking a hidden concern");
        text = std::move(*trimmed);
    }
    if (text::word_count(text) > cfg_.style.max_words) text = text::truncate_words(text, cfg_.style.max_words);

    PatientReply r;
    r.text = text;
    for (std::size_t i = 0; i < ctx.profile.hidden_concerns.size(); ++i) {
        if (ctx.state.states.at(i) == ConcernState::Hidden) continue;
        const auto& c = ctx.profile.hidden_concerns[i];
        if (text::overlap_score(text, c.content) >= cfg_.disclosure_overlap) r.disclosed_concern_ids.push_back(c.id);
    }
    r.challenge_cue = text::contains_phrase(text, "not sure") || text::contains_phrase(text, "worried") ||
                      text::contains_phrase(text, "afraid") || text::contains_phrase(text, "rather not");
    auto sentences = split_sentences(text);
    if (!sentences.empty() && sentences.back().back() == '?') r.asks_clarification = sentences.back();
    return r;
}

}  // namespace rpsim

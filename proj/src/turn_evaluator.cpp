#include "rpsim/turn_evaluator.hpp"

#include <algorithm>
#include <cmath>

#include "rpsim/error.hpp"
#include "rpsim/text.hpp"

namespace rpsim {

namespace {

constexpr std::array<std::string_view, kRubricDims> kRubricCodes = {"DG", "ER", "PA", "CE", "SP",
                                                                    "NS", "CM", "PS", "PQC", "MR"};
constexpr std::array<std::string_view, kIntentCount> kIntentNames = {
    "NaturalInquiry", "MetaCategoryProbe", "PlanProposal", "EmpathyOnly", "Other"};

// Keyword lexicons for the lexical backend. A dimension scores hits/3, capped at 1.
const std::vector<std::string> kDataGathering = {"when did", "how long", "how often", "do you", "have you",
                                                 "did you",  "are you",  "symptoms",  "history", "dose",
                                                 "taking",   "since"};
const std::vector<std::string> kEmotional = {"understand",   "sounds",      "must be",   "i hear",
                                             "hear you",     "thats hard",  "sorry",     "makes sense",
                                             "frightening",  "scary",       "difficult", "valid",
                                             "natural to",   "normal to feel"};
const std::vector<std::string> kPartnership = {"together",    "we can",       "lets",        "what do you think",
                                               "would you like", "your preference", "prefer", "decide",
                                               "your choice", "options",      "works for you"};
const std::vector<std::string> kElicitation = {"worry",    "worried",  "worries",      "concern",     "concerns",
                                               "concerned", "afraid",  "fear",         "scared",      "bother",
                                               "bothering", "on your mind", "anything else", "feel about",
                                               "feeling",  "hesitant", "hesitation",   "holding you back",
                                               "nervous",  "uneasy"};
const std::vector<std::string> kSpace = {"tell me more", "take your time", "go on", "say more", "in your own words",
                                         "describe",     "walk me through", "whatever comes to mind"};
const std::vector<std::string> kNecessity = {"because", "important", "helps",  "help you",         "benefit",
                                             "protect", "prevent",   "reduce", "lower your risk", "need",
                                             "works by", "so that"};
const std::vector<std::string> kMitigation = {"safe",        "safety",   "common",     "misconception",
                                              "myth",        "actually", "evidence",   "side effect",
                                              "side effects", "manageable", "cost",    "afford",
                                              "insurance",   "assistance program", "generic", "coupon",
                                              "covered",     "interpreter", "translator", "explain",
                                              "support",     "address"};
const std::vector<std::string> kPlan = {"mg",       "daily",     "twice",      "once a day", "schedule",
                                        "follow up", "appointment", "call",    "if you notice", "if you experience",
                                        "week",     "weeks",     "start",      "next step",  "pharmacy"};
const std::vector<std::string> kMetaCues = {"category", "categories", "checklist", "taxonomy", "barrier type"};

const std::vector<std::string> kQuestionStarters = {"how", "what", "why",   "when",  "where", "which", "who",
                                                    "do",  "does", "did",   "are",   "is",    "have",  "has",
                                                    "can", "could", "would", "will", "tell"};
const std::vector<std::string> kOpenLeads = {"how", "what", "why", "tell me", "could you describe"};

std::size_t count_hits(std::string_view utterance, const std::vector<std::string>& lexicon) {
    std::size_t n = 0;
    for (const auto& phrase : lexicon) n += text::contains_phrase(utterance, phrase) ? 1 : 0;
    return n;
}

double saturate(std::size_t hits) { return std::min(1.0, static_cast<double>(hits) / 3.0); }

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool ends_with_question_mark(std::string_view s) {
    s = trim(s);
    return !s.empty() && s.back() == '?';
}

bool is_question(std::string_view utterance) {
    if (ends_with_question_mark(utterance)) return true;
    const auto tokens = text::tokenize(utterance);
    return !tokens.empty() &&
           std::find(kQuestionStarters.begin(), kQuestionStarters.end(), tokens.front()) != kQuestionStarters.end();
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// The chosen intent takes 0.55 + 0.4 * confidence; the rest is split over the
// other intents by raw score, so the chosen intent is always the strict argmax.
std::array<double, kIntentCount> intent_distribution(Intent chosen, const std::array<double, kIntentCount>& raw) {
    std::array<double, kIntentCount> probs{};
    const auto ci = static_cast<std::size_t>(chosen);
    probs[ci] = 0.55 + 0.4 * clamp01(raw[ci]);
    double rest_weight = 0.0;
    for (std::size_t i = 0; i < kIntentCount; ++i)
        if (i != ci) rest_weight += clamp01(raw[i]) + 0.05;
    const double remaining = 1.0 - probs[ci];
    for (std::size_t i = 0; i < kIntentCount; ++i)
        if (i != ci) probs[i] = remaining * (clamp01(raw[i]) + 0.05) / rest_weight;
    return probs;
}

}  // namespace

std::string_view rubric_code(RubricDim d) { return kRubricCodes.at(static_cast<std::size_t>(d)); }

std::optional<RubricDim> parse_rubric_code(std::string_view code) {
    for (std::size_t i = 0; i < kRubricDims; ++i)
        if (kRubricCodes[i] == code) return static_cast<RubricDim>(i);
    return std::nullopt;
}

bool RubricVector::valid() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

std::string_view intent_name(Intent i) { return kIntentNames.at(static_cast<std::size_t>(i)); }

Intent parse_intent(std::string_view name) {
    for (std::size_t i = 0; i < kIntentCount; ++i)
        if (kIntentNames[i] == name) return static_cast<Intent>(i);
    throw SchemaError("unknown intent '" + std::string(name) + "'");
}

Intent argmax_intent(const std::array<double, kIntentCount>& probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kIntentCount; ++i)
        if (probs[i] > probs[best]) best = i;
    return static_cast<Intent>(best);
}

json analysis_to_json(const TurnAnalysis& a) {
    json rubric = json::object();
    for (std::size_t i = 0; i < kRubricDims; ++i) rubric[std::string(kRubricCodes[i])] = a.rubric.at(i);
    json probs = json::object();
    for (std::size_t i = 0; i < kIntentCount; ++i) probs[std::string(kIntentNames[i])] = a.intent_probs[i];
    json j = {{"intent", intent_name(a.intent)},
              {"intent_probs", probs},
              {"rubric", rubric},
              {"pending_question_covered", a.pending_question_covered},
              {"empathy_strength", a.empathy_strength},
              {"open_question", a.open_question},
              {"backend", a.backend}};
    if (a.raw_response) j["raw_response"] = *a.raw_response;
    if (!a.warnings.empty()) j["warnings"] = a.warnings;
    return j;
}

TurnAnalysis analysis_from_json(const json& j) {
    TurnAnalysis a;
    a.intent = parse_intent(j.at("intent").get<std::string>());
    for (std::size_t i = 0; i < kIntentCount; ++i)
        a.intent_probs[i] = j.at("intent_probs").at(std::string(kIntentNames[i])).get<double>();
    for (std::size_t i = 0; i < kRubricDims; ++i)
        a.rubric[static_cast<RubricDim>(i)] = j.at("rubric").at(std::string(kRubricCodes[i])).get<double>();
    a.pending_question_covered = j.at("pending_question_covered").get<bool>();
    a.empathy_strength = j.at("empathy_strength").get<double>();
    a.open_question = j.at("open_question").get<bool>();
    a.backend = j.value("backend", "");
    if (j.contains("raw_response")) a.raw_response = j["raw_response"].get<std::string>();
    if (j.contains("warnings")) a.warnings = j["warnings"].get<std::vector<std::string>>();
    return a;
}

LexicalConfig LexicalConfig::defaults() {
    LexicalConfig cfg;
    for (auto c : kAllCategories) cfg.meta_synonyms.emplace_back(category_label(c));
    cfg.meta_synonyms.emplace_back("hidden concern");
    return cfg;
}

LexicalConfig LexicalConfig::from_json(const json& j) {
    auto cfg = defaults();
    if (j.contains("meta_synonyms")) cfg.meta_synonyms = j["meta_synonyms"].get<std::vector<std::string>>();
    cfg.meta_threshold = j.value("meta_threshold", cfg.meta_threshold);
    cfg.pending_cover_threshold = j.value("pending_cover_threshold", cfg.pending_cover_threshold);
    cfg.history_window = j.value("history_window", cfg.history_window);
    return cfg;
}

bool is_open_question(std::string_view utterance) {
    if (!ends_with_question_mark(utterance)) return false;
    return std::any_of(kOpenLeads.begin(), kOpenLeads.end(),
                       [&](const std::string& lead) { return text::contains_phrase(utterance, lead); });
}

LexicalEvaluator::LexicalEvaluator(LexicalConfig cfg) : cfg_(std::move(cfg)) {}

TurnAnalysis LexicalEvaluator::evaluate(std::string_view utterance, const std::vector<std::string>& history_window,
                                        const std::optional<std::string>& pending_question) const {
    TurnAnalysis a;
    a.backend = name();
    a.open_question = is_open_question(utterance);
    const bool question = is_question(utterance);

    auto& z = a.rubric;
    z[RubricDim::DataGathering] = std::min(1.0, (question ? 0.5 : 0.0) + saturate(count_hits(utterance, kDataGathering)) * 0.5);
    z[RubricDim::EmotionalResponsiveness] = saturate(count_hits(utterance, kEmotional));
    z[RubricDim::PartnershipActivation] = saturate(count_hits(utterance, kPartnership));
    z[RubricDim::ConcernElicitation] = saturate(count_hits(utterance, kElicitation));
    z[RubricDim::SpaceProvision] =
        std::min(1.0, (a.open_question ? 0.5 : 0.0) + saturate(count_hits(utterance, kSpace)) * 0.5);
    z[RubricDim::NecessitySupport] = saturate(count_hits(utterance, kNecessity));
    z[RubricDim::ConcernMitigation] = saturate(count_hits(utterance, kMitigation));

    std::size_t plan_hits = count_hits(utterance, kPlan);
    for (const auto& tok : text::tokenize(utterance))
        if (std::any_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            ++plan_hits;
            break;
        }
    z[RubricDim::PlanSpecificity] = saturate(plan_hits);

    if (pending_question) {
        const double covered = text::containment(*pending_question, utterance);
        z[RubricDim::PendingQuestionCoverage] = covered;
        a.pending_question_covered = covered > 0.0 && covered >= cfg_.pending_cover_threshold;
    }

    const bool names_label = std::any_of(cfg_.meta_synonyms.begin(), cfg_.meta_synonyms.end(),
                                         [&](const std::string& s) { return text::contains_phrase(utterance, s); });
    z[RubricDim::MetaProbeRisk] = names_label ? 1.0 : std::min(0.4, 0.2 * static_cast<double>(count_hits(utterance, kMetaCues)));

    // A verbatim repeat of a recent clinician turn invites less than a fresh one.
    const auto norm = text::normalize(utterance);
    const std::size_t window = std::min(cfg_.history_window, history_window.size());
    for (std::size_t i = history_window.size() - window; i < history_window.size(); ++i) {
        if (text::normalize(history_window[i]) == norm) {
            z[RubricDim::ConcernElicitation] *= 0.5;
            z[RubricDim::SpaceProvision] *= 0.5;
            break;
        }
    }

    a.empathy_strength = z[RubricDim::EmotionalResponsiveness];

    std::array<double, kIntentCount> raw{};
    const double elicit = std::max(z[RubricDim::ConcernElicitation], z[RubricDim::SpaceProvision]);
    raw[static_cast<std::size_t>(Intent::NaturalInquiry)] =
        question ? std::max(z[RubricDim::DataGathering], elicit) : 0.5 * elicit;
    raw[static_cast<std::size_t>(Intent::MetaCategoryProbe)] = z[RubricDim::MetaProbeRisk];
    raw[static_cast<std::size_t>(Intent::PlanProposal)] =
        std::max(z[RubricDim::PlanSpecificity], z[RubricDim::NecessitySupport]);
    raw[static_cast<std::size_t>(Intent::EmpathyOnly)] = z[RubricDim::EmotionalResponsiveness];
    raw[static_cast<std::size_t>(Intent::Other)] = 0.1;

    Intent chosen = Intent::Other;
    if (z[RubricDim::MetaProbeRisk] >= cfg_.meta_threshold) {
        chosen = Intent::MetaCategoryProbe;
    } else if (question) {
        chosen = Intent::NaturalInquiry;
    } else if (raw[static_cast<std::size_t>(Intent::PlanProposal)] > 0.0) {
        chosen = Intent::PlanProposal;
    } else if (z[RubricDim::EmotionalResponsiveness] > 0.0) {
        chosen = Intent::EmpathyOnly;
    }
    a.intent_probs = intent_distribution(chosen, raw);
    a.intent = chosen;
    return a;
}

TurnAnalysis parse_judge_payload(const json& payload, const JudgeConfig& cfg) {
    if (!payload.is_object()) throw JudgeMalformed("judge payload is not an object");
    const json& body = payload.contains("analysis") ? payload["analysis"] : payload;
    TurnAnalysis a;
    try {
        const auto& rubric = body.at("rubric");
        for (std::size_t i = 0; i < kRubricDims; ++i) {
            const std::string code(kRubricCodes[i]);
            if (!rubric.contains(code) || !rubric[code].is_number())
                throw JudgeMalformed("judge payload missing rubric dimension " + code);
            double v = rubric[code].get<double>();
            if (!std::isfinite(v)) throw JudgeMalformed("rubric dimension " + code + " is not finite");
            if (v < 0.0 || v > 1.0) {
                if (!cfg.clamp_out_of_range)
                    throw JudgeOutOfRange("rubric dimension " + code + "=" + std::to_string(v) + " outside [0,1]");
                a.warnings.push_back("clamped " + code + " from " + std::to_string(v));
                v = clamp01(v);
            }
            a.rubric[static_cast<RubricDim>(i)] = v;
        }
        const auto& probs = body.at("intent_probs");
        double sum = 0.0;
        for (std::size_t i = 0; i < kIntentCount; ++i) {
            const std::string key(kIntentNames[i]);
            a.intent_probs[i] = probs.contains(key) ? probs[key].get<double>() : 0.0;
            if (a.intent_probs[i] < 0.0) throw JudgeMalformed("negative intent probability for " + key);
            sum += a.intent_probs[i];
        }
        if (std::abs(sum - 1.0) > 1e-6) throw JudgeMalformed("intent probabilities sum to " + std::to_string(sum));
        a.intent = argmax_intent(a.intent_probs);
        if (body.contains("intent") && parse_intent(body["intent"].get<std::string>()) != a.intent)
            throw JudgeMalformed("intent label disagrees with intent_probs argmax");
        const bool meta = a.rubric[RubricDim::MetaProbeRisk] >= cfg.meta_threshold;
        if (meta != (a.intent == Intent::MetaCategoryProbe))
            throw JudgeMalformed("meta-probe intent inconsistent with MR score");
        a.pending_question_covered = body.at("pending_question_covered").get<bool>();
        a.empathy_strength = clamp01(body.at("empathy_strength").get<double>());
        a.open_question = body.at("open_question").get<bool>();
    } catch (const json::exception& e) {
        throw JudgeMalformed(std::string("judge payload schema violation: ") + e.what());
    } catch (const SchemaError& e) {
        throw JudgeMalformed(e.what());
    }
    return a;
}

JudgeEvaluator::JudgeEvaluator(JudgeConfig cfg, std::shared_ptr<JsonTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
    if (!transport_) throw JudgeUnavailable("judge endpoint not configured");
    if (cfg_.prompt_template.empty()) throw JudgeUnavailable("judge prompt template not loaded");
}

std::string JudgeEvaluator::name() const { return "judge:" + transport_->describe(); }

TurnAnalysis JudgeEvaluator::evaluate(std::string_view utterance, const std::vector<std::string>& history_window,
                                      const std::optional<std::string>& pending_question) const {
    const json request = {{"utterance", utterance},
                          {"history", history_window},
                          {"pending_question", pending_question ? json(*pending_question) : json(nullptr)},
                          {"schema_version", cfg_.schema_version},
                          {"prompt", cfg_.prompt_template}};
    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, cfg_.max_attempts); ++attempt) {
        std::string raw;
        try {
            raw = transport_->post(request);
        } catch (const AdapterError& e) {
            throw JudgeUnavailable(e.what());
        }
        try {
            json payload;
            try {
                payload = parse_adapter_payload(raw);
            } catch (const json::exception& e) {
                throw JudgeMalformed(std::string("judge response is not JSON: ") + e.what());
            }
            auto analysis = parse_judge_payload(payload, cfg_);
            analysis.backend = name();
            analysis.raw_response = raw;
            return analysis;
        } catch (const JudgeMalformed& e) {
            last_error = e.what();
        }
    }
    throw JudgeMalformed("judge response malformed after " + std::to_string(cfg_.max_attempts) +
                         " attempts: " + last_error);
}

}  // namespace rpsim

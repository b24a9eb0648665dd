#include "rpsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "rpsim/error.hpp"
#include "rpsim/text.hpp"

namespace rpsim {

namespace {

constexpr double kTieEps = 1e-12;

std::vector<DialogueLine> transcript_of(const SessionRecord& r) {
    std::vector<DialogueLine> out;
    for (const auto& t : r.turns) {
        out.push_back({"clinician", t.utterance});
        out.push_back({"patient", t.reply.text});
    }
    return out;
}

json transcript_json(const std::vector<DialogueLine>& transcript) {
    json out = json::array();
    for (const auto& l : transcript) out.push_back({{"speaker", l.speaker}, {"text", l.text}});
    return out;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

std::optional<double> ratio_opt(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / den;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; }

}  // namespace

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

Prf Prf::from_counts(std::size_t matched, std::size_t predicted, std::size_t gold) {
    Prf p;
    p.precision = ratio(matched, predicted);
    p.recall = ratio(matched, gold);
    p.f1 = f1_score(p.precision, p.recall);
    return p;
}

std::vector<MatchCandidate> LexicalMatcher::candidates(const SubmittedFindings& findings,
                                                       const std::vector<HiddenConcern>& gold,
                                                       const std::vector<DialogueLine>&) const {
    std::vector<MatchCandidate> out;
    for (std::size_t f = 0; f < findings.size(); ++f) {
        for (std::size_t c = 0; c < gold.size(); ++c) {
            const double s = text::overlap_score(findings[f].description, gold[c].content);
            if (s >= threshold_) out.push_back({f, c, s});
        }
    }
    return out;
}

JudgeMatcher::JudgeMatcher(std::shared_ptr<JsonTransport> transport, std::string prompt_template)
    : transport_(std::move(transport)), prompt_template_(std::move(prompt_template)) {
    if (!transport_) throw MatcherUnavailable("judge matcher endpoint not configured");
}

std::string JudgeMatcher::name() const { return "judge:" + transport_->describe(); }

std::vector<MatchCandidate> JudgeMatcher::candidates(const SubmittedFindings& findings,
                                                     const std::vector<HiddenConcern>& gold,
                                                     const std::vector<DialogueLine>& transcript) const {
    json concerns = json::array();
    for (std::size_t c = 0; c < gold.size(); ++c) {
        concerns.push_back({{"index", c}, {"content", gold[c].content}, {"category", category_label(gold[c].category)}});
    }
    json items = json::array();
    for (std::size_t f = 0; f < findings.size(); ++f) {
        items.push_back({{"index", f},
                         {"category", category_label(findings[f].category)},
                         {"description", findings[f].description}});
    }
    const json body = {{"schema_version", "rpsim-matcher-v1"},
                       {"prompt", prompt_template_},
                       {"findings", items},
                       {"concerns", concerns},
                       {"transcript", transcript_json(transcript)}};
    std::string raw;
    try {
        raw = transport_->post(body);
    } catch (const AdapterError& e) {
        throw MatcherUnavailable(e.what());
    }
    try {
        const json payload = parse_adapter_payload(raw);
        std::vector<MatchCandidate> out;
        for (const auto& p : payload.at("pairs")) {
            MatchCandidate m{p.at("finding").get<std::size_t>(), p.at("concern").get<std::size_t>(),
                             p.value("score", 1.0)};
            if (m.finding >= findings.size() || m.concern >= gold.size() || !(m.score >= 0.0 && m.score <= 1.0))
                throw MatcherUnavailable("judge matcher returned an out-of-range pair");
            out.push_back(m);
        }
        return out;
    } catch (const json::exception& e) {
        throw MatcherUnavailable(std::string("judge matcher response malformed: ") + e.what());
    }
}

std::vector<MatchCandidate> best_assignment(const std::vector<MatchCandidate>& candidates) {
    std::vector<MatchCandidate> sorted = candidates;
    std::sort(sorted.begin(), sorted.end(), [](const MatchCandidate& a, const MatchCandidate& b) {
        return std::tie(a.finding, a.concern) < std::tie(b.finding, b.concern);
    });
    std::vector<std::size_t> findings;
    for (const auto& c : sorted) {
        if (findings.empty() || findings.back() != c.finding) findings.push_back(c.finding);
    }

    auto key = [](const std::vector<MatchCandidate>& v) {
        std::vector<std::pair<std::size_t, std::size_t>> k;
        for (const auto& c : v) k.emplace_back(c.finding, c.concern);
        return k;
    };

    std::vector<MatchCandidate> best, cur;
    double best_total = 0.0;
    std::set<std::size_t> used;

    // Each finding with admissible pairs is either left unmatched or given one
    // unused concern; every complete assignment is compared against the best.
    std::function<void(std::size_t, double)> dfs = [&](std::size_t fi, double total) {
        if (fi == findings.size()) {
            if (total > best_total + kTieEps ||
                (std::abs(total - best_total) <= kTieEps && key(cur) < key(best))) {
                best = cur;
                best_total = total;
            }
            return;
        }
        const std::size_t f = findings[fi];
        for (const auto& c : sorted) {
            if (c.finding != f || used.contains(c.concern)) continue;
            used.insert(c.concern);
            cur.push_back(c);
            dfs(fi + 1, total + c.score);
            cur.pop_back();
            used.erase(c.concern);
        }
        dfs(fi + 1, total);
    };
    dfs(0, 0.0);
    return best;
}

std::vector<MatchPair> match_findings(const SubmittedFindings& findings, const std::vector<HiddenConcern>& gold,
                                      const FindingMatcher& matcher, const std::vector<DialogueLine>& transcript) {
    std::vector<MatchPair> out;
    for (const auto& c : best_assignment(matcher.candidates(findings, gold, transcript))) {
        out.push_back({c.finding, c.concern, gold[c.concern].id, c.score,
                       findings[c.finding].category == gold[c.concern].category});
    }
    return out;
}

ConfirmationScores score_confirmation(const SessionRecord& record, const FindingMatcher& matcher) {
    if (record.task() != TaskKind::Confirmation) throw WrongTask("confirmation scoring on an intervention record");
    if (!record.findings) throw MissingFindings("session " + record.session_id + " has no submitted findings");
    const auto& findings = *record.findings;
    const auto& gold = record.profile.hidden_concerns;
    const auto& fs = record.final_state;

    ConfirmationScores s;
    s.concerns = gold.size();
    s.revealed = fs.revealed_count();
    s.findings = findings.size();
    s.reveal_rate = ratio(s.revealed, s.concerns);

    std::array<std::size_t, kCategoryCount> pred{}, want{};
    for (const auto& f : findings) ++pred[static_cast<std::size_t>(f.category)];
    for (const auto& g : gold) ++want[static_cast<std::size_t>(g.category)];
    for (std::size_t c = 0; c < kCategoryCount; ++c) s.coarse_matched += std::min(pred[c], want[c]);
    s.coarse = Prf::from_counts(s.coarse_matched, s.findings, s.concerns);

    const auto transcript = transcript_of(record);
    const auto cands = matcher.candidates(findings, gold, transcript);
    for (const auto& c : best_assignment(cands)) {
        const bool cat = findings[c.finding].category == gold[c.concern].category;
        s.matches.push_back({c.finding, c.concern, gold[c.concern].id, c.score, cat});
        s.category_matched += cat ? 1 : 0;
    }
    s.fine = Prf::from_counts(s.matches.size(), s.findings, s.concerns);
    s.category_accuracy = ratio_opt(s.category_matched, s.matches.size());
    s.mbnr = !s.matches.empty() && s.revealed == 0;

    std::vector<MatchCandidate> revealed_only;
    for (const auto& c : cands) {
        if (fs.states.at(c.concern) != ConcernState::Hidden) revealed_only.push_back(c);
    }
    s.process_matched = best_assignment(revealed_only).size();
    s.process = Prf::from_counts(s.process_matched, s.findings, s.revealed);

    s.turns = record.turns.size();
    for (const auto& t : record.turns) {
        if (t.analysis.intent == Intent::MetaCategoryProbe) ++s.meta_turns;
        if (t.outcome.blocked) ++s.blocked_meta_turns;
    }
    s.meta_probe_rate = ratio(s.meta_turns, s.turns);
    s.full_reveal = s.concerns > 0 && s.revealed == s.concerns;
    if (s.full_reveal) {
        int last = 0;
        for (const auto& r : fs.reveal_turn) last = std::max(last, r.value_or(0));
        s.turn_to_full_reveal = last;
    }
    return s;
}

InterventionScores score_intervention(const SessionRecord& record) {
    if (record.task() != TaskKind::Intervention) throw WrongTask("intervention scoring on a confirmation record");
    if (!record.layout.primary) throw MissingPrimaryConcern("intervention record without a primary concern");
    const std::size_t c = *record.layout.primary;
    const auto& fs = record.final_state;

    InterventionScores s;
    s.concerns = record.profile.concern_count();
    s.revealed = fs.revealed_count();
    s.reveal_rate = ratio(s.revealed, s.concerns);
    s.success = intervention_gate(fs, c);
    s.primary_reveal_turn = fs.reveal_turn.at(c);
    if (s.success) {
        s.turn_to_address = fs.address_turn;
        if (fs.address_turn && s.primary_reveal_turn) s.reveal_to_address = *fs.address_turn - *s.primary_reveal_turn;
    }
    s.turns = record.turns.size();
    std::size_t post = 0, post_open = 0, post_challenge = 0;
    for (const auto& t : record.turns) {
        if (t.analysis.intent == Intent::MetaCategoryProbe) ++s.meta_turns;
        if (t.outcome.blocked) ++s.blocked_meta_turns;
        if (fs.address_turn && t.outcome.new_state.turn_index > *fs.address_turn) {
            ++post;
            post_open += t.analysis.open_question ? 1 : 0;
            post_challenge += t.reply.challenge_cue ? 1 : 0;
        }
    }
    s.meta_probe_rate = ratio(s.meta_turns, s.turns);
    s.post_address_open_ratio = ratio_opt(post_open, post);
    s.post_address_challenge_ratio = ratio_opt(post_challenge, post);
    return s;
}

std::vector<std::string> style_dims_for(TaskKind task) {
    if (task == TaskKind::Confirmation) return {"empathy", "collaboration", "problem_solving"};
    return {"empathy", "rationale", "problem_solving", "actionability"};
}

StyleJudgement parse_style_judgement(const json& payload, TaskKind task) {
    if (!payload.is_object()) throw StyleJudgeMalformed("style judgement must be an object");
    StyleJudgement out;
    for (const auto& dim : style_dims_for(task)) {
        if (!payload.contains(dim) || !payload[dim].is_number_integer())
            throw StyleJudgeMalformed("style judgement lacks integer dimension '" + dim + "'");
        const int v = payload[dim].get<int>();
        if (v < 0 || v > 2) throw StyleJudgeMalformed("style dimension '" + dim + "' outside {0,1,2}");
        out.dims[dim] = v;
    }
    if (payload.contains("values")) {
        if (!payload["values"].is_array()) throw StyleJudgeMalformed("'values' must be an array");
        std::set<std::string> seen;
        for (const auto& v : payload["values"]) {
            if (!v.is_string()) throw StyleJudgeMalformed("value labels must be strings");
            const auto label = v.get<std::string>();
            if (std::find(kValueCategories.begin(), kValueCategories.end(), label) == kValueCategories.end())
                throw StyleJudgeMalformed("unknown value category '" + label + "'");
            if (seen.insert(label).second) out.values.push_back(label);
        }
    }
    return out;
}

HttpStyleJudge::HttpStyleJudge(std::shared_ptr<JsonTransport> transport, std::string prompt_template)
    : transport_(std::move(transport)), prompt_template_(std::move(prompt_template)) {
    if (!transport_) throw BackendMissing("style judge endpoint not configured");
}

std::string HttpStyleJudge::name() const { return "judge:" + transport_->describe(); }

StyleJudgement HttpStyleJudge::judge(TaskKind task, const std::vector<DialogueLine>& transcript) const {
    json values = json::array();
    for (const auto* v : kValueCategories) values.push_back(v);
    const json body = {{"schema_version", "rpsim-style-v1"},
                       {"prompt", prompt_template_},
                       {"task", task_name(task)},
                       {"dimensions", style_dims_for(task)},
                       {"value_categories", values},
                       {"transcript", transcript_json(transcript)}};
    const std::string raw = transport_->post(body);
    json payload;
    try {
        payload = parse_adapter_payload(raw);
    } catch (const json::exception& e) {
        throw StyleJudgeMalformed(std::string("style judge response is not JSON: ") + e.what());
    }
    auto out = parse_style_judgement(payload, task);
    out.raw_response = raw;
    return out;
}

ReadabilityCounts& ReadabilityCounts::operator+=(const ReadabilityCounts& o) {
    words += o.words;
    sentences += o.sentences;
    syllables += o.syllables;
    return *this;
}

std::size_t count_syllables(std::string_view word) {
    std::string w;
    for (char ch : word) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalpha(c)) w.push_back(static_cast<char>(std::tolower(c)));
    }
    if (w.empty()) return 0;
    if (w.size() <= 3) return 1;
    std::size_t runs = 0;
    bool prev = false;
    for (char c : w) {
        const bool v = is_vowel(c);
        if (v && !prev) ++runs;
        prev = v;
    }
    const std::size_t n = w.size();
    const bool consonant_le = n >= 3 && w[n - 2] == 'l' && !is_vowel(w[n - 3]);
    if (w.back() == 'e' && !consonant_le && runs > 1) --runs;
    return std::max<std::size_t>(1, runs);
}

ReadabilityCounts readability_counts(std::string_view text) {
    ReadabilityCounts c;
    bool pending = false;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) {
        if (std::any_of(tok.begin(), tok.end(), [](char ch) { return std::isalpha(static_cast<unsigned char>(ch)); })) {
            ++c.words;
            c.syllables += count_syllables(tok);
            pending = true;
        }
        const char last = tok.back();
        if ((last == '.' || last == '!' || last == '?') && pending) {
            ++c.sentences;
            pending = false;
        }
    }
    if (pending) ++c.sentences;
    return c;
}

std::optional<double> flesch_reading_ease(const ReadabilityCounts& c) {
    if (c.words == 0 || c.sentences == 0) return std::nullopt;
    const double w = static_cast<double>(c.words);
    return 206.835 - 1.015 * (w / static_cast<double>(c.sentences)) - 84.6 * (static_cast<double>(c.syllables) / w);
}

std::optional<double> flesch_reading_ease(std::string_view text) {
    return flesch_reading_ease(readability_counts(text));
}

StyleScores score_style(const SessionRecord& record, const StyleJudge* judge) {
    StyleScores s;
    s.turns = record.turns.size();
    for (std::size_t i = 0; i < record.turns.size(); ++i) {
        const auto& t = record.turns[i];
        s.words += text::word_count(t.utterance);
        s.readability_counts += readability_counts(t.utterance);
        if (t.analysis.open_question) {
            ++s.open_turns;
            if (i < 5) ++s.early_open;
        }
    }
    s.early_turns = std::min<std::size_t>(5, s.turns);
    s.words_per_turn = ratio(s.words, s.turns);
    s.readability = flesch_reading_ease(s.readability_counts);
    s.early_open_ratio = ratio(s.early_open, s.early_turns);
    s.overall_open_ratio = ratio(s.open_turns, s.turns);
    if (judge) s.judge = judge->judge(record.task(), transcript_of(record));
    return s;
}

json confirmation_scores_to_json(const ConfirmationScores& s) {
    json matches = json::array();
    for (const auto& m : s.matches) {
        matches.push_back({{"finding", m.finding},
                           {"concern", m.concern},
                           {"concern_id", m.concern_id},
                           {"score", m.score},
                           {"category_match", m.category_match}});
    }
    auto prf = [](const Prf& p) { return json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; };
    return {{"concerns", s.concerns},
            {"revealed", s.revealed},
            {"findings", s.findings},
            {"reveal_rate", s.reveal_rate},
            {"coarse_matched", s.coarse_matched},
            {"coarse", prf(s.coarse)},
            {"matches", matches},
            {"fine", prf(s.fine)},
            {"mbnr", s.mbnr},
            {"category_accuracy", opt(s.category_accuracy)},
            {"process_matched", s.process_matched},
            {"process", prf(s.process)},
            {"turns", s.turns},
            {"meta_turns", s.meta_turns},
            {"blocked_meta_turns", s.blocked_meta_turns},
            {"meta_probe_rate", s.meta_probe_rate},
            {"full_reveal", s.full_reveal},
            {"turn_to_full_reveal", opt(s.turn_to_full_reveal)}};
}

json intervention_scores_to_json(const InterventionScores& s) {
    return {{"success", s.success},
            {"concerns", s.concerns},
            {"revealed", s.revealed},
            {"reveal_rate", s.reveal_rate},
            {"primary_reveal_turn", opt(s.primary_reveal_turn)},
            {"turn_to_address", opt(s.turn_to_address)},
            {"reveal_to_address", opt(s.reveal_to_address)},
            {"turns", s.turns},
            {"meta_turns", s.meta_turns},
            {"blocked_meta_turns", s.blocked_meta_turns},
            {"meta_probe_rate", s.meta_probe_rate},
            {"post_address_open_ratio", opt(s.post_address_open_ratio)},
            {"post_address_challenge_ratio", opt(s.post_address_challenge_ratio)}};
}

json style_scores_to_json(const StyleScores& s) {
    json j = {{"turns", s.turns},
              {"words_per_turn", s.words_per_turn},
              {"readability", opt(s.readability)},
              {"early_open_ratio", s.early_open_ratio},
              {"overall_open_ratio", s.overall_open_ratio},
              {"judge", nullptr}};
    if (s.judge) j["judge"] = {{"dims", s.judge->dims}, {"values", s.judge->values}};
    return j;
}

std::string protocol_label(const ProtocolSpec& p) {
    switch (p.mode) {
        case ProtocolMode::FixedTurns: return "fixed-" + std::to_string(p.fixed_turns);
        case ProtocolMode::AdaptiveConfirmation: return "adaptive-" + std::to_string(p.cap);
        case ProtocolMode::SuccessCapped: return "success_capped-" + std::to_string(p.cap);
    }
    return "unknown";
}

std::string group_key(const SessionRecord& record, const Grouping& grouping) {
    std::string key;
    if (grouping.by_clinician) key = record.clinician;
    if (grouping.by_protocol) key += (key.empty() ? "" : "|") + protocol_label(record.protocol);
    return key.empty() ? "all" : key;
}

CaseScores score_case(const SessionRecord& record, const FindingMatcher& matcher, const Grouping& grouping,
                      const StyleJudge* judge) {
    CaseScores c;
    c.session_id = record.session_id;
    c.case_id = record.case_id;
    c.task = record.task();
    c.group = group_key(record, grouping);
    if (c.task == TaskKind::Confirmation) {
        c.confirmation = score_confirmation(record, matcher);
    } else {
        c.intervention = score_intervention(record);
    }
    c.style = score_style(record, judge);
    const std::size_t k = record.profile.concern_count();
    for (const auto& t : record.turns) {
        c.reveal_by_turn.push_back(ratio(t.outcome.new_state.revealed_count(), k));
        c.addressed_by_turn.push_back(record.layout.primary &&
                                      intervention_gate(t.outcome.new_state, *record.layout.primary));
    }
    return c;
}

std::optional<double> MetricRow::get(const std::string& column) const {
    for (const auto& [name, v] : values) {
        if (name == column) return v;
    }
    return std::nullopt;
}

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& x : xs) {
        if (x) {
            sum += *x;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

template <class F>
std::optional<double> mean_by(const std::vector<const CaseScores*>& cs, F f) {
    std::vector<std::optional<double>> xs;
    for (const auto* c : cs) xs.push_back(f(*c));
    return mean_of(xs);
}

std::pair<MetricRow, MetricRow> confirmation_rows(const std::string& group, const std::vector<const CaseScores*>& cs) {
    MetricRow micro{"confirmation", group, "micro", cs.size(), {}};
    MetricRow macro{"confirmation", group, "macro", cs.size(), {}};

    std::size_t revealed = 0, concerns = 0, findings = 0, coarse = 0, fine = 0, cat = 0, proc = 0, mbnr = 0,
                meta = 0, turns = 0, full = 0;
    for (const auto* c : cs) {
        const auto& s = *c->confirmation;
        revealed += s.revealed;
        concerns += s.concerns;
        findings += s.findings;
        coarse += s.coarse_matched;
        fine += s.matches.size();
        cat += s.category_matched;
        proc += s.process_matched;
        mbnr += s.mbnr ? 1 : 0;
        meta += s.meta_turns;
        turns += s.turns;
        full += s.full_reveal ? 1 : 0;
    }
    const Prf coarse_prf = Prf::from_counts(coarse, findings, concerns);
    const Prf fine_prf = Prf::from_counts(fine, findings, concerns);
    const Prf proc_prf = Prf::from_counts(proc, findings, revealed);
    micro.values = {{"reveal_rate", ratio(revealed, concerns)},
                    {"coarse_precision", coarse_prf.precision},
                    {"coarse_recall", coarse_prf.recall},
                    {"coarse_f1", coarse_prf.f1},
                    {"fine_precision", fine_prf.precision},
                    {"fine_recall", fine_prf.recall},
                    {"fine_f1", fine_prf.f1},
                    {"mbnr_rate", ratio(mbnr, cs.size())},
                    {"category_accuracy", ratio_opt(cat, fine)},
                    {"process_precision", proc_prf.precision},
                    {"process_recall", revealed == 0 ? std::nullopt : std::optional<double>(proc_prf.recall)},
                    {"process_f1", proc_prf.f1},
                    {"meta_probe_rate", ratio(meta, turns)},
                    {"full_reveal_rate", ratio(full, cs.size())}};

    auto m = [&](auto f) { return mean_by(cs, [&](const CaseScores& c) -> std::optional<double> { return f(*c.confirmation); }); };
    macro.values = {
        {"reveal_rate", m([](const ConfirmationScores& s) { return std::optional<double>(s.reveal_rate); })},
        {"coarse_precision", m([](const ConfirmationScores& s) { return std::optional<double>(s.coarse.precision); })},
        {"coarse_recall", m([](const ConfirmationScores& s) { return std::optional<double>(s.coarse.recall); })},
        {"coarse_f1", m([](const ConfirmationScores& s) { return std::optional<double>(s.coarse.f1); })},
        {"fine_precision", m([](const ConfirmationScores& s) { return std::optional<double>(s.fine.precision); })},
        {"fine_recall", m([](const ConfirmationScores& s) { return std::optional<double>(s.fine.recall); })},
        {"fine_f1", m([](const ConfirmationScores& s) { return std::optional<double>(s.fine.f1); })},
        {"mbnr_rate", ratio(mbnr, cs.size())},
        {"category_accuracy", m([](const ConfirmationScores& s) { return s.category_accuracy; })},
        {"process_precision", m([](const ConfirmationScores& s) { return std::optional<double>(s.process.precision); })},
        {"process_recall", m([](const ConfirmationScores& s) {
             return s.revealed == 0 ? std::nullopt : std::optional<double>(s.process.recall);
         })},
        {"process_f1", m([](const ConfirmationScores& s) { return std::optional<double>(s.process.f1); })},
        {"meta_probe_rate", m([](const ConfirmationScores& s) { return std::optional<double>(s.meta_probe_rate); })},
        {"full_reveal_rate", ratio(full, cs.size())}};
    return {micro, macro};
}

std::pair<MetricRow, MetricRow> intervention_rows(const std::string& group, const std::vector<const CaseScores*>& cs) {
    MetricRow micro{"intervention", group, "micro", cs.size(), {}};
    MetricRow macro{"intervention", group, "macro", cs.size(), {}};
    std::size_t successes = 0, revealed = 0, concerns = 0, meta = 0, turns = 0;
    for (const auto* c : cs) {
        const auto& s = *c->intervention;
        successes += s.success ? 1 : 0;
        revealed += s.revealed;
        concerns += s.concerns;
        meta += s.meta_turns;
        turns += s.turns;
    }
    auto m = [&](auto f) { return mean_by(cs, [&](const CaseScores& c) -> std::optional<double> { return f(*c.intervention); }); };
    auto to_opt = [](const std::optional<int>& v) { return v ? std::optional<double>(*v) : std::nullopt; };
    const auto tta = m([&](const InterventionScores& s) { return to_opt(s.turn_to_address); });
    const auto rta = m([&](const InterventionScores& s) { return to_opt(s.reveal_to_address); });
    micro.values = {{"success_rate", ratio(successes, cs.size())},
                    {"reveal_rate", ratio(revealed, concerns)},
                    {"turn_to_address", tta},
                    {"reveal_to_address", rta},
                    {"meta_probe_rate", ratio(meta, turns)}};
    macro.values = {{"success_rate", ratio(successes, cs.size())},
                    {"reveal_rate", m([](const InterventionScores& s) { return std::optional<double>(s.reveal_rate); })},
                    {"turn_to_address", tta},
                    {"reveal_to_address", rta},
                    {"meta_probe_rate",
                     m([](const InterventionScores& s) { return std::optional<double>(s.meta_probe_rate); })}};
    return {micro, macro};
}

std::pair<MetricRow, MetricRow> style_rows(const std::string& task, const std::string& group,
                                           const std::vector<const CaseScores*>& cs) {
    MetricRow micro{task, group, "micro", cs.size(), {}};
    MetricRow macro{task, group, "macro", cs.size(), {}};
    std::size_t words = 0, turns = 0, early = 0, early_open = 0, open = 0;
    ReadabilityCounts rc;
    for (const auto* c : cs) {
        words += c->style.words;
        turns += c->style.turns;
        early += c->style.early_turns;
        early_open += c->style.early_open;
        open += c->style.open_turns;
        rc += c->style.readability_counts;
    }
    micro.values = {{"words_per_turn", ratio(words, turns)},
                    {"readability", flesch_reading_ease(rc)},
                    {"early_open_ratio", ratio(early_open, early)},
                    {"overall_open_ratio", ratio(open, turns)}};
    auto m = [&](auto f) { return mean_by(cs, f); };
    macro.values = {{"words_per_turn", m([](const CaseScores& c) { return std::optional<double>(c.style.words_per_turn); })},
                    {"readability", m([](const CaseScores& c) { return c.style.readability; })},
                    {"early_open_ratio", m([](const CaseScores& c) { return std::optional<double>(c.style.early_open_ratio); })},
                    {"overall_open_ratio",
                     m([](const CaseScores& c) { return std::optional<double>(c.style.overall_open_ratio); })}};

    // Judge dimensions are per-transcript, so micro and macro coincide.
    std::vector<std::string> dims = {"empathy", "collaboration", "rationale", "problem_solving", "actionability"};
    bool any_judge = false;
    for (const auto* c : cs) any_judge = any_judge || c->style.judge.has_value();
    if (any_judge) {
        for (const auto& d : dims) {
            const auto v = m([&](const CaseScores& c) -> std::optional<double> {
                if (!c.style.judge) return std::nullopt;
                auto it = c.style.judge->dims.find(d);
                if (it == c.style.judge->dims.end()) return std::nullopt;
                return it->second;
            });
            micro.values.emplace_back(d, v);
            macro.values.emplace_back(d, v);
        }
        const auto vd = m([](const CaseScores& c) -> std::optional<double> {
            if (!c.style.judge) return std::nullopt;
            return static_cast<double>(c.style.judge->values_detected());
        });
        micro.values.emplace_back("values_detected", vd);
        macro.values.emplace_back("values_detected", vd);
    }
    return {micro, macro};
}

std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, end) : std::to_string(v);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

AggregateReport aggregate(const std::vector<CaseScores>& cases) {
    if (cases.empty()) throw EmptyBatch("no records to aggregate");
    AggregateReport report;
    report.cases = cases;

    std::map<std::pair<TaskKind, std::string>, std::vector<const CaseScores*>> groups;
    for (const auto& c : cases) groups[{c.task, c.group}].push_back(&c);

    for (const auto& [key, cs] : groups) {
        const auto& [task, group] = key;
        const std::string tname(task_name(task));
        auto [mi, ma] = task == TaskKind::Confirmation ? confirmation_rows(group, cs) : intervention_rows(group, cs);
        auto& table = task == TaskKind::Confirmation ? report.confirmation : report.intervention;
        table.push_back(std::move(mi));
        table.push_back(std::move(ma));
        auto [smi, sma] = style_rows(tname, group, cs);
        report.style.push_back(std::move(smi));
        report.style.push_back(std::move(sma));

        std::size_t max_turns = 0;
        for (const auto* c : cs) max_turns = std::max(max_turns, c->reveal_by_turn.size());
        for (std::size_t t = 1; t <= max_turns; ++t) {
            CurvePoint p{tname, group, static_cast<int>(t), 0.0, std::nullopt};
            double reveal = 0.0;
            std::size_t addressed = 0;
            for (const auto* c : cs) {
                if (c->reveal_by_turn.empty()) continue;
                const std::size_t i = std::min(t, c->reveal_by_turn.size()) - 1;
                reveal += c->reveal_by_turn[i];
                addressed += c->addressed_by_turn[i] ? 1 : 0;
            }
            p.reveal_rate = reveal / static_cast<double>(cs.size());
            if (task == TaskKind::Intervention) p.success_rate = ratio(addressed, cs.size());
            report.curves.push_back(p);
        }
    }
    return report;
}

AggregateReport aggregate(const std::vector<SessionRecord>& records, const FindingMatcher& matcher,
                          const Grouping& grouping, const StyleJudge* judge) {
    if (records.empty()) throw EmptyBatch("no records to aggregate");
    std::vector<CaseScores> cases;
    cases.reserve(records.size());
    for (const auto& r : records) cases.push_back(score_case(r, matcher, grouping, judge));
    return aggregate(cases);
}

std::string rows_to_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    std::vector<std::string> columns;
    for (const auto& r : rows) {
        for (const auto& [name, v] : r.values) {
            if (std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
        }
    }
    out << "task,group,aggregation,cases";
    for (const auto& c : columns) out << ',' << c;
    out << '\n';
    for (const auto& r : rows) {
        out << r.task << ',' << csv_field(r.group) << ',' << r.aggregation << ',' << r.cases;
        for (const auto& c : columns) {
            out << ',';
            if (auto v = r.get(c)) out << format_number(*v);
        }
        out << '\n';
    }
    return out.str();
}

json rows_to_json(const std::vector<MetricRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json values = json::object();
        for (const auto& [name, v] : r.values) values[name] = opt(v);
        out.push_back({{"task", r.task},
                       {"group", r.group},
                       {"aggregation", r.aggregation},
                       {"cases", r.cases},
                       {"values", values}});
    }
    return out;
}

std::string curves_to_csv(const std::vector<CurvePoint>& curves) {
    std::ostringstream out;
    out << "task,group,turn,reveal_rate,success_rate\n";
    for (const auto& p : curves) {
        out << p.task << ',' << csv_field(p.group) << ',' << p.turn << ',' << format_number(p.reveal_rate) << ',';
        if (p.success_rate) out << format_number(*p.success_rate);
        out << '\n';
    }
    return out.str();
}

json case_scores_to_json(const CaseScores& c) {
    return {{"session_id", c.session_id},
            {"case_id", c.case_id},
            {"task", task_name(c.task)},
            {"group", c.group},
            {"confirmation", c.confirmation ? confirmation_scores_to_json(*c.confirmation) : json(nullptr)},
            {"intervention", c.intervention ? intervention_scores_to_json(*c.intervention) : json(nullptr)},
            {"style", style_scores_to_json(c.style)},
            {"reveal_by_turn", c.reveal_by_turn}};
}

}  // namespace rpsim

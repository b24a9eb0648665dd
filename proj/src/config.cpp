#include "rpsim/config.hpp"

#include <fstream>
#include <sstream>

#include "rpsim/error.hpp"

namespace fs = std::filesystem;

namespace rpsim {

namespace {

json read_json_file(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + what + " '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(what + " '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open prompt file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

BackendSpec read_backend(const json& j, const std::string& where, const fs::path& base, BackendSpec spec) {
    check_keys(j, where, {"backend", "endpoint", "prompt_file", "max_attempts", "options"});
    spec.backend = j.value("backend", spec.backend);
    spec.endpoint = j.value("endpoint", spec.endpoint);
    if (j.contains("prompt_file")) spec.prompt_file = resolve(base, j["prompt_file"].get<std::string>()).string();
    spec.max_attempts = j.value("max_attempts", spec.max_attempts);
    if (spec.max_attempts < 1) throw ConfigError(where + ".max_attempts must be at least 1");
    if (j.contains("options")) spec.options = j["options"];
    return spec;
}

ProtocolSpec read_protocol(const json& j, const std::string& where) {
    try {
        auto p = protocol_from_json(j);
        p.validate();
        return p;
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

ClinicianScript read_script(const json& j, const std::string& where) {
    check_keys(j, where, {"utterances", "findings", "stop_from_turn"});
    ClinicianScript s;
    s.utterances = j.at("utterances").get<std::vector<std::string>>();
    if (s.utterances.empty()) throw ConfigError(where + ".utterances must not be empty");
    if (j.contains("findings")) s.findings = findings_from_json(j["findings"]);
    if (j.contains("stop_from_turn") && !j["stop_from_turn"].is_null()) s.stop_from_turn = j["stop_from_turn"].get<int>();
    return s;
}

}  // namespace

AppConfig AppConfig::defaults() {
    AppConfig cfg;
    cfg.service.tokens = {{"RPSIM_CLINICIAN_TOKEN", "clinician"}, {"RPSIM_EVALUATOR_TOKEN", "evaluator"}};
    cfg.confirmation_protocol.wall_clock_limit = cfg.service.wall_clock_seconds;
    cfg.intervention_protocol.wall_clock_limit = cfg.service.wall_clock_seconds;
    return cfg;
}

AppConfig config_from_json(const json& j, const fs::path& base_dir) {
    AppConfig cfg = AppConfig::defaults();
    try {
        check_keys(j, "config", {"endpoints", "evaluator", "responder", "matcher", "style_judge", "policy",
                                 "clinician_fixtures", "protocols", "service", "workers"});
        if (j.contains("endpoints")) {
            for (auto it = j["endpoints"].begin(); it != j["endpoints"].end(); ++it) {
                json e = *it;
                if (!e.contains("name")) e["name"] = it.key();
                cfg.endpoints[it.key()] = endpoint_from_json(e);
            }
        }
        if (j.contains("evaluator")) cfg.evaluator = read_backend(j["evaluator"], "evaluator", base_dir, cfg.evaluator);
        if (j.contains("responder")) cfg.responder = read_backend(j["responder"], "responder", base_dir, cfg.responder);
        if (j.contains("matcher")) cfg.matcher = read_backend(j["matcher"], "matcher", base_dir, cfg.matcher);
        if (j.contains("style_judge") && !j["style_judge"].is_null())
            cfg.style_judge_endpoint = j["style_judge"].at("endpoint").get<std::string>();
        if (j.contains("policy") && !j["policy"].is_null())
            cfg.policy_file = resolve(base_dir, j["policy"].get<std::string>());
        if (j.contains("clinician_fixtures"))
            cfg.clinician_fixtures = resolve(base_dir, j["clinician_fixtures"].get<std::string>());
        if (j.contains("protocols")) {
            const auto& p = j["protocols"];
            check_keys(p, "protocols", {"confirmation", "intervention"});
            if (p.contains("confirmation")) cfg.confirmation_protocol = read_protocol(p["confirmation"], "protocols.confirmation");
            if (p.contains("intervention")) cfg.intervention_protocol = read_protocol(p["intervention"], "protocols.intervention");
            if (cfg.confirmation_protocol.task != TaskKind::Confirmation ||
                cfg.intervention_protocol.task != TaskKind::Intervention)
                throw ConfigError("protocols: task does not match its slot");
        }
        if (j.contains("service")) {
            const auto& s = j["service"];
            check_keys(s, "service", {"host", "port", "cases", "traces", "tokens", "wall_clock_seconds"});
            cfg.service.host = s.value("host", cfg.service.host);
            cfg.service.port = s.value("port", cfg.service.port);
            if (s.contains("cases")) cfg.service.cases_dir = resolve(base_dir, s["cases"].get<std::string>());
            if (s.contains("traces")) cfg.service.traces_dir = resolve(base_dir, s["traces"].get<std::string>());
            cfg.service.wall_clock_seconds = s.value("wall_clock_seconds", cfg.service.wall_clock_seconds);
            if (s.contains("tokens")) {
                cfg.service.tokens.clear();
                for (const auto& t : s["tokens"]) {
                    TokenSpec ts{t.at("env").get<std::string>(), t.at("role").get<std::string>()};
                    if (ts.role != "clinician" && ts.role != "evaluator")
                        throw ConfigError("service.tokens: unknown role '" + ts.role + "'");
                    cfg.service.tokens.push_back(std::move(ts));
                }
            }
        }
        if (!j.contains("protocols") || !j["protocols"].contains("confirmation") ||
            !j["protocols"]["confirmation"].contains("wall_clock_limit"))
            cfg.confirmation_protocol.wall_clock_limit = cfg.service.wall_clock_seconds;
        if (!j.contains("protocols") || !j["protocols"].contains("intervention") ||
            !j["protocols"]["intervention"].contains("wall_clock_limit"))
            cfg.intervention_protocol.wall_clock_limit = cfg.service.wall_clock_seconds;
        cfg.workers = j.value("workers", cfg.workers);
        if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

AppConfig load_config_file(const fs::path& path) {
    return config_from_json(read_json_file(path, "config file"), path.parent_path().empty() ? "." : path.parent_path());
}

std::shared_ptr<JsonTransport> transport_for(const AppConfig& cfg, const std::string& endpoint) {
    auto it = cfg.endpoints.find(endpoint);
    if (it == cfg.endpoints.end()) throw ConfigError("endpoint '" + endpoint + "' is not configured");
    return make_http_transport(it->second);
}

std::shared_ptr<const EvaluatorBackend> make_evaluator(const AppConfig& cfg) {
    const auto& s = cfg.evaluator;
    if (s.backend == "lexical") {
        try {
            return std::make_shared<LexicalEvaluator>(LexicalConfig::from_json(s.options));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("evaluator.options: ") + e.what());
        }
    }
    if (s.backend == "judge") {
        JudgeConfig jc;
        jc.max_attempts = s.max_attempts;
        if (!s.prompt_file.empty()) jc.prompt_template = read_text_file(s.prompt_file);
        jc.clamp_out_of_range = s.options.value("clamp_out_of_range", jc.clamp_out_of_range);
        return std::make_shared<JudgeEvaluator>(jc, transport_for(cfg, s.endpoint));
    }
    throw ConfigError("unknown evaluator backend '" + s.backend + "'");
}

std::shared_ptr<const PatientResponder> make_responder(const AppConfig& cfg) {
    const auto& s = cfg.responder;
    ReplyStyle style;
    style.max_words = s.options.value("max_words", style.max_words);
    style.max_issues = s.options.value("max_issues", style.max_issues);
    if (s.backend == "scripted") return std::make_shared<ScriptedResponder>(style);
    if (s.backend == "model") {
        ModelResponderConfig mc;
        mc.max_attempts = s.max_attempts;
        mc.style = style;
        if (!s.prompt_file.empty()) mc.prompt_template = read_text_file(s.prompt_file);
        mc.leak_threshold = s.options.value("leak_threshold", mc.leak_threshold);
        return std::make_shared<ModelResponder>(mc, transport_for(cfg, s.endpoint));
    }
    throw ConfigError("unknown responder backend '" + s.backend + "'");
}

std::unique_ptr<FindingMatcher> make_matcher(const AppConfig& cfg) {
    const auto& s = cfg.matcher;
    if (s.backend == "lexical") return std::make_unique<LexicalMatcher>(s.options.value("threshold", 0.35));
    if (s.backend == "judge") {
        if (s.endpoint.empty() || !cfg.endpoints.contains(s.endpoint))
            throw MatcherUnavailable("judge matcher needs a configured endpoint");
        std::string prompt;
        if (!s.prompt_file.empty()) prompt = read_text_file(s.prompt_file);
        return std::make_unique<JudgeMatcher>(transport_for(cfg, s.endpoint), prompt);
    }
    throw ConfigError("unknown matcher backend '" + s.backend + "'");
}

std::unique_ptr<StyleJudge> make_style_judge(const AppConfig& cfg) {
    if (!cfg.style_judge_endpoint) return nullptr;
    return std::make_unique<HttpStyleJudge>(transport_for(cfg, *cfg.style_judge_endpoint));
}

PolicyConfig load_policy(const AppConfig& cfg) {
    if (!cfg.policy_file) return PolicyConfig::defaults();
    return load_policy_file(cfg.policy_file->string());
}

const ClinicianScript& ClinicianFixture::script_for(const std::string& case_id) const {
    auto it = cases.find(case_id);
    return it == cases.end() ? fallback : it->second;
}

ClinicianFixture clinician_fixture_from_json(const json& j) {
    try {
        check_keys(j, "clinician fixture", {"name", "default", "cases"});
        ClinicianFixture f;
        f.name = j.at("name").get<std::string>();
        f.fallback = read_script(j.at("default"), f.name + ".default");
        if (j.contains("cases")) {
            for (auto it = j["cases"].begin(); it != j["cases"].end(); ++it)
                f.cases[it.key()] = read_script(*it, f.name + ".cases." + it.key());
        }
        return f;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("clinician fixture: ") + e.what());
    } catch (const SchemaError& e) {
        throw ConfigError(std::string("clinician fixture: ") + e.what());
    } catch (const CategoryError& e) {
        throw ConfigError(std::string("clinician fixture: ") + e.what());
    }
}

std::optional<ClinicianFixture> builtin_clinician_fixture(const std::string& name) {
    ClinicianFixture f;
    f.name = name;
    if (name == "closed") {
        f.fallback.utterances = {
            "Are you taking your medication every day?",
            "Did you have any side effects?",
            "Have you checked your blood pressure at home?",
            "Do you smoke?",
            "Is your appetite normal?",
            "Did you fill your prescriptions?",
            "Are you sleeping well?",
            "Have you had any dizziness?",
        };
        return f;
    }
    if (name == "stop") {
        f.fallback.utterances = {"What worries you most about your treatment?",
                                 "Is there anything else on your mind?"};
        f.fallback.stop_from_turn = 1;
        return f;
    }
    if (name == "meta") {
        f.fallback.utterances = {
            "Do you have any Misinformation or Misconceptions?",
            "Do you have an Emotional Discomfort or Fear?",
            "Do you have any Communication Barriers?",
            "Do you have a Financial or Insurance-Related Concern?",
        };
        return f;
    }
    return std::nullopt;
}

std::unique_ptr<ClinicianAgent> make_clinician(const AppConfig& cfg, const std::string& spec,
                                               const std::string& case_id) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw ConfigError("clinician spec '" + spec + "' needs a scheme");
    const std::string scheme = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    if (arg.empty()) throw ConfigError("clinician spec '" + spec + "' has an empty argument");
    if (scheme == "http") return std::make_unique<HttpClinicianAgent>(transport_for(cfg, arg));
    if (scheme != "scripted") throw ConfigError("unknown clinician scheme '" + scheme + "'");

    auto fixture = builtin_clinician_fixture(arg);
    if (!fixture) {
        fs::path path = arg.ends_with(".json") ? fs::path(arg) : cfg.clinician_fixtures / (arg + ".json");
        fixture = clinician_fixture_from_json(read_json_file(path, "clinician fixture"));
    }
    const auto& script = fixture->script_for(case_id);
    return std::make_unique<ScriptedClinician>(spec, script.utterances, script.findings, script.stop_from_turn);
}

}  // namespace rpsim

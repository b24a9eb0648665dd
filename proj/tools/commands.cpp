#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "rpsim/config.hpp"
#include "rpsim/error.hpp"
#include "rpsim/metrics.hpp"
#include "rpsim/replay.hpp"
#include "rpsim/service.hpp"
#include "rpsim/trace_io.hpp"

namespace fs = std::filesystem;

namespace rpsim::cli {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

AppConfig load_app_config(const std::string& path) {
    if (path.empty()) return AppConfig::defaults();
    if (!fs::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
    return load_config_file(path);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

json read_json(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + what + " '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(what + " '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::string fmt(std::optional<double> v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '-');
    return out;
}

CaseLibrary load_cases(const std::string& path) {
    try {
        if (fs::is_regular_file(path)) {
            CaseLibrary lib;
            lib.add(load_profile_file(path));
            return lib;
        }
        auto lib = CaseLibrary::load_dir(path);
        if (lib.size() == 0) throw ConfigError("no case files in '" + path + "'");
        return lib;
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError("cases: " + e.code() + ": " + e.what());
    }
}

ProtocolSpec batch_protocol(const AppConfig& cfg, TaskKind task, const std::string& mode, int turns, int cap,
                            int min_stop) {
    ProtocolSpec p;
    if (mode.empty()) {
        p = task == TaskKind::Confirmation ? cfg.confirmation_protocol : cfg.intervention_protocol;
    } else if (mode == "fixed") {
        p = ProtocolSpec::fixed(task, turns);
    } else if (mode == "adaptive") {
        if (task != TaskKind::Confirmation)
            throw UsageError("adaptive stopping is only available for the confirmation task");
        p = ProtocolSpec::adaptive(min_stop, cap);
    } else if (mode == "success_capped") {
        if (task != TaskKind::Intervention)
            throw UsageError("success_capped is only available for the intervention task");
        p = ProtocolSpec::success_capped(cap);
    } else {
        throw UsageError("unknown mode '" + mode + "'");
    }
    // Batch runs use a logical clock, so a wall-clock limit would be meaningless.
    p.wall_clock_limit.reset();
    try {
        p.validate();
    } catch (const InvalidProtocol& e) {
        throw UsageError(e.what());
    }
    return p;
}

// ---- run-batch ------------------------------------------------------------

struct BatchArgs {
    std::string cases;
    std::string task;
    std::string mode;
    int turns = 8;
    int cap = 20;
    int min_stop = 5;
    std::vector<std::string> clinicians;
    std::string policy;
    std::string out;
    std::string config;
    int workers = 0;
};

struct BatchJob {
    std::string case_id;
    std::string clinician;
    std::string session_id;
};

struct BatchResult {
    std::optional<SessionRecord> record;
    std::string failure;
};

int run_batch(const BatchArgs& a, std::ostream& out, std::ostream& err) {
    const AppConfig cfg = load_app_config(a.config);
    const TaskKind task = parse_task(a.task);
    const ProtocolSpec protocol = batch_protocol(cfg, task, a.mode, a.turns, a.cap, a.min_stop);

    PolicyConfig policy;
    if (!a.policy.empty()) {
        if (!fs::exists(a.policy)) throw ConfigError("policy file '" + a.policy + "' does not exist");
        policy = load_policy_file(a.policy);
    } else {
        policy = load_policy(cfg);
    }
    const CaseLibrary cases = load_cases(a.cases);
    const auto evaluator = make_evaluator(cfg);
    const auto responder = make_responder(cfg);

    // Resolve every clinician once up front so a bad spec is a config error, not N failures.
    for (const auto& spec : a.clinicians) make_clinician(cfg, spec, cases.ids().front());

    std::vector<BatchJob> jobs;
    for (const auto& id : cases.ids()) {
        for (const auto& spec : a.clinicians) {
            jobs.push_back({id, spec,
                            sanitize(id) + "." + sanitize(spec) + "." + std::string(task_name(task)) + "." +
                                protocol_label(protocol)});
        }
    }

    std::vector<BatchResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const auto& job = jobs[i];
            try {
                auto clinician = make_clinician(cfg, job.clinician, job.case_id);
                SessionBackends backends{evaluator, responder, std::make_shared<StepClock>(0.0, 1.0), nullptr};
                auto rec = run_ai_session(job.session_id, cases.find(job.case_id), protocol, *clinician, policy,
                                          backends);
                if (rec.failure) results[i].failure = *rec.failure;
                results[i].record = std::move(rec);
            } catch (const Error& e) {
                results[i].failure = e.code() + ": " + e.what();
            } catch (const std::exception& e) {
                results[i].failure = e.what();
            }
        }
    };
    const int workers = std::max(1, a.workers > 0 ? a.workers : cfg.workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min<int>(workers, static_cast<int>(jobs.size())); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    fs::create_directories(a.out);
    json sessions = json::array();
    std::string index;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        const auto& res = results[i];
        json entry = {{"session_id", job.session_id}, {"case_id", job.case_id}, {"clinician", job.clinician},
                      {"file", nullptr},              {"status", nullptr},     {"stop_reason", nullptr},
                      {"turns", 0},                   {"failure", nullptr}};
        if (res.record) {
            const auto& r = *res.record;
            const std::string file = job.session_id + ".jsonl";
            write_trace_file(r, fs::path(a.out) / file);
            entry["file"] = file;
            entry["status"] = status_name(r.status);
            entry["stop_reason"] = r.stop_reason ? json(stop_reason_name(*r.stop_reason)) : json(nullptr);
            entry["turns"] = r.turns.size();
            IndexEntry ie{r.session_id, r.case_id, std::string(task_name(r.task())), file,
                          std::string(status_name(r.status)),
                          r.stop_reason ? std::string(stop_reason_name(*r.stop_reason)) : "",
                          static_cast<int>(r.turns.size())};
            index += index_entry_to_json(ie).dump() + "\n";
        }
        if (res.failure.empty()) {
            ++ok;
        } else {
            entry["failure"] = res.failure;
            err << "case " << job.case_id << " (" << job.clinician << ") failed: " << res.failure << "\n";
        }
        sessions.push_back(std::move(entry));
    }
    write_text(fs::path(a.out) / kIndexFile, index);
    const json manifest = {{"schema_version", "rpsim-manifest-v1"},
                           {"task", task_name(task)},
                           {"protocol", protocol_to_json(protocol)},
                           {"policy_version", policy.version},
                           {"evaluator", evaluator->name()},
                           {"responder", responder->name()},
                           {"clinicians", a.clinicians},
                           {"succeeded", ok},
                           {"failed", jobs.size() - ok},
                           {"sessions", sessions}};
    write_text(fs::path(a.out) / "manifest.json", manifest.dump(2) + "\n");

    out << "sessions: " << jobs.size() << "  succeeded: " << ok << "  failed: " << jobs.size() - ok << "\n";
    if (ok == jobs.size()) return kExitOk;
    return ok == 0 ? kExitTotal : kExitPartial;
}

// ---- score ----------------------------------------------------------------

struct ScoreArgs {
    std::string records;
    std::string matcher;
    std::string out;
    std::string config;
    bool no_clinician_group = false;
    bool no_protocol_group = false;
    bool no_style_judge = false;
};

void print_rows(std::ostream& out, const std::string& title, const std::vector<MetricRow>& rows) {
    if (rows.empty()) return;
    out << "== " << title << " ==\n";
    for (const auto& r : rows) {
        out << r.group << " [" << r.aggregation << ", n=" << r.cases << "]";
        for (const auto& [name, v] : r.values) out << "  " << name << "=" << fmt(v);
        out << "\n";
    }
}

int score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
    AppConfig cfg = load_app_config(a.config);
    if (!a.matcher.empty()) cfg.matcher.backend = a.matcher;
    const auto matcher = make_matcher(cfg);
    const auto judge = a.no_style_judge ? nullptr : make_style_judge(cfg);

    std::vector<SessionRecord> all;
    try {
        all = read_trace_dir(a.records);
    } catch (const SchemaError& e) {
        throw ConfigError(std::string("records: ") + e.what());
    }
    std::vector<SessionRecord> usable;
    for (auto& r : all) {
        if (r.failure || r.status != SessionStatus::Closed) {
            err << "skipping " << r.session_id << ": " << (r.failure ? *r.failure : "session not closed") << "\n";
            continue;
        }
        usable.push_back(std::move(r));
    }
    const Grouping grouping{!a.no_clinician_group, !a.no_protocol_group};
    const auto report = aggregate(usable, *matcher, grouping, judge.get());

    const fs::path dir(a.out);
    write_text(dir / "confirmation.csv", rows_to_csv(report.confirmation));
    write_text(dir / "intervention.csv", rows_to_csv(report.intervention));
    write_text(dir / "style.csv", rows_to_csv(report.style));
    write_text(dir / "curves.csv", curves_to_csv(report.curves));
    json cases = json::array();
    for (const auto& c : report.cases) cases.push_back(case_scores_to_json(c));
    const json doc = {{"matcher", matcher->name()},
                      {"records", usable.size()},
                      {"skipped", all.size() - usable.size()},
                      {"confirmation", rows_to_json(report.confirmation)},
                      {"intervention", rows_to_json(report.intervention)},
                      {"style", rows_to_json(report.style)},
                      {"cases", cases}};
    write_text(dir / "scores.json", doc.dump(2) + "\n");

    print_rows(out, "confirmation", report.confirmation);
    print_rows(out, "intervention", report.intervention);
    print_rows(out, "style", report.style);
    return all.size() == usable.size() ? kExitOk : kExitPartial;
}

// ---- fit-policy -----------------------------------------------------------

struct FitArgs {
    std::string labels;
    double reg = 1e-3;
    std::string out;
    std::string target = "reveal";
    std::string base;
    std::string version = "fitted-v1";
};

std::vector<PseudoLabeledTurn> read_labels(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open labels file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    std::vector<json> items;
    const auto first = text.find_first_not_of(" \t\r\n");
    try {
        if (first != std::string::npos && text[first] == '[') {
            for (const auto& j : json::parse(text)) items.push_back(j);
        } else {
            std::istringstream lines(text);
            std::string line;
            while (std::getline(lines, line))
                if (line.find_first_not_of(" \t\r") != std::string::npos) items.push_back(json::parse(line));
        }
        std::vector<PseudoLabeledTurn> out;
        for (const auto& j : items) {
            PseudoLabeledTurn t;
            t.features = j.at("features").get<std::vector<double>>();
            t.label = j.at("label").get<int>();
            if (t.label != 0 && t.label != 1) throw ConfigError("labels must be 0 or 1");
            t.cluster = j.value("cluster", std::size_t{0});
            out.push_back(std::move(t));
        }
        return out;
    } catch (const json::exception& e) {
        throw ConfigError("labels file '" + path.string() + "': " + e.what());
    }
}

int fit_policy(const FitArgs& a, std::ostream& out, std::ostream&) {
    if (a.target != "reveal" && a.target != "address") throw UsageError("--target must be reveal or address");
    PolicyConfig policy = a.base.empty() ? PolicyConfig::defaults() : load_policy_file(a.base);
    const auto turns = read_labels(a.labels);
    const std::size_t arity = a.target == "reveal" ? kRevealArity : kAddressArity;
    for (const auto& t : turns) {
        if (t.features.size() != arity)
            throw ConfigError("label rows need " + std::to_string(arity) + " features for the " + a.target + " target");
        if (t.cluster >= policy.cluster_count())
            throw ConfigError("label cluster " + std::to_string(t.cluster) + " exceeds the policy's clusters");
    }
    FitOptions opts;
    opts.cluster_count = policy.cluster_count();
    const FitResult fit = fit_logistic(turns, a.reg, opts);
    if (a.target == "reveal") {
        policy.w = fit.w;
        policy.deltas = fit.deltas;
    } else {
        policy.w_addr = fit.w;
        policy.deltas_addr = fit.deltas;
    }
    policy.version = a.version;
    policy.validate();
    write_text(a.out, policy_to_json(policy).dump(2) + "\n");
    json report = fit_report_to_json(fit);
    report["target"] = a.target;
    report["samples"] = turns.size();
    report["reg"] = a.reg;
    report["policy_version"] = policy.version;
    fs::path report_path(a.out);
    report_path.replace_extension(".fit.json");
    write_text(report_path, report.dump(2) + "\n");

    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", fit.train_accuracy);
    out << "training accuracy: " << buf << "\n";
    out << "converged: " << (fit.converged ? "yes" : "no") << " after " << fit.iterations << " iterations\n";
    return kExitOk;
}

// ---- replay ---------------------------------------------------------------

struct ReplayArgs {
    std::string records;
    std::string candidates;
    std::string out;
    bool traces = false;
};

int replay(const ReplayArgs& a, std::ostream& out, std::ostream&) {
    std::vector<SessionRecord> records;
    try {
        records = read_trace_dir(a.records);
    } catch (const SchemaError& e) {
        throw ConfigError(std::string("records: ") + e.what());
    }
    if (records.empty()) throw EmptyBatch("no records in '" + a.records + "'");
    const auto candidates = candidates_from_json(read_json(a.candidates, "candidates file"));
    const auto report = replay_thresholds(records, candidates);
    write_text(a.out, replay_report_to_json(report, a.traces).dump(2) + "\n");
    for (const auto& c : report.candidates) {
        out << c.version << "  sessions=" << c.sessions << "  reveal_rate=" << fmt(c.reveal_rate)
            << "  success_rate=" << fmt(c.success_rate) << "  mean_turn_to_address=" << fmt(c.mean_turn_to_address)
            << "\n";
    }
    return kExitOk;
}

// ---- serve ----------------------------------------------------------------

struct ServeArgs {
    std::string config;
    std::string host;
    int port = -1;
    std::string cases;
    std::string traces;
};

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int serve(const ServeArgs& a, std::ostream& out, std::ostream&) {
    const AppConfig cfg = load_app_config(a.config);
    ServiceOptions opts;
    opts.confirmation = cfg.confirmation_protocol;
    opts.intervention = cfg.intervention_protocol;
    opts.policy = load_policy(cfg);
    for (const auto& t : cfg.service.tokens) {
        const char* v = std::getenv(t.env.c_str());
        if (!v || !*v) continue;
        opts.tokens[v] = t.role == "evaluator" ? Role::Evaluator : Role::Clinician;
    }
    if (opts.tokens.empty()) throw ConfigError("no service tokens are set in the environment");

    const CaseLibrary cases = load_cases(a.cases.empty() ? cfg.service.cases_dir.string() : a.cases);
    const fs::path traces = a.traces.empty() ? cfg.service.traces_dir : fs::path(a.traces);
    SessionBackends backends{make_evaluator(cfg), make_responder(cfg), std::make_shared<SystemClock>(),
                             std::make_shared<FileTraceSink>(traces)};
    SessionService service(cases, backends, opts);
    HttpServer server(service, a.host.empty() ? cfg.service.host : a.host, a.port >= 0 ? a.port : cfg.service.port);
    server.start();
    out << "listening on port " << server.port() << " with " << cases.size() << " cases\n" << std::flush;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    server.stop();
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulated-patient runtime: batch runs, scoring, policy fitting, replay and the session service",
                 "rpsim"};
    app.require_subcommand(1);

    BatchArgs batch;
    auto* rb = app.add_subcommand("run-batch", "Run scripted or remote clinicians over a case set");
    rb->add_option("--cases", batch.cases, "Case directory or single case file")->required();
    rb->add_option("--task", batch.task, "confirmation or intervention")
        ->required()
        ->check(CLI::IsMember({"confirmation", "intervention"}));
    rb->add_option("--mode", batch.mode, "fixed, adaptive or success_capped (default: config protocol)")
        ->check(CLI::IsMember({"fixed", "adaptive", "success_capped"}));
    rb->add_option("--turns", batch.turns, "Turn count for fixed mode")->capture_default_str();
    rb->add_option("--cap", batch.cap, "Turn cap for adaptive and success_capped")->capture_default_str();
    rb->add_option("--min-stop", batch.min_stop, "Earliest turn a STOP is honoured in adaptive mode")
        ->capture_default_str();
    rb->add_option("--clinician", batch.clinicians, "scripted:<fixture> or http:<endpoint>; repeatable")->required();
    rb->add_option("--policy", batch.policy, "Policy file (default: config or built-in)");
    rb->add_option("--out", batch.out, "Output directory for records and manifest")->required();
    rb->add_option("--config", batch.config, "Config file");
    rb->add_option("--workers", batch.workers, "Worker threads (default: config)");

    ScoreArgs sc;
    auto* sa = app.add_subcommand("score", "Score records and emit metric tables and curves");
    sa->add_option("--records", sc.records, "Directory of record files")->required();
    sa->add_option("--matcher", sc.matcher, "lexical or judge (default: config)")
        ->check(CLI::IsMember({"lexical", "judge"}));
    sa->add_option("--out", sc.out, "Output directory for tables")->required();
    sa->add_option("--config", sc.config, "Config file");
    sa->add_flag("--no-clinician-group", sc.no_clinician_group, "Do not split rows by clinician");
    sa->add_flag("--no-protocol-group", sc.no_protocol_group, "Do not split rows by protocol");
    sa->add_flag("--no-style-judge", sc.no_style_judge, "Skip the style judge even if configured");

    FitArgs fit;
    auto* fp = app.add_subcommand("fit-policy", "Fit reveal or address weights from pseudo-labels");
    fp->add_option("--labels", fit.labels, "JSON array or JSONL of {features, label, cluster}")->required();
    fp->add_option("--reg", fit.reg, "L2 regularization strength")->capture_default_str();
    fp->add_option("--out", fit.out, "Output policy file")->required();
    fp->add_option("--target", fit.target, "reveal or address")->capture_default_str();
    fp->add_option("--base", fit.base, "Policy whose constants are kept (default: built-in)");
    fp->add_option("--version", fit.version, "Version string of the fitted policy")->capture_default_str();

    ReplayArgs rp;
    auto* ra = app.add_subcommand("replay", "Replay stored traces under candidate policies");
    ra->add_option("--records", rp.records, "Directory of record files")->required();
    ra->add_option("--candidates", rp.candidates, "Candidate policy list")->required();
    ra->add_option("--out", rp.out, "Output report file")->required();
    ra->add_flag("--traces", rp.traces, "Include per-trace results");

    ServeArgs sv;
    auto* se = app.add_subcommand("serve", "Run the HTTP session service");
    se->add_option("--config", sv.config, "Config file");
    se->add_option("--host", sv.host, "Bind address (default: config)");
    se->add_option("--port", sv.port, "Port, 0 for any (default: config)");
    se->add_option("--cases", sv.cases, "Case directory (default: config)");
    se->add_option("--traces", sv.traces, "Trace directory (default: config)");

    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (rb->parsed()) return run_batch(batch, out, err);
        if (sa->parsed()) return score(sc, out, err);
        if (fp->parsed()) return fit_policy(fit, out, err);
        if (ra->parsed()) return replay(rp, out, err);
        if (se->parsed()) return serve(sv, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidProtocol& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const MatcherUnavailable& e) {
        err << "MatcherUnavailable: " << e.what() << "\n";
        return kExitConfig;
    } catch (const EmptyBatch& e) {
        err << "EmptyBatch: " << e.what() << "\n";
        return kExitTotal;
    } catch (const Error& e) {
        err << e.code() << ": " << e.what() << "\n";
        return kExitTotal;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitTotal;
    }
    return kExitUsage;
}

}  // namespace rpsim::cli

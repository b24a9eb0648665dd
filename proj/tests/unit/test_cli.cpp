#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "helpers.hpp"
#include "rpsim/trace_io.hpp"

using namespace rpsim;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "rpsim");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& tag) {
    std::random_device rd;
    auto dir = fs::temp_directory_path() / ("rpsim-cli-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(dir);
    return dir;
}

std::string cases_dir() { return testsupport::fixture_path("cases").string(); }

std::string write_config(const fs::path& dir) {
    const json cfg = {{"clinician_fixtures", testsupport::fixture_path("clinicians").string()}};
    const auto path = dir / "rpsim.json";
    std::ofstream(path) << cfg.dump();
    return path.string();
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(invoke({}).code == cli::kExitUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
    CHECK(invoke({"run-batch", "--task", "confirmation"}).code == cli::kExitUsage);
    CHECK(invoke({"run-batch", "--cases", "x", "--task", "chat", "--clinician", "scripted:closed", "--out", "y"}).code ==
          cli::kExitUsage);
    const auto r = invoke({"run-batch", "--cases", cases_dir(), "--task", "intervention", "--mode", "adaptive",
                        "--clinician", "scripted:closed", "--out", "unused"});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("usage error") != std::string::npos);
}

TEST_CASE("run-batch then score") {
    const auto dir = scratch("batch");
    const auto cfg = write_config(dir);
    const auto conf = invoke({"run-batch", "--cases", cases_dir(), "--task", "confirmation", "--mode", "fixed", "--turns",
                           "8", "--clinician", "scripted:elicit", "--clinician", "scripted:closed", "--out",
                           (dir / "rec").string(), "--config", cfg, "--workers", "3"});
    CHECK(conf.code == cli::kExitOk);
    CHECK(conf.out.find("sessions: 6  succeeded: 6  failed: 0") != std::string::npos);
    const auto iv = invoke({"run-batch", "--cases", cases_dir(), "--task", "intervention", "--clinician",
                         "scripted:persuade", "--out", (dir / "rec").string(), "--config", cfg});
    CHECK(iv.code == cli::kExitOk);
    CHECK(read_index(dir / "rec").size() == 3);
    CHECK(fs::exists(dir / "rec" / "manifest.json"));
    CHECK(read_trace_dir(dir / "rec").size() == 9);

    const auto sc = invoke({"score", "--records", (dir / "rec").string(), "--out", (dir / "scores").string()});
    CHECK(sc.code == cli::kExitOk);
    CHECK(sc.out.find("== confirmation ==") != std::string::npos);
    CHECK(sc.out.find("scripted:persuade|success_capped-20 [micro, n=3]  success_rate=1.0000") != std::string::npos);
    for (const char* f : {"confirmation.csv", "intervention.csv", "style.csv", "curves.csv", "scores.json"})
        CHECK(fs::exists(dir / "scores" / f));

    const auto rp = invoke({"replay", "--records", (dir / "rec").string(), "--candidates",
                         (testsupport::source_dir() / "config/candidates.example.json").string(), "--out",
                         (dir / "replay.json").string()});
    CHECK(rp.code == cli::kExitOk);
    CHECK(fs::exists(dir / "replay.json"));
    fs::remove_all(dir);
}

TEST_CASE("fit-policy on separable data") {
    const auto dir = scratch("fit");
    std::ofstream labels(dir / "labels.jsonl");
    for (int i = 0; i < 30; ++i) {
        std::vector<double> f(11, 0.2);
        f[10] = i % 2 == 0 ? 0.9 : 0.1;
        labels << json{{"features", f}, {"label", i % 2 == 0 ? 1 : 0}}.dump() << "\n";
    }
    labels.close();
    const auto r = invoke({"fit-policy", "--labels", (dir / "labels.jsonl").string(), "--out", (dir / "p.json").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("training accuracy: 1.0000") != std::string::npos);
    const auto fitted = load_policy_file((dir / "p.json").string());
    CHECK(fitted.version == "fitted-v1");
    CHECK(fitted.w[10] > 0.0);
    CHECK(fs::exists(dir / "p.fit.json"));

    std::ofstream(dir / "short.jsonl") << R"({"features":[1.0],"label":1})" << "\n";
    CHECK(invoke({"fit-policy", "--labels", (dir / "short.jsonl").string(), "--out", (dir / "q.json").string()}).code ==
          cli::kExitConfig);
    fs::remove_all(dir);
}

TEST_CASE("configuration errors exit 2") {
    const auto dir = scratch("cfg");
    auto bad = policy_to_json(PolicyConfig::defaults());
    bad["T_lo"] = 0.9;
    std::ofstream(dir / "cands.json") << json::array({bad}).dump();
    CHECK(invoke({"replay", "--records", dir.string(), "--candidates", (dir / "cands.json").string(), "--out",
               (dir / "r.json").string()})
              .code == cli::kExitTotal);

    CHECK(invoke({"run-batch", "--cases", cases_dir(), "--task", "confirmation", "--clinician", "scripted:closed",
               "--policy", (dir / "missing.json").string(), "--out", (dir / "o").string()})
              .code == cli::kExitConfig);
    CHECK(invoke({"run-batch", "--cases", cases_dir(), "--task", "confirmation", "--clinician", "scripted:nobody",
               "--out", (dir / "o").string()})
              .code == cli::kExitConfig);

    fs::create_directories(dir / "rec");
    write_trace_file(testsupport::run_fixture_session("fx-001", "scripted:elicit",
                                                      ProtocolSpec::fixed(TaskKind::Confirmation, 6)),
                     dir / "rec" / "a.jsonl");
    const auto cands = invoke({"replay", "--records", (dir / "rec").string(), "--candidates",
                            (dir / "cands.json").string(), "--out", (dir / "r.json").string()});
    CHECK(cands.code == cli::kExitConfig);

    const auto judge = invoke({"score", "--records", (dir / "rec").string(), "--matcher", "judge", "--out",
                            (dir / "s").string()});
    CHECK(judge.code == cli::kExitConfig);
    CHECK(judge.err.find("MatcherUnavailable") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("empty and partially failed record sets") {
    const auto dir = scratch("empty");
    fs::create_directories(dir / "none");
    CHECK(invoke({"score", "--records", (dir / "none").string(), "--out", (dir / "s").string()}).code == cli::kExitTotal);

    fs::create_directories(dir / "mixed");
    write_trace_file(testsupport::run_fixture_session("fx-001", "scripted:elicit",
                                                      ProtocolSpec::fixed(TaskKind::Confirmation, 6)),
                     dir / "mixed" / "a.jsonl");
    auto failed = testsupport::run_fixture_session("fx-002", "scripted:elicit",
                                                   ProtocolSpec::fixed(TaskKind::Confirmation, 6));
    failed.failure = "JudgeUnavailable: offline";
    write_trace_file(failed, dir / "mixed" / "b.jsonl");
    const auto r = invoke({"score", "--records", (dir / "mixed").string(), "--out", (dir / "s").string()});
    CHECK(r.code == cli::kExitPartial);
    CHECK(r.err.find("skipping") != std::string::npos);
    fs::remove_all(dir);
}

#include <doctest.h>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "rpsim/error.hpp"
#include "rpsim/trace_io.hpp"

using namespace rpsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
    std::random_device rd;
    auto dir = fs::temp_directory_path() / ("rpsim-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(dir);
    return dir;
}

SessionRecord sample() {
    return testsupport::run_fixture_session("fx-001", "scripted:elicit", ProtocolSpec::fixed(TaskKind::Confirmation, 6));
}

}  // namespace

TEST_CASE("JSONL round-trip") {
    const auto rec = sample();
    const auto text = record_to_jsonl(rec);
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(rec.turns.size() + 1));
    const auto back = record_from_jsonl(text);
    CHECK(record_to_json(back) == record_to_json(rec));
}

TEST_CASE("truncated traces are rejected") {
    const auto text = record_to_jsonl(sample());
    const auto last_line = text.rfind('\n', text.size() - 2);
    CHECK_THROWS_AS(record_from_jsonl(text.substr(0, last_line + 1)), SchemaError);
    CHECK_THROWS_AS(record_from_jsonl(text.substr(0, text.size() / 2)), SchemaError);
    CHECK_THROWS_AS(record_from_jsonl(text + "{\"kind\":\"turn\"}\n"), SchemaError);

    const auto first_break = text.find('\n');
    CHECK_THROWS_AS(record_from_jsonl(text.substr(first_break + 1)), SchemaError);
}

TEST_CASE("trace files and directories") {
    const auto dir = scratch_dir("io");
    const auto rec = sample();
    write_trace_file(rec, dir / "a.jsonl");
    CHECK(record_to_json(read_trace_file(dir / "a.jsonl")) == record_to_json(rec));
    std::ofstream(dir / "notes.txt") << "ignored";
    CHECK(read_trace_dir(dir).size() == 1);
    CHECK_THROWS_AS(read_trace_file(dir / "missing.jsonl"), SchemaError);
    CHECK_THROWS_AS(read_trace_dir(dir / "nope"), SchemaError);
    fs::remove_all(dir);
}

TEST_CASE("file sink streams turns and indexes closed sessions") {
    const auto dir = scratch_dir("sink");
    auto backends = testsupport::scripted_backends();
    auto sink = std::make_shared<FileTraceSink>(dir);
    backends.sink = sink;
    auto s = Session::start("sess-1", testsupport::fixture_case("fx-002"), ProtocolSpec::success_capped(20),
                            PolicyConfig::defaults(), backends);
    s->post_clinician_turn("What worries you about your medicines?");
    {
        std::ifstream in(sink->trace_path("sess-1"));
        std::string line;
        int lines = 0;
        while (std::getline(in, line)) ++lines;
        CHECK(lines == 1);
    }
    s->fail("stopped by test");
    const auto rec = read_trace_file(sink->trace_path("sess-1"));
    CHECK(rec.turns.size() == 1);
    CHECK(rec.failure == std::optional<std::string>("stopped by test"));

    const auto index = read_index(dir);
    REQUIRE(index.size() == 1);
    CHECK(index[0].session_id == "sess-1");
    CHECK(index[0].case_id == "fx-002");
    CHECK(index[0].task == "intervention");
    CHECK(index[0].turns == 1);
    CHECK(index_entry_from_json(index_entry_to_json(index[0])).file == index[0].file);
    CHECK(read_trace_dir(dir).size() == 1);
    fs::remove_all(dir);
}

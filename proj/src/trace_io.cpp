#include "rpsim/trace_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rpsim/error.hpp"

namespace fs = std::filesystem;

namespace rpsim {

namespace {

json turn_line(const TurnRecord& t) {
    json j = turn_to_json(t);
    j["kind"] = "turn";
    return j;
}

json summary_line(const SessionRecord& r) {
    json j = record_summary_to_json(r);
    j["kind"] = "summary";
    j["schema_version"] = kTraceSchemaVersion;
    return j;
}

void append_line(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw SchemaError("cannot open " + path.string() + " for writing");
    out << j.dump() << '\n';
}

}  // namespace

std::string record_to_jsonl(const SessionRecord& record) {
    std::string out;
    for (const auto& t : record.turns) out += turn_line(t).dump() + "\n";
    out += summary_line(record).dump() + "\n";
    return out;
}

SessionRecord record_from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<TurnRecord> turns;
    std::optional<json> summary;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (summary) throw SchemaError("trace has content after the summary line (line " + std::to_string(lineno) + ")");
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaError("trace line " + std::to_string(lineno) + " is not JSON: " + e.what());
        }
        const std::string kind = j.value("kind", "");
        if (kind == "turn") {
            try {
                turns.push_back(turn_from_json(j));
            } catch (const json::exception& e) {
                throw SchemaError("trace line " + std::to_string(lineno) + ": " + e.what());
            }
        } else if (kind == "summary") {
            summary = std::move(j);
        } else {
            throw SchemaError("trace line " + std::to_string(lineno) + " has unknown kind '" + kind + "'");
        }
    }
    if (!summary) throw SchemaError("trace has no summary line");
    SessionRecord r = record_from_json(*summary);
    const auto expected = summary->value("turn_count", turns.size());
    if (expected != turns.size()) {
        throw SchemaError("trace summary announces " + std::to_string(expected) + " turns but " +
                          std::to_string(turns.size()) + " are present");
    }
    r.turns = std::move(turns);
    return r;
}

void write_trace_file(const SessionRecord& record, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SchemaError("cannot open " + path.string() + " for writing");
    out << record_to_jsonl(record);
}

SessionRecord read_trace_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return record_from_jsonl(ss.str());
}

std::vector<SessionRecord> read_trace_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw SchemaError(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
        if (entry.path().filename() == kIndexFile) continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SessionRecord> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(read_trace_file(f));
    return out;
}

json index_entry_to_json(const IndexEntry& e) {
    return {{"session_id", e.session_id}, {"case_id", e.case_id}, {"task", e.task},       {"file", e.file},
            {"status", e.status},         {"stop_reason", e.stop_reason}, {"turns", e.turns}};
}

IndexEntry index_entry_from_json(const json& j) {
    IndexEntry e;
    e.session_id = j.at("session_id").get<std::string>();
    e.case_id = j.at("case_id").get<std::string>();
    e.task = j.at("task").get<std::string>();
    e.file = j.at("file").get<std::string>();
    e.status = j.at("status").get<std::string>();
    e.stop_reason = j.at("stop_reason").get<std::string>();
    e.turns = j.at("turns").get<int>();
    return e;
}

std::vector<IndexEntry> read_index(const fs::path& dir) {
    std::vector<IndexEntry> out;
    std::ifstream in(dir / kIndexFile);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(index_entry_from_json(json::parse(line)));
    }
    return out;
}

FileTraceSink::FileTraceSink(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path FileTraceSink::trace_path(const std::string& session_id) const { return dir_ / (session_id + ".jsonl"); }

void FileTraceSink::on_turn(const std::string& session_id, const TurnRecord& turn) {
    std::lock_guard lock(mu_);
    append_line(trace_path(session_id), turn_line(turn));
}

void FileTraceSink::on_close(const SessionRecord& record) {
    std::lock_guard lock(mu_);
    const auto path = trace_path(record.session_id);
    append_line(path, summary_line(record));
    IndexEntry e;
    e.session_id = record.session_id;
    e.case_id = record.case_id;
    e.task = std::string(task_name(record.task()));
    e.file = path.filename().string();
    e.status = std::string(status_name(record.status));
    e.stop_reason = record.stop_reason ? std::string(stop_reason_name(*record.stop_reason)) : "";
    e.turns = static_cast<int>(record.turns.size());
    append_line(dir_ / kIndexFile, index_entry_to_json(e));
}

}  // namespace rpsim

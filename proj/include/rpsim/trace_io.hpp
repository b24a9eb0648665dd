#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpsim/session.hpp"

namespace rpsim {

inline constexpr const char* kTraceSchemaVersion = "rpsim-trace-v1";

/// One line per turn ({"kind":"turn", ...}) followed by one closing summary
/// line ({"kind":"summary", ...}).
std::string record_to_jsonl(const SessionRecord& record);
/// Throws SchemaError on a truncated or malformed trace.
SessionRecord record_from_jsonl(const std::string& text);

void write_trace_file(const SessionRecord& record, const std::filesystem::path& path);
SessionRecord read_trace_file(const std::filesystem::path& path);

/// All `*.jsonl` traces in a directory (index file excluded), sorted by file name.
std::vector<SessionRecord> read_trace_dir(const std::filesystem::path& dir);

struct IndexEntry {
    std::string session_id;
    std::string case_id;
    std::string task;
    std::string file;
    std::string status;
    std::string stop_reason;
    int turns = 0;
};

json index_entry_to_json(const IndexEntry& e);
IndexEntry index_entry_from_json(const json& j);
std::vector<IndexEntry> read_index(const std::filesystem::path& dir);

inline constexpr const char* kIndexFile = "index.jsonl";

/// Appends turns to `<dir>/<session_id>.jsonl` as they commit, writes the
/// summary on close and appends an entry to `<dir>/index.jsonl`.
class FileTraceSink final : public TraceSink {
public:
    explicit FileTraceSink(std::filesystem::path dir);

    void on_turn(const std::string& session_id, const TurnRecord& turn) override;
    void on_close(const SessionRecord& record) override;

    std::filesystem::path trace_path(const std::string& session_id) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::mutex mu_;
};

}  // namespace rpsim

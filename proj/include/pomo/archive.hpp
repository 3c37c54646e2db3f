#pragma once

// Append-only JSON-lines archive, one file per session. Every line is an
// object {"type": ..., "schema": 1, ...}:
//
//   header   session id, shared token, civil-day UTC offset (first line)
//   event    one session log entry
//   day      a DailyRecord; a later line for the same date replaces it
//   audit    a note about a replacement (re-recorded day, re-written journal)
//   journal  a JournalEntry; a later line for the same member and date replaces it
//
// A full rescan rebuilds everything; no other state is kept on disk.

#include "pomo/codec.hpp"
#include "pomo/ledger.hpp"
#include "pomo/session.hpp"

#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pomo {

inline constexpr int kArchiveSchema = 1;

/// Civil date "YYYY-MM-DD" of a server timestamp, which the server anchors to
/// Unix milliseconds, shifted by a fixed UTC offset.
std::string civil_date(Timestamp t, int utc_offset_minutes);

/// First instant of a civil date; throws Error{InvalidArgument} on bad input.
Timestamp day_start(std::string_view date, int utc_offset_minutes);

struct ArchiveHeader
{
    std::string session_id;
    std::string token;
    int utc_offset_minutes{0};

    bool operator==(const ArchiveHeader&) const = default;
};

struct InterruptionCounts
{
    int internal_deflected{0};
    int internal_voiding{0};
    int external_deflected{0};
    int external_voiding{0};

    bool operator==(const InterruptionCounts&) const = default;
};

struct DailyRecord
{
    std::string date;
    std::string session_id;
    std::vector<LogEntry> events;
    int completed{0};
    int voided{0};
    InterruptionCounts interruptions;
    std::vector<TrackMark> marks;

    bool operator==(const DailyRecord&) const = default;
};

struct JournalEntry
{
    std::string date;
    std::string member_id;
    std::vector<std::string> lines;        // written by the member, shown first
    std::vector<std::string> auto_summary; // derived from the day's events
    std::vector<std::string> stories;      // distinct stories marked that day

    bool operator==(const JournalEntry&) const = default;
};

struct ArchiveContents
{
    std::optional<ArchiveHeader> header;
    std::vector<LogEntry> events;
    std::map<std::string, DailyRecord> days;
    std::map<std::pair<std::string, std::string>, JournalEntry> journals; // (date, member)
    std::vector<json> audits;

    int utc_offset() const { return header ? header->utc_offset_minutes : 0; }
};

void to_json(json& j, const ArchiveHeader& h);
void from_json(const json& j, ArchiveHeader& h);
void to_json(json& j, const InterruptionCounts& c);
void from_json(const json& j, InterruptionCounts& c);
void to_json(json& j, const DailyRecord& r);
void from_json(const json& j, DailyRecord& r);
void to_json(json& j, const JournalEntry& e);
void from_json(const json& j, JournalEntry& e);

/// Throws Error{CorruptArchive} naming the offending line number.
ArchiveContents parse_archive(std::istream& in);

/// Appends self-describing lines to a file or an in-memory buffer. Each
/// append is a single write followed by a flush.
class Archive
{
  public:
    static Archive open(const std::filesystem::path& path);
    static Archive in_memory();

    void append_header(const ArchiveHeader& header);
    void append_event(const LogEntry& entry);
    void append_day(const DailyRecord& record, const std::optional<json>& audit);
    void append_journal(const JournalEntry& entry, const std::optional<json>& audit);

    ArchiveContents load() const;
    std::string bytes() const;
    const std::filesystem::path& path() const { return state_->path; }

  private:
    struct State
    {
        std::filesystem::path path; // empty for in-memory
        std::string memory;
        mutable std::mutex mu;
    };

    explicit Archive(std::shared_ptr<State> state)
        : state_(std::move(state))
    {}

    void write(const std::string& lines);

    std::shared_ptr<State> state_;
};

} // namespace pomo

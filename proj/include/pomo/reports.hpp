#pragma once

#include "pomo/archive.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pomo {

/// Counts a civil day's slice of a session log. Pure.
DailyRecord summarize_day(std::span<const LogEntry> log, std::string_view session_id, std::string_view date,
                          int utc_offset_minutes);

/// Summarizes `date` and appends it to the archive. Recording a date that is
/// already archived replaces it and writes an audit line.
DailyRecord record_day(Archive& archive, std::span<const LogEntry> session_log, std::string_view date,
                       Timestamp now);

/// Inclusive civil-date range; open ends are unbounded.
struct DateRange
{
    std::optional<std::string> from;
    std::optional<std::string> to;

    bool contains(const std::string& date) const;
};

struct StoryAccuracy
{
    std::string story_id;
    Effort estimate;
    Effort actual;
    double accuracy{0.0}; // actual / estimate

    bool operator==(const StoryAccuracy&) const = default;
};

struct DayWork
{
    std::string date;
    int completed{0};
    int voided{0};
    std::int64_t work_minutes{0}; // uninterrupted work, completed pomodoros only

    bool operator==(const DayWork&) const = default;
};

struct Metrics
{
    std::vector<StoryAccuracy> accuracy; // stories finished within the range
    std::vector<DayWork> days;
    int completed{0};
    int voided{0};
    double void_rate{0.0}; // voided / (voided + completed); 0 when nothing ran
    std::map<std::string, Effort> type_effort;
    std::map<std::string, double> type_share; // fraction of total tracked effort

    bool operator==(const Metrics&) const = default;
};

/// Derived purely from the archive's event lines. Throws CorruptArchive when
/// the log does not replay.
Metrics process(const ArchiveContents& archive, const DateRange& range = {});

void to_json(json& j, const StoryAccuracy& a);
void to_json(json& j, const DayWork& d);
void to_json(json& j, const Metrics& m);
std::string render_metrics(const Metrics& m);

/// Rebuilds the session from the archive's event lines.
SessionState replay_archive(const ArchiveContents& archive);

/// Header `story_id,title,estimate_pomodoros,actual_pomodoros,status`, one row
/// per tracked story in ledger order. LF line endings, RFC-4180 quoting.
std::string export_iteration_csv(const ArchiveContents& archive, std::string_view iteration_id);
std::string export_iteration_csv(const Ledger& ledger, std::string_view iteration_id);

std::string csv_field(std::string_view value);

/// Builds the member's entry for `date` (manual lines first, then the
/// generated summary), appends it to the archive and returns it.
JournalEntry generate_journal(Archive& archive, std::string_view member_id, std::string_view date,
                              std::vector<std::string> manual_lines);

std::string render_journal(const JournalEntry& entry);

/// Writes <dir>/<date>/<member>.txt and returns the path.
std::filesystem::path write_journal_file(const std::filesystem::path& dir, const JournalEntry& entry);

std::string render_day(const DailyRecord& record);

} // namespace pomo

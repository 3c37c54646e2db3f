#include "pomo/reports.hpp"

#include "pomo/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace pomo {

namespace {

std::string two_decimals(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

DailyRecord summarize_day(std::span<const LogEntry> log, std::string_view session_id, std::string_view date,
                          int utc_offset_minutes)
{
    DailyRecord r;
    r.date = std::string(date);
    r.session_id = std::string(session_id);
    for (const auto& e : log) {
        if (civil_date(e.at, utc_offset_minutes) != date) continue;
        r.events.push_back(e);
        if (std::holds_alternative<ev::WorkCompleted>(e.event)) ++r.completed;
        if (const auto* v = std::get_if<ev::Voided>(&e.event)) {
            ++r.voided;
            auto& slot = v->interruption.kind == InterruptionKind::Internal ? r.interruptions.internal_voiding
                                                                            : r.interruptions.external_voiding;
            ++slot;
        }
        if (const auto* i = std::get_if<ev::InterruptionLogged>(&e.event)) {
            auto& slot = i->interruption.kind == InterruptionKind::Internal ? r.interruptions.internal_deflected
                                                                            : r.interruptions.external_deflected;
            ++slot;
        }
        if (const auto* m = std::get_if<ev::MarkTracked>(&e.event)) r.marks.push_back(m->mark);
    }
    return r;
}

DailyRecord record_day(Archive& archive, std::span<const LogEntry> session_log, std::string_view date, Timestamp now)
{
    const ArchiveContents existing = archive.load();
    const std::string session = existing.header ? existing.header->session_id : std::string{};
    DailyRecord r = summarize_day(session_log, session, date, existing.utc_offset());
    std::optional<json> audit;
    if (existing.days.contains(r.date)) {
        audit = json{{"action", "re-record-day"}, {"date", r.date}, {"at", to_ms(now)}};
    }
    archive.append_day(r, audit);
    return r;
}

bool DateRange::contains(const std::string& date) const
{
    if (from && date < *from) return false;
    if (to && date > *to) return false;
    return true;
}

SessionState replay_archive(const ArchiveContents& archive)
{
    try {
        return replay_session(archive.events);
    } catch (const Error& e) {
        throw Error(Errc::CorruptArchive, std::string("event log does not replay: ") + e.what());
    }
}

Metrics process(const ArchiveContents& archive, const DateRange& range)
{
    const SessionState session = replay_archive(archive);
    const int offset = archive.utc_offset();
    Metrics m;

    std::map<std::string, DayWork> days;
    Timestamp started{};
    for (const auto& e : archive.events) {
        const std::string date = civil_date(e.at, offset);
        if (std::holds_alternative<ev::Started>(e.event)) started = e.at;
        if (!range.contains(date)) continue;
        if (std::holds_alternative<ev::WorkCompleted>(e.event)) {
            auto& d = days[date];
            d.date = date;
            ++d.completed;
            d.work_minutes += std::chrono::duration_cast<std::chrono::minutes>(e.at - started).count();
            ++m.completed;
        } else if (std::holds_alternative<ev::Voided>(e.event)) {
            auto& d = days[date];
            d.date = date;
            ++d.voided;
            ++m.voided;
        } else if (const auto* mk = std::get_if<ev::MarkTracked>(&e.event)) {
            m.type_effort[mk->mark.ptype] += mk->mark.effort;
        } else if (const auto* st = std::get_if<ev::StoryStatusChanged>(&e.event)) {
            if (st->status != StoryStatus::Done) continue;
            const Story* s = session.ledger.find_story(st->story_id);
            if (!s || !s->tracked || s->estimate.units == 0 || s->status != StoryStatus::Done) continue;
            auto already = std::find_if(m.accuracy.begin(), m.accuracy.end(),
                                        [&](const StoryAccuracy& a) { return a.story_id == s->id; });
            if (already != m.accuracy.end()) continue;
            const Effort actual = session.ledger.actual(s->id);
            m.accuracy.push_back(StoryAccuracy{s->id, s->estimate, actual,
                                               static_cast<double>(actual.units) / static_cast<double>(s->estimate.units)});
        }
    }
    for (auto& [_, d] : days) m.days.push_back(d);
    const int ran = m.completed + m.voided;
    m.void_rate = ran == 0 ? 0.0 : static_cast<double>(m.voided) / ran;
    Effort total;
    for (const auto& [_, e] : m.type_effort) total += e;
    for (const auto& [t, e] : m.type_effort) {
        m.type_share[t] = total.units == 0 ? 0.0 : static_cast<double>(e.units) / static_cast<double>(total.units);
    }
    return m;
}

void to_json(json& j, const StoryAccuracy& a)
{
    j = json{{"story_id", a.story_id},
             {"estimate_pomodoros", render_pomodoros(a.estimate)},
             {"actual_pomodoros", render_pomodoros(a.actual)},
             {"accuracy", two_decimals(a.accuracy)}};
}

void to_json(json& j, const DayWork& d)
{
    j = json{{"date", d.date}, {"completed", d.completed}, {"voided", d.voided}, {"work_minutes", d.work_minutes}};
}

void to_json(json& j, const Metrics& m)
{
    json types = json::object();
    for (const auto& [t, e] : m.type_effort) {
        types[t] = json{{"pomodoros", render_pomodoros(e)}, {"share", two_decimals(m.type_share.at(t))}};
    }
    j = json{{"accuracy", m.accuracy},
             {"days", m.days},
             {"completed", m.completed},
             {"voided", m.voided},
             {"void_rate", two_decimals(m.void_rate)},
             {"types", types}};
}

std::string render_metrics(const Metrics& m)
{
    std::ostringstream out;
    out << "pomodoros completed: " << m.completed << ", voided: " << m.voided
        << ", void rate: " << two_decimals(m.void_rate) << "\n";
    for (const auto& d : m.days) {
        out << d.date << ": " << d.completed << " completed (" << d.work_minutes << " min uninterrupted), "
            << d.voided << " voided\n";
    }
    for (const auto& a : m.accuracy) {
        out << "story " << a.story_id << ": estimate " << render_pomodoros(a.estimate) << ", actual "
            << render_pomodoros(a.actual) << ", accuracy " << two_decimals(a.accuracy) << "\n";
    }
    for (const auto& [t, e] : m.type_effort) {
        out << "type " << t << ": " << render_pomodoros(e) << " (" << two_decimals(m.type_share.at(t)) << ")\n";
    }
    return out.str();
}

std::string csv_field(std::string_view value)
{
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string export_iteration_csv(const Ledger& ledger, std::string_view iteration_id)
{
    if (!ledger.has_iteration(iteration_id)) {
        throw Error(Errc::UnknownIteration, "no iteration " + std::string(iteration_id));
    }
    std::string out = "story_id,title,estimate_pomodoros,actual_pomodoros,status\n";
    for (const auto& s : ledger.stories()) {
        if (s.iteration_id != iteration_id || !s.tracked) continue;
        out += csv_field(s.id);
        out += ',';
        out += csv_field(s.title);
        out += ',';
        out += render_pomodoros(s.estimate);
        out += ',';
        out += render_pomodoros(ledger.actual(s.id));
        out += ',';
        out += to_string(s.status);
        out += '\n';
    }
    return out;
}

std::string export_iteration_csv(const ArchiveContents& archive, std::string_view iteration_id)
{
    return export_iteration_csv(replay_archive(archive).ledger, iteration_id);
}

JournalEntry generate_journal(Archive& archive, std::string_view member_id, std::string_view date,
                              std::vector<std::string> manual_lines)
{
    const ArchiveContents contents = archive.load();
    const DailyRecord day = summarize_day(contents.events, "", date, contents.utc_offset());

    JournalEntry entry;
    entry.date = std::string(date);
    entry.member_id = std::string(member_id);
    entry.lines = std::move(manual_lines);

    std::set<std::string> seen;
    for (const auto& m : day.marks) {
        if (seen.insert(m.story_id).second) entry.stories.push_back(m.story_id);
    }
    const auto& c = day.interruptions;
    const int deflected = c.internal_deflected + c.external_deflected;
    const int voiding = c.internal_voiding + c.external_voiding;
    entry.auto_summary.push_back("pomodoros completed: " + std::to_string(day.completed));
    entry.auto_summary.push_back("pomodoros voided: " + std::to_string(day.voided));
    entry.auto_summary.push_back("interruptions: " + std::to_string(deflected + voiding) + " (" +
                                 std::to_string(deflected) + " deflected)");
    std::string touched = "stories touched:";
    for (const auto& s : entry.stories) touched += " " + s;
    if (entry.stories.empty()) touched += " none";
    entry.auto_summary.push_back(touched);

    std::optional<json> audit;
    if (contents.journals.contains({entry.date, entry.member_id})) {
        audit = json{{"action", "rewrite-journal"}, {"date", entry.date}, {"member_id", entry.member_id}};
    }
    archive.append_journal(entry, audit);
    return entry;
}

std::string render_journal(const JournalEntry& entry)
{
    std::string out = "journal " + entry.date + " " + entry.member_id + "\n";
    for (const auto& l : entry.lines) out += "- " + l + "\n";
    for (const auto& l : entry.auto_summary) out += "* " + l + "\n";
    return out;
}

std::filesystem::path write_journal_file(const std::filesystem::path& dir, const JournalEntry& entry)
{
    const auto folder = dir / entry.date;
    std::filesystem::create_directories(folder);
    const auto path = folder / (entry.member_id + ".txt");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << render_journal(entry);
    if (!out) throw Error(Errc::InvalidArgument, "cannot write journal " + path.string());
    return path;
}

std::string render_day(const DailyRecord& r)
{
    std::ostringstream out;
    const auto& c = r.interruptions;
    out << "day " << r.date << " (" << r.session_id << ")\n"
        << "completed: " << r.completed << "\n"
        << "voided: " << r.voided << "\n"
        << "interruptions: internal " << c.internal_deflected << " deflected / " << c.internal_voiding
        << " voiding, external " << c.external_deflected << " deflected / " << c.external_voiding << " voiding\n";
    Effort tracked;
    for (const auto& m : r.marks) tracked += m.effort;
    out << "tracked: " << render_pomodoros(tracked) << " pomodoros in " << r.marks.size() << " marks\n";
    return out.str();
}

} // namespace pomo

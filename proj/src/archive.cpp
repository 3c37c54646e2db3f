#include "pomo/archive.hpp"

#include "pomo/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pomo {

namespace {

// Proleptic Gregorian conversions (days since 1970-01-01).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d)
{
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d)
{
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

constexpr std::int64_t kDayMs = 86'400'000;

std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

json line(const char* type)
{
    return json{{"type", type}, {"schema", kArchiveSchema}};
}

} // namespace

std::string civil_date(Timestamp t, int utc_offset_minutes)
{
    const std::int64_t local = to_ms(t) + static_cast<std::int64_t>(utc_offset_minutes) * 60'000;
    std::int64_t y = 0;
    unsigned m = 0;
    unsigned d = 0;
    civil_from_days(floor_div(local, kDayMs), y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
    return buf;
}

Timestamp day_start(std::string_view date, int utc_offset_minutes)
{
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    char tail = 0;
    const std::string s(date);
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || m < 1 || m > 12 ||
        d < 1 || d > 31) {
        throw Error(Errc::InvalidArgument, "expected a date as YYYY-MM-DD, got '" + s + "'");
    }
    const std::int64_t local = days_from_civil(y, m, d) * kDayMs;
    return at_ms(local - static_cast<std::int64_t>(utc_offset_minutes) * 60'000);
}

void to_json(json& j, const ArchiveHeader& h)
{
    j = json{{"session_id", h.session_id}, {"token", h.token}, {"utc_offset_minutes", h.utc_offset_minutes}};
}

void from_json(const json& j, ArchiveHeader& h)
{
    h.session_id = j.at("session_id").get<std::string>();
    h.token = j.value("token", std::string{});
    h.utc_offset_minutes = j.value("utc_offset_minutes", 0);
}

void to_json(json& j, const InterruptionCounts& c)
{
    j = json{{"internal_deflected", c.internal_deflected},
             {"internal_voiding", c.internal_voiding},
             {"external_deflected", c.external_deflected},
             {"external_voiding", c.external_voiding}};
}

void from_json(const json& j, InterruptionCounts& c)
{
    c.internal_deflected = j.at("internal_deflected").get<int>();
    c.internal_voiding = j.at("internal_voiding").get<int>();
    c.external_deflected = j.at("external_deflected").get<int>();
    c.external_voiding = j.at("external_voiding").get<int>();
}

void to_json(json& j, const DailyRecord& r)
{
    j = json{{"date", r.date},
             {"session_id", r.session_id},
             {"events", r.events},
             {"completed", r.completed},
             {"voided", r.voided},
             {"interruptions", r.interruptions},
             {"marks", r.marks}};
}

void from_json(const json& j, DailyRecord& r)
{
    r.date = j.at("date").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.events = j.at("events").get<std::vector<LogEntry>>();
    r.completed = j.at("completed").get<int>();
    r.voided = j.at("voided").get<int>();
    r.interruptions = j.at("interruptions").get<InterruptionCounts>();
    r.marks = j.at("marks").get<std::vector<TrackMark>>();
}

void to_json(json& j, const JournalEntry& e)
{
    j = json{{"date", e.date},
             {"member_id", e.member_id},
             {"lines", e.lines},
             {"auto_summary", e.auto_summary},
             {"stories", e.stories}};
}

void from_json(const json& j, JournalEntry& e)
{
    e.date = j.at("date").get<std::string>();
    e.member_id = j.at("member_id").get<std::string>();
    e.lines = j.at("lines").get<std::vector<std::string>>();
    e.auto_summary = j.at("auto_summary").get<std::vector<std::string>>();
    e.stories = j.at("stories").get<std::vector<std::string>>();
}

ArchiveContents parse_archive(std::istream& in)
{
    ArchiveContents out;
    std::string text;
    std::size_t lineno = 0;
    while (std::getline(in, text)) {
        ++lineno;
        if (text.empty()) continue;
        auto corrupt = [&](const std::string& why) {
            throw Error(Errc::CorruptArchive, "archive line " + std::to_string(lineno) + ": " + why);
        };
        try {
            const json j = json::parse(text);
            if (!j.is_object()) corrupt("not a JSON object");
            const auto type = j.at("type").get<std::string>();
            const int schema = j.at("schema").get<int>();
            if (schema != kArchiveSchema) corrupt("unsupported schema " + std::to_string(schema));

            if (type == "header") {
                if (out.header) corrupt("second header");
                out.header = j.at("header").get<ArchiveHeader>();
            } else if (type == "event") {
                auto entry = j.at("entry").get<LogEntry>();
                const std::uint64_t expected = out.events.empty() ? 1 : out.events.back().seq + 1;
                if (entry.seq != expected) {
                    corrupt("event seq " + std::to_string(entry.seq) + " where " + std::to_string(expected) +
                            " was expected");
                }
                out.events.push_back(std::move(entry));
            } else if (type == "day") {
                auto record = j.at("record").get<DailyRecord>();
                out.days[record.date] = std::move(record);
            } else if (type == "journal") {
                auto entry = j.at("entry").get<JournalEntry>();
                out.journals[{entry.date, entry.member_id}] = std::move(entry);
            } else if (type == "audit") {
                out.audits.push_back(j);
            } else {
                corrupt("unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            corrupt(e.what());
        }
    }
    return out;
}

Archive Archive::open(const std::filesystem::path& path)
{
    auto state = std::make_shared<State>();
    state->path = path;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream touch(path, std::ios::app | std::ios::binary);
    if (!touch) throw Error(Errc::InvalidArgument, "cannot open archive " + path.string());
    return Archive(std::move(state));
}

Archive Archive::in_memory()
{
    return Archive(std::make_shared<State>());
}

void Archive::write(const std::string& lines)
{
    std::lock_guard lock(state_->mu);
    if (state_->path.empty()) {
        state_->memory += lines;
        return;
    }
    std::ofstream out(state_->path, std::ios::app | std::ios::binary);
    out << lines;
    out.flush();
    if (!out) throw Error(Errc::InvalidArgument, "failed to append to " + state_->path.string());
}

void Archive::append_header(const ArchiveHeader& header)
{
    json j = line("header");
    j["header"] = header;
    write(j.dump() + "\n");
}

void Archive::append_event(const LogEntry& entry)
{
    json j = line("event");
    j["entry"] = entry;
    write(j.dump() + "\n");
}

void Archive::append_day(const DailyRecord& record, const std::optional<json>& audit)
{
    json j = line("day");
    j["record"] = record;
    std::string out = j.dump() + "\n";
    if (audit) {
        json a = line("audit");
        a.update(*audit);
        out += a.dump() + "\n";
    }
    write(out);
}

void Archive::append_journal(const JournalEntry& entry, const std::optional<json>& audit)
{
    json j = line("journal");
    j["entry"] = entry;
    std::string out = j.dump() + "\n";
    if (audit) {
        json a = line("audit");
        a.update(*audit);
        out += a.dump() + "\n";
    }
    write(out);
}

std::string Archive::bytes() const
{
    std::lock_guard lock(state_->mu);
    if (state_->path.empty()) return state_->memory;
    std::ifstream in(state_->path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ArchiveContents Archive::load() const
{
    std::istringstream in(bytes());
    return parse_archive(in);
}

} // namespace pomo

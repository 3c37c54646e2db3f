#include "pomo/codec.hpp"

#include <array>
#include <utility>

namespace pomo {

namespace {

template <typename E, std::size_t N>
std::string enum_name(const std::array<std::pair<E, const char*>, N>& table, E value)
{
    for (const auto& [v, name] : table) {
        if (v == value) return name;
    }
    throw json::other_error::create(501, "enum value out of range", nullptr);
}

template <typename E, std::size_t N>
E enum_parse(const std::array<std::pair<E, const char*>, N>& table, const std::string& name)
{
    for (const auto& [v, n] : table) {
        if (name == n) return v;
    }
    throw json::other_error::create(501, "unknown enum name '" + name + "'", nullptr);
}

constexpr std::array<std::pair<Phase, const char*>, 4> kPhases{{
    {Phase::Idle, "Idle"}, {Phase::Work, "Work"}, {Phase::ShortBreak, "ShortBreak"}, {Phase::LongBreak, "LongBreak"}}};
constexpr std::array<std::pair<BreakKind, const char*>, 2> kBreaks{{{BreakKind::Short, "Short"}, {BreakKind::Long, "Long"}}};
constexpr std::array<std::pair<InterruptionKind, const char*>, 2> kInterruptions{
    {{InterruptionKind::Internal, "Internal"}, {InterruptionKind::External, "External"}}};
constexpr std::array<std::pair<Role, const char*>, 3> kRoles{
    {{Role::Developer, "Developer"}, {Role::Coach, "Coach"}, {Role::CustomerProxy, "CustomerProxy"}}};
constexpr std::array<std::pair<StoryStatus, const char*>, 3> kStatuses{
    {{StoryStatus::Planned, "Planned"}, {StoryStatus::InProgress, "InProgress"}, {StoryStatus::Done, "Done"}}};
constexpr std::array<std::pair<EstimateAdvice, const char*>, 4> kAdvice{{{EstimateAdvice::Ok, "Ok"},
                                                                        {EstimateAdvice::CombineSuggested, "CombineSuggested"},
                                                                        {EstimateAdvice::SplitSuggested, "SplitSuggested"},
                                                                        {EstimateAdvice::SplitRequired, "SplitRequired"}}};
constexpr std::array<std::pair<PomodoroOutcome, const char*>, 3> kOutcomes{{{PomodoroOutcome::Running, "Running"},
                                                                           {PomodoroOutcome::Completed, "Completed"},
                                                                           {PomodoroOutcome::Voided, "Voided"}}};
constexpr std::array<std::pair<TimerEvent::Kind, const char*>, 6> kTimerKinds{
    {{TimerEvent::Kind::Started, "Started"},
     {TimerEvent::Kind::WorkCompleted, "WorkCompleted"},
     {TimerEvent::Kind::BreakStarted, "BreakStarted"},
     {TimerEvent::Kind::BreakEnded, "BreakEnded"},
     {TimerEvent::Kind::Voided, "Voided"},
     {TimerEvent::Kind::InterruptionLogged, "InterruptionLogged"}}};

Timestamp ts(const json& j) { return at_ms(j.get<std::int64_t>()); }

} // namespace

std::string phase_name(Phase p) { return enum_name(kPhases, p); }
Phase parse_phase(const std::string& s) { return enum_parse(kPhases, s); }
Role parse_role(const std::string& s) { return enum_parse(kRoles, s); }
std::string role_name(Role r) { return enum_name(kRoles, r); }
InterruptionKind parse_interruption_kind(const std::string& s) { return enum_parse(kInterruptions, s); }
std::string interruption_kind_name(InterruptionKind k) { return enum_name(kInterruptions, k); }
StoryStatus parse_story_status(const std::string& s) { return enum_parse(kStatuses, s); }

void to_json(json& j, const TimerConfig& c)
{
    j = json{{"work_ms", c.work.count()},
             {"short_break_ms", c.short_break.count()},
             {"long_break_ms", c.long_break.count()},
             {"long_break_every", c.long_break_every}};
}

void from_json(const json& j, TimerConfig& c)
{
    c.work = Duration{j.at("work_ms").get<std::int64_t>()};
    c.short_break = Duration{j.at("short_break_ms").get<std::int64_t>()};
    c.long_break = Duration{j.at("long_break_ms").get<std::int64_t>()};
    c.long_break_every = j.at("long_break_every").get<int>();
}

void to_json(json& j, const PomodoroClock& c)
{
    j = json{{"config", c.config},
             {"phase", phase_name(c.phase)},
             {"phase_started_at", to_ms(c.phase_started_at)},
             {"phase_deadline", to_ms(c.phase_deadline)},
             {"consecutive_completed", c.consecutive_completed},
             {"total_completed_today", c.total_completed_today}};
}

void from_json(const json& j, PomodoroClock& c)
{
    c.config = j.at("config").get<TimerConfig>();
    c.phase = parse_phase(j.at("phase").get<std::string>());
    c.phase_started_at = ts(j.at("phase_started_at"));
    c.phase_deadline = ts(j.at("phase_deadline"));
    c.consecutive_completed = j.at("consecutive_completed").get<int>();
    c.total_completed_today = j.at("total_completed_today").get<int>();
}

void to_json(json& j, const Interruption& i)
{
    j = json{{"kind", interruption_kind_name(i.kind)},
             {"deflected", i.deflected},
             {"at", to_ms(i.at)},
             {"note", i.note},
             {"initiator", i.initiator}};
}

void from_json(const json& j, Interruption& i)
{
    i.kind = parse_interruption_kind(j.at("kind").get<std::string>());
    i.deflected = j.at("deflected").get<bool>();
    i.at = ts(j.at("at"));
    i.note = j.at("note").get<std::string>();
    i.initiator = j.at("initiator").get<std::string>();
}

void to_json(json& j, const TimerEvent& e)
{
    j = json{{"kind", enum_name(kTimerKinds, e.kind)}, {"at", to_ms(e.at)}};
    if (e.kind == TimerEvent::Kind::BreakStarted) j["break_kind"] = enum_name(kBreaks, e.break_kind);
    if (e.interruption) j["interruption"] = *e.interruption;
}

void from_json(const json& j, TimerEvent& e)
{
    e = TimerEvent{};
    e.kind = enum_parse(kTimerKinds, j.at("kind").get<std::string>());
    e.at = ts(j.at("at"));
    if (j.contains("break_kind")) e.break_kind = enum_parse(kBreaks, j.at("break_kind").get<std::string>());
    if (j.contains("interruption")) e.interruption = j.at("interruption").get<Interruption>();
}

void to_json(json& j, const Member& m)
{
    j = json{{"id", m.id}, {"display_name", m.display_name}, {"role", role_name(m.role)}, {"full_time", m.full_time}};
}

void from_json(const json& j, Member& m)
{
    m.id = j.at("id").get<std::string>();
    m.display_name = j.value("display_name", m.id);
    m.role = parse_role(j.value("role", std::string("Developer")));
    m.full_time = j.value("full_time", true);
}

void to_json(json& j, const Pairing& p)
{
    json pairs = json::array();
    for (const auto& [a, b] : p.pairs) pairs.push_back(json::array({a, b}));
    j = json{{"pairs", pairs}, {"solo", p.solo}};
}

void from_json(const json& j, Pairing& p)
{
    p.pairs.clear();
    for (const auto& pr : j.at("pairs")) {
        if (!pr.is_array() || pr.size() != 2) throw json::type_error::create(302, "pair must have two members", nullptr);
        p.pairs.emplace_back(pr[0].get<std::string>(), pr[1].get<std::string>());
    }
    p.solo = j.at("solo").get<std::vector<std::string>>();
}

void to_json(json& j, const Story& s)
{
    j = json{{"id", s.id},
             {"title", s.title},
             {"estimate", s.estimate.units},
             {"tracked", s.tracked},
             {"status", enum_name(kStatuses, s.status)},
             {"iteration_id", s.iteration_id}};
    if (!s.legacy_points.empty()) j["legacy_points"] = s.legacy_points;
}

void from_json(const json& j, Story& s)
{
    s.id = j.at("id").get<std::string>();
    s.title = j.at("title").get<std::string>();
    s.estimate = Effort{j.at("estimate").get<std::int64_t>()};
    s.tracked = j.at("tracked").get<bool>();
    s.status = parse_story_status(j.at("status").get<std::string>());
    s.iteration_id = j.at("iteration_id").get<std::string>();
    s.legacy_points = j.value("legacy_points", std::string{});
}

void to_json(json& j, const TrackMark& m)
{
    j = json{{"story_id", m.story_id},
             {"pomodoro_seq", m.pomodoro_seq},
             {"ptype", m.ptype},
             {"effort", m.effort.units},
             {"owner", m.owner},
             {"at", to_ms(m.at)}};
}

void from_json(const json& j, TrackMark& m)
{
    m.story_id = j.at("story_id").get<std::string>();
    m.pomodoro_seq = j.at("pomodoro_seq").get<std::uint64_t>();
    m.ptype = j.at("ptype").get<std::string>();
    m.effort = Effort{j.at("effort").get<std::int64_t>()};
    m.owner = j.at("owner").get<std::string>();
    m.at = ts(j.at("at"));
}

void to_json(json& j, const EstimationRules& r)
{
    j = json{{"split_suggested_above", r.split_suggested_above},
             {"split_required_above", r.split_required_above},
             {"combine_below", r.combine_below}};
}

void from_json(const json& j, EstimationRules& r)
{
    r.split_suggested_above = j.at("split_suggested_above").get<std::int64_t>();
    r.split_required_above = j.at("split_required_above").get<std::int64_t>();
    r.combine_below = j.at("combine_below").get<std::int64_t>();
}

struct LedgerCodec
{
    static void write(json& j, const Ledger& l)
    {
        json pomodoros = json::array();
        for (const auto& [seq, outcome] : l.pomodoros_) {
            pomodoros.push_back(json{{"seq", seq}, {"outcome", enum_name(kOutcomes, outcome)}});
        }
        j = json{{"stories", l.stories_},
                 {"marks", l.marks_},
                 {"types", l.types_},
                 {"pomodoros", pomodoros},
                 {"rules", l.rules_}};
    }

    static void read(const json& j, Ledger& l)
    {
        l.stories_ = j.at("stories").get<std::vector<Story>>();
        l.marks_ = j.at("marks").get<std::vector<TrackMark>>();
        l.types_ = j.at("types").get<std::vector<std::string>>();
        l.pomodoros_.clear();
        for (const auto& p : j.at("pomodoros")) {
            l.pomodoros_[p.at("seq").get<std::uint64_t>()] = enum_parse(kOutcomes, p.at("outcome").get<std::string>());
        }
        l.rules_ = j.at("rules").get<EstimationRules>();
    }
};

void to_json(json& j, const Ledger& l) { LedgerCodec::write(j, l); }
void from_json(const json& j, Ledger& l) { LedgerCodec::read(j, l); }

namespace {

struct EventWriter
{
    json& j;

    void operator()(const ev::Created& e)
    {
        j["session_id"] = e.session_id;
        j["config"] = e.config;
        j["creator"] = e.creator;
        j["rules"] = e.rules;
    }
    void operator()(const ev::MemberJoined& e)
    {
        j["member"] = e.member;
        j["observer"] = e.observer;
    }
    void operator()(const ev::MemberLeft& e) { j["member_id"] = e.member_id; }
    void operator()(const ev::ReadyDeclared& e) { j["member_id"] = e.member_id; }
    void operator()(const ev::Started& e)
    {
        j["initiator"] = e.initiator;
        j["coach_override"] = e.coach_override;
        j["participants"] = e.participants;
    }
    void operator()(const ev::WorkCompleted&) {}
    void operator()(const ev::BreakStarted& e) { j["break_kind"] = enum_name(kBreaks, e.kind); }
    void operator()(const ev::BreakEnded&) {}
    void operator()(const ev::InterruptionLogged& e) { j["interruption"] = e.interruption; }
    void operator()(const ev::Voided& e) { j["interruption"] = e.interruption; }
    void operator()(const ev::PairsRotated& e)
    {
        j["round"] = e.round;
        j["pairing"] = e.pairing;
    }
    void operator()(const ev::DayRolled&) {}
    void operator()(const ev::StoryUpserted& e) { j["story"] = e.story; }
    void operator()(const ev::StoryEstimated& e)
    {
        j["story_id"] = e.story_id;
        j["estimate"] = e.estimate.units;
        j["advice"] = enum_name(kAdvice, e.advice);
    }
    void operator()(const ev::StoryStatusChanged& e)
    {
        j["story_id"] = e.story_id;
        j["status"] = enum_name(kStatuses, e.status);
    }
    void operator()(const ev::MarkTracked& e) { j["mark"] = e.mark; }
};

SessionEvent read_event(const json& j)
{
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "Created") {
        return ev::Created{j.at("session_id").get<std::string>(), j.at("config").get<TimerConfig>(),
                           j.at("creator").get<Member>(),
                           j.contains("rules") ? j.at("rules").get<EstimationRules>() : EstimationRules{}};
    }
    if (kind == "MemberJoined") return ev::MemberJoined{j.at("member").get<Member>(), j.at("observer").get<bool>()};
    if (kind == "MemberLeft") return ev::MemberLeft{j.at("member_id").get<std::string>()};
    if (kind == "ReadyDeclared") return ev::ReadyDeclared{j.at("member_id").get<std::string>()};
    if (kind == "Started") {
        return ev::Started{j.at("initiator").get<std::string>(), j.at("coach_override").get<bool>(),
                           j.at("participants").get<Pairing>()};
    }
    if (kind == "WorkCompleted") return ev::WorkCompleted{};
    if (kind == "BreakStarted") return ev::BreakStarted{enum_parse(kBreaks, j.at("break_kind").get<std::string>())};
    if (kind == "BreakEnded") return ev::BreakEnded{};
    if (kind == "InterruptionLogged") return ev::InterruptionLogged{j.at("interruption").get<Interruption>()};
    if (kind == "Voided") return ev::Voided{j.at("interruption").get<Interruption>()};
    if (kind == "PairsRotated") return ev::PairsRotated{j.at("round").get<int>(), j.at("pairing").get<Pairing>()};
    if (kind == "DayRolled") return ev::DayRolled{};
    if (kind == "StoryUpserted") return ev::StoryUpserted{j.at("story").get<Story>()};
    if (kind == "StoryEstimated") {
        return ev::StoryEstimated{j.at("story_id").get<std::string>(), Effort{j.at("estimate").get<std::int64_t>()},
                                  enum_parse(kAdvice, j.at("advice").get<std::string>())};
    }
    if (kind == "StoryStatusChanged") {
        return ev::StoryStatusChanged{j.at("story_id").get<std::string>(),
                                      parse_story_status(j.at("status").get<std::string>())};
    }
    if (kind == "MarkTracked") return ev::MarkTracked{j.at("mark").get<TrackMark>()};
    throw json::other_error::create(501, "unknown event kind '" + kind + "'", nullptr);
}

} // namespace

void to_json(json& j, const LogEntry& e)
{
    j = json{{"seq", e.seq}, {"at", to_ms(e.at)}, {"kind", event_name(e.event)}};
    std::visit(EventWriter{j}, e.event);
}

void from_json(const json& j, LogEntry& e)
{
    e.seq = j.at("seq").get<std::uint64_t>();
    e.at = ts(j.at("at"));
    e.event = read_event(j);
}

void to_json(json& j, const SessionState& s)
{
    j = json{{"session_id", s.session_id},
             {"clock", s.clock},
             {"members", s.members},
             {"observers", s.observers},
             {"ready", s.ready},
             {"rotation_round", s.rotation_round},
             {"pairing", s.pairing},
             {"participants", s.participants},
             {"current_pomodoro_seq", s.current_pomodoro_seq},
             {"ledger", s.ledger},
             {"event_log", s.event_log}};
}

void from_json(const json& j, SessionState& s)
{
    s.session_id = j.at("session_id").get<std::string>();
    s.clock = j.at("clock").get<PomodoroClock>();
    s.members = j.at("members").get<std::vector<Member>>();
    s.observers = j.at("observers").get<std::set<std::string>>();
    s.ready = j.at("ready").get<std::set<std::string>>();
    s.rotation_round = j.at("rotation_round").get<int>();
    s.pairing = j.at("pairing").get<Pairing>();
    s.participants = j.at("participants").get<Pairing>();
    s.current_pomodoro_seq = j.at("current_pomodoro_seq").get<std::uint64_t>();
    s.ledger = j.at("ledger").get<Ledger>();
    s.event_log = j.at("event_log").get<std::vector<LogEntry>>();
}

} // namespace pomo

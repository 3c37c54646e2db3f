#include "pomo/session.hpp"

#include "pomo/error.hpp"

#include <algorithm>
#include <type_traits>

namespace pomo {

Pairing round_robin_pairing(std::span<const std::string> ordered_ids, int round)
{
    Pairing out;
    const std::size_t n = ordered_ids.size();
    if (n == 0) return out;

    // Indices into ordered_ids; -1 is the bye slot.
    std::vector<long> slots(n);
    for (std::size_t i = 0; i < n; ++i) slots[i] = static_cast<long>(i);
    if (n % 2 == 1) slots.push_back(-1);
    const std::size_t m = slots.size();
    const std::size_t period = m - 1;
    const std::size_t shift = static_cast<std::size_t>(round < 0 ? 0 : round) % period;

    std::vector<long> arranged(m);
    arranged[0] = slots[0];
    for (std::size_t i = 0; i < period; ++i) arranged[1 + i] = slots[1 + (i + shift) % period];

    auto emit = [&](long a, long b) {
        if (a < 0 || b < 0) {
            out.solo.push_back(ordered_ids[static_cast<std::size_t>(a < 0 ? b : a)]);
            return;
        }
        if (a > b) std::swap(a, b);
        out.pairs.emplace_back(ordered_ids[static_cast<std::size_t>(a)], ordered_ids[static_cast<std::size_t>(b)]);
    };
    emit(arranged[0], arranged[1]);
    for (std::size_t k = 1; k < m / 2; ++k) emit(arranged[1 + k], arranged[m - k]);
    return out;
}

std::optional<std::string> pair_key(const Pairing& pairing, std::string_view member_id)
{
    for (const auto& [a, b] : pairing.pairs) {
        if (a == member_id || b == member_id) return a + "+" + b;
    }
    for (const auto& s : pairing.solo) {
        if (s == member_id) return s;
    }
    return std::nullopt;
}

const char* event_name(const SessionEvent& event)
{
    return std::visit(
        [](const auto& e) -> const char* {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, ev::Created>) return "Created";
            else if constexpr (std::is_same_v<T, ev::MemberJoined>) return "MemberJoined";
            else if constexpr (std::is_same_v<T, ev::MemberLeft>) return "MemberLeft";
            else if constexpr (std::is_same_v<T, ev::ReadyDeclared>) return "ReadyDeclared";
            else if constexpr (std::is_same_v<T, ev::Started>) return "Started";
            else if constexpr (std::is_same_v<T, ev::WorkCompleted>) return "WorkCompleted";
            else if constexpr (std::is_same_v<T, ev::BreakStarted>) return "BreakStarted";
            else if constexpr (std::is_same_v<T, ev::BreakEnded>) return "BreakEnded";
            else if constexpr (std::is_same_v<T, ev::InterruptionLogged>) return "InterruptionLogged";
            else if constexpr (std::is_same_v<T, ev::Voided>) return "Voided";
            else if constexpr (std::is_same_v<T, ev::PairsRotated>) return "PairsRotated";
            else if constexpr (std::is_same_v<T, ev::DayRolled>) return "DayRolled";
            else if constexpr (std::is_same_v<T, ev::StoryUpserted>) return "StoryUpserted";
            else if constexpr (std::is_same_v<T, ev::StoryEstimated>) return "StoryEstimated";
            else if constexpr (std::is_same_v<T, ev::StoryStatusChanged>) return "StoryStatusChanged";
            else return "MarkTracked";
        },
        event);
}

const Member* SessionState::find_member(std::string_view id) const
{
    auto it = std::find_if(members.begin(), members.end(), [&](const Member& m) { return m.id == id; });
    return it == members.end() ? nullptr : &*it;
}

bool SessionState::is_active(std::string_view id) const
{
    return find_member(id) != nullptr && !observers.contains(std::string(id));
}

std::vector<std::string> SessionState::active_ids() const
{
    std::vector<std::string> ids;
    for (const auto& m : members) {
        if (!observers.contains(m.id)) ids.push_back(m.id);
    }
    return ids;
}

namespace {

Timestamp last_at(const SessionState& s)
{
    return s.event_log.empty() ? Timestamp{} : s.event_log.back().at;
}

LogEntry& append(SessionState& s, Appended& out, Timestamp at, SessionEvent event)
{
    s.event_log.push_back(LogEntry{s.last_seq() + 1, at, std::move(event)});
    out.push_back(s.event_log.back());
    return s.event_log.back();
}

void refresh_pairing(SessionState& s)
{
    const auto ids = s.active_ids();
    s.pairing = round_robin_pairing(ids, s.rotation_round);
}

void promote_observers(SessionState& s)
{
    s.observers.clear();
    refresh_pairing(s);
}

void check_time(const SessionState& s, Timestamp now)
{
    if (now < last_at(s)) throw Error(Errc::InvalidArgument, "time went backwards");
}

const Member& require_member(const SessionState& s, std::string_view id)
{
    const Member* m = s.find_member(id);
    if (!m) throw Error(Errc::UnknownMember, "no member " + std::string(id));
    return *m;
}

std::string join_ids(const std::vector<std::string>& ids)
{
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += ",";
        out += id;
    }
    return out;
}

// Translates timer-core events of the live path into session log entries.
void append_timer_events(SessionState& s, Appended& out, const std::vector<TimerEvent>& events)
{
    for (const auto& e : events) {
        switch (e.kind) {
        case TimerEvent::Kind::Started:
            break; // carries session data; appended by start_shared
        case TimerEvent::Kind::WorkCompleted:
            s.ledger.note_pomodoro(s.current_pomodoro_seq, PomodoroOutcome::Completed);
            s.current_pomodoro_seq = 0;
            append(s, out, e.at, ev::WorkCompleted{});
            break;
        case TimerEvent::Kind::BreakStarted:
            s.ready.clear();
            append(s, out, e.at, ev::BreakStarted{e.break_kind});
            break;
        case TimerEvent::Kind::BreakEnded:
            s.ready.clear();
            promote_observers(s);
            append(s, out, e.at, ev::BreakEnded{});
            break;
        case TimerEvent::Kind::Voided:
            s.ledger.note_pomodoro(s.current_pomodoro_seq, PomodoroOutcome::Voided);
            s.current_pomodoro_seq = 0;
            s.ready.clear();
            promote_observers(s);
            append(s, out, e.at, ev::Voided{*e.interruption});
            break;
        case TimerEvent::Kind::InterruptionLogged:
            append(s, out, e.at, ev::InterruptionLogged{*e.interruption});
            break;
        }
    }
}

} // namespace

SessionState create_session(std::string session_id, const TimerConfig& config, const Member& creator, Timestamp now,
                            const EstimationRules& rules)
{
    validate(config);
    if (creator.id.empty()) throw Error(Errc::InvalidArgument, "member id must not be empty");
    SessionState s;
    s.session_id = std::move(session_id);
    s.clock = make_clock(config);
    s.members.push_back(creator);
    s.ledger.set_rules(rules);
    refresh_pairing(s);
    Appended ignored;
    append(s, ignored, now, ev::Created{s.session_id, config, creator, rules});
    return s;
}

Appended advance_session(SessionState& state, Timestamp now)
{
    check_time(state, now);
    Appended out;
    Step step = pomo::advance(state.clock, now);
    state.clock = step.clock;
    append_timer_events(state, out, step.events);
    return out;
}

Appended join(SessionState& state, const Member& member, Timestamp now)
{
    Appended out = advance_session(state, now);
    if (member.id.empty()) throw Error(Errc::InvalidArgument, "member id must not be empty");
    if (state.find_member(member.id)) throw Error(Errc::DuplicateMember, "member " + member.id + " already joined");

    const bool observer = state.clock.phase == Phase::Work;
    state.members.push_back(member);
    if (observer) {
        state.observers.insert(member.id);
    } else {
        refresh_pairing(state);
    }
    append(state, out, now, ev::MemberJoined{member, observer});
    return out;
}

Appended leave(SessionState& state, std::string_view member_id, Timestamp now)
{
    Appended out = advance_session(state, now);
    require_member(state, member_id);
    const std::string id(member_id);

    if (state.clock.phase == Phase::Work && !state.observers.contains(id)) {
        Interruption i{InterruptionKind::Internal, true, now, "left the session", id};
        Step step = log_interruption(state.clock, i);
        state.clock = step.clock;
        append_timer_events(state, out, step.events);
    }
    std::erase_if(state.members, [&](const Member& m) { return m.id == id; });
    state.observers.erase(id);
    state.ready.erase(id);
    refresh_pairing(state);
    append(state, out, now, ev::MemberLeft{id});
    return out;
}

Appended declare_ready(SessionState& state, std::string_view member_id, Timestamp now)
{
    Appended out = advance_session(state, now);
    if (state.clock.phase != Phase::Idle) {
        throw Error(Errc::NotIdle, std::string("readiness is only collected while idle, phase is ") +
                                       to_string(state.clock.phase));
    }
    require_member(state, member_id);
    state.ready.insert(std::string(member_id));
    append(state, out, now, ev::ReadyDeclared{std::string(member_id)});
    return out;
}

Appended start_shared(SessionState& state, std::string_view initiator, Timestamp now)
{
    Appended out = advance_session(state, now);
    if (state.clock.phase != Phase::Idle) {
        throw Error(Errc::NotIdle, std::string("a shared start needs an idle clock, phase is ") +
                                       to_string(state.clock.phase));
    }
    const Member& who = require_member(state, initiator);

    std::vector<std::string> missing;
    for (const auto& id : state.active_ids()) {
        if (!state.ready.contains(id)) missing.push_back(id);
    }
    const bool coach_override = !missing.empty() && who.role == Role::Coach;
    if (!missing.empty() && !coach_override) {
        throw Error(Errc::NotAllReady, "waiting for: " + join_ids(missing));
    }

    Step step = start_pomodoro(state.clock, now);
    state.clock = step.clock;
    state.ready.clear();
    state.participants = state.pairing;
    const LogEntry& e = append(state, out, now, ev::Started{std::string(initiator), coach_override, state.participants});
    state.current_pomodoro_seq = e.seq;
    state.ledger.note_pomodoro(e.seq, PomodoroOutcome::Running);
    return out;
}

Appended interrupt_shared(SessionState& state, const Interruption& interruption)
{
    Appended out = advance_session(state, interruption.at);
    require_member(state, interruption.initiator);
    Step step = log_interruption(state.clock, interruption);
    state.clock = step.clock;
    append_timer_events(state, out, step.events);
    return out;
}

Appended void_shared(SessionState& state, Interruption interruption)
{
    interruption.deflected = false;
    return interrupt_shared(state, interruption);
}

Appended rotate_pairs(SessionState& state, Timestamp now)
{
    Appended out = advance_session(state, now);
    if (state.clock.phase == Phase::Work) throw Error(Errc::RotateDuringWork, "pairs rotate only at breaks or while idle");
    state.rotation_round += 1;
    refresh_pairing(state);
    append(state, out, now, ev::PairsRotated{state.rotation_round, state.pairing});
    return out;
}

Appended roll_day(SessionState& state, Timestamp now)
{
    Appended out = advance_session(state, now);
    state.clock = roll_day(state.clock);
    append(state, out, now, ev::DayRolled{});
    return out;
}

Appended upsert_story(SessionState& state, const Story& story, Timestamp now)
{
    Appended out = advance_session(state, now);
    state.ledger.upsert_story(story);
    append(state, out, now, ev::StoryUpserted{story});
    return out;
}

Appended set_story_status(SessionState& state, std::string_view story_id, StoryStatus status, Timestamp now)
{
    Appended out = advance_session(state, now);
    state.ledger.set_status(story_id, status);
    append(state, out, now, ev::StoryStatusChanged{std::string(story_id), status});
    return out;
}

EstimateOutcome estimate(SessionState& state, std::string_view story_id, Effort units, std::string_view title,
                         std::string_view iteration_id, Timestamp now)
{
    EstimateOutcome result;
    result.appended = advance_session(state, now);

    const Story* existing = state.ledger.find_story(story_id);
    Story story;
    if (existing) {
        story = *existing;
    } else {
        story.id = std::string(story_id);
        story.title = title.empty() ? story.id : std::string(title);
        if (!iteration_id.empty()) {
            story.iteration_id = std::string(iteration_id);
        } else if (!state.ledger.stories().empty()) {
            story.iteration_id = state.ledger.stories().back().iteration_id;
        } else {
            story.iteration_id = "backlog";
        }
    }

    // Validates without storing anything.
    const EstimateResult probe = estimate_story(story, units, state.ledger.rules());
    if (probe.advice == EstimateAdvice::SplitRequired) {
        throw Error(Errc::SplitRequired, "story " + story.id + " estimated at " + render_pomodoros(units) +
                                             " pomodoros exceeds " +
                                             render_pomodoros(Effort{state.ledger.rules().split_required_above}) +
                                             "; break it down into smaller stories");
    }

    if (!existing) {
        state.ledger.upsert_story(story);
        append(state, result.appended, now, ev::StoryUpserted{story});
    }
    result.advice = state.ledger.estimate(story.id, units).advice;
    append(state, result.appended, now, ev::StoryEstimated{story.id, units, result.advice});
    return result;
}

Appended track(SessionState& state, std::string_view member_id, std::string_view story_id, std::string_view ptype,
               Effort effort, std::optional<std::uint64_t> pomodoro_seq, Timestamp now)
{
    Appended out = advance_session(state, now);
    require_member(state, member_id);

    if (!pomodoro_seq) {
        pomodoro_seq = state.ledger.last_completed_pomodoro();
        if (!pomodoro_seq) throw Error(Errc::PomodoroNotCompleted, "no completed pomodoro to track against yet");
    }

    TrackMark mark;
    mark.story_id = std::string(story_id);
    mark.pomodoro_seq = *pomodoro_seq;
    mark.ptype = std::string(ptype);
    mark.effort = effort;
    mark.owner = std::string(member_id);
    mark.at = now;
    const std::uint64_t seq = *pomodoro_seq;
    if (seq >= 1 && seq <= state.event_log.size()) {
        if (const auto* started = std::get_if<ev::Started>(&state.event_log[seq - 1].event)) {
            if (auto key = pair_key(started->participants, member_id)) mark.owner = *key;
        }
    }

    state.ledger.track(mark);
    append(state, out, now, ev::MarkTracked{state.ledger.marks().back()});
    return out;
}

// ---------------------------------------------------------------------------
// Replay path

namespace {

struct Applier
{
    SessionState& s;
    const LogEntry& entry;

    [[noreturn]] void bad(const std::string& why) const
    {
        throw Error(Errc::InvalidHistory, "entry #" + std::to_string(entry.seq) + " (" + event_name(entry.event) +
                                              "): " + why);
    }

    void require_phase(bool ok, const char* what) const
    {
        if (!ok) bad(std::string(what) + " in phase " + to_string(s.clock.phase));
    }

    void operator()(const ev::Created& e)
    {
        if (!s.event_log.empty()) bad("Created must be the first entry");
        s.session_id = e.session_id;
        s.clock = make_clock(e.config);
        s.members = {e.creator};
        s.ledger.set_rules(e.rules);
        refresh_pairing(s);
    }

    void operator()(const ev::MemberJoined& e)
    {
        if (s.find_member(e.member.id)) bad("duplicate member " + e.member.id);
        if (e.observer != (s.clock.phase == Phase::Work)) bad("observer flag does not match phase");
        s.members.push_back(e.member);
        if (e.observer) {
            s.observers.insert(e.member.id);
        } else {
            refresh_pairing(s);
        }
    }

    void operator()(const ev::MemberLeft& e)
    {
        if (!s.find_member(e.member_id)) bad("unknown member " + e.member_id);
        std::erase_if(s.members, [&](const Member& m) { return m.id == e.member_id; });
        s.observers.erase(e.member_id);
        s.ready.erase(e.member_id);
        refresh_pairing(s);
    }

    void operator()(const ev::ReadyDeclared& e)
    {
        require_phase(s.clock.phase == Phase::Idle, "ready");
        if (!s.find_member(e.member_id)) bad("unknown member " + e.member_id);
        s.ready.insert(e.member_id);
    }

    void operator()(const ev::Started& e)
    {
        require_phase(s.clock.phase == Phase::Idle, "start");
        if (e.participants != s.pairing) bad("participant snapshot differs from the current pairing");
        s.clock.phase = Phase::Work;
        s.clock.phase_started_at = entry.at;
        s.clock.phase_deadline = entry.at + s.clock.config.work;
        s.ready.clear();
        s.participants = e.participants;
        s.current_pomodoro_seq = entry.seq;
        s.ledger.note_pomodoro(entry.seq, PomodoroOutcome::Running);
    }

    void operator()(const ev::WorkCompleted&)
    {
        require_phase(s.clock.phase == Phase::Work, "completion");
        if (entry.at != s.clock.phase_deadline) bad("completion not at the work deadline");
        s.clock.total_completed_today += 1;
        s.clock.consecutive_completed += 1;
        s.ledger.note_pomodoro(s.current_pomodoro_seq, PomodoroOutcome::Completed);
        s.current_pomodoro_seq = 0;
    }

    void operator()(const ev::BreakStarted& e)
    {
        // Follows WorkCompleted, which leaves the clock in Work past its deadline.
        require_phase(s.clock.phase == Phase::Work && s.current_pomodoro_seq == 0, "break start");
        const bool long_due = s.clock.consecutive_completed >= s.clock.config.long_break_every;
        if ((e.kind == BreakKind::Long) != long_due) bad("break kind does not follow the cadence");
        if (long_due) s.clock.consecutive_completed = 0;
        s.clock.phase = e.kind == BreakKind::Long ? Phase::LongBreak : Phase::ShortBreak;
        s.clock.phase_started_at = entry.at;
        s.clock.phase_deadline = entry.at + break_duration(s.clock.config, e.kind);
        s.ready.clear();
    }

    void operator()(const ev::BreakEnded&)
    {
        require_phase(s.clock.phase == Phase::ShortBreak || s.clock.phase == Phase::LongBreak, "break end");
        if (entry.at != s.clock.phase_deadline) bad("break end not at the break deadline");
        to_idle();
    }

    void operator()(const ev::InterruptionLogged& e)
    {
        require_phase(s.clock.phase == Phase::Work && s.current_pomodoro_seq != 0, "interruption");
        if (!e.interruption.deflected) bad("a logged interruption must be deflected");
    }

    void operator()(const ev::Voided& e)
    {
        require_phase(s.clock.phase == Phase::Work && s.current_pomodoro_seq != 0, "void");
        if (e.interruption.deflected) bad("a deflected interruption cannot void");
        s.ledger.note_pomodoro(s.current_pomodoro_seq, PomodoroOutcome::Voided);
        s.current_pomodoro_seq = 0;
        to_idle();
    }

    void operator()(const ev::PairsRotated& e)
    {
        require_phase(s.clock.phase != Phase::Work, "rotation");
        s.rotation_round = e.round;
        refresh_pairing(s);
        if (s.pairing != e.pairing) bad("rotated pairing does not match the round-robin schedule");
    }

    void operator()(const ev::DayRolled&) { s.clock.total_completed_today = 0; }

    void operator()(const ev::StoryUpserted& e) { ledger([&] { s.ledger.upsert_story(e.story); }); }

    void operator()(const ev::StoryEstimated& e)
    {
        ledger([&] {
            const auto r = s.ledger.estimate(e.story_id, e.estimate);
            if (r.advice != e.advice) bad("recorded advice differs");
        });
    }

    void operator()(const ev::StoryStatusChanged& e) { ledger([&] { s.ledger.set_status(e.story_id, e.status); }); }

    void operator()(const ev::MarkTracked& e) { ledger([&] { s.ledger.track(e.mark); }); }

    template <typename F>
    void ledger(F&& f)
    {
        try {
            f();
        } catch (const Error& err) {
            if (err.code() == Errc::InvalidHistory) throw;
            bad(err.what());
        }
    }

    void to_idle()
    {
        s.clock.phase = Phase::Idle;
        s.clock.phase_started_at = Timestamp{};
        s.clock.phase_deadline = Timestamp{};
        s.ready.clear();
        promote_observers(s);
    }
};

} // namespace

void apply(SessionState& state, const LogEntry& entry)
{
    if (entry.seq != state.last_seq() + 1) {
        throw Error(Errc::InvalidHistory, "entry #" + std::to_string(entry.seq) + " breaks contiguity after #" +
                                              std::to_string(state.last_seq()));
    }
    if (entry.at < last_at(state)) {
        throw Error(Errc::InvalidHistory, "entry #" + std::to_string(entry.seq) + " goes back in time");
    }
    if ((entry.seq == 1) != std::holds_alternative<ev::Created>(entry.event)) {
        throw Error(Errc::InvalidHistory,
                    "entry #" + std::to_string(entry.seq) + ": Created must be the first entry and only the first");
    }
    std::visit(Applier{state, entry}, entry.event);
    state.event_log.push_back(entry);
}

SessionState replay_session(std::span<const LogEntry> log)
{
    SessionState s;
    for (const auto& entry : log) apply(s, entry);
    return s;
}

const char* to_string(Role role)
{
    switch (role) {
    case Role::Developer: return "Developer";
    case Role::Coach: return "Coach";
    case Role::CustomerProxy: return "CustomerProxy";
    }
    return "?";
}

} // namespace pomo

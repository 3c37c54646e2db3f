#include "pomo/timer.hpp"

#include "pomo/error.hpp"

#include <algorithm>
#include <string>

namespace pomo {

using namespace std::chrono_literals;

void validate(const TimerConfig& config)
{
    auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
    if (config.work < 20min || config.work > 45min) {
        fail("work duration must lie within 20..45 minutes, got " +
             std::to_string(config.work.count()) + " ms");
    }
    if (config.short_break < 1min) fail("short break must be at least 1 minute");
    if (config.long_break < config.short_break) fail("long break must not be shorter than the short break");
    if (config.long_break_every < 2) fail("long_break_every must be at least 2");
}

Duration break_duration(const TimerConfig& config, BreakKind kind)
{
    return kind == BreakKind::Long ? config.long_break : config.short_break;
}

PomodoroClock make_clock(const TimerConfig& config)
{
    PomodoroClock clock;
    clock.config = config;
    return clock;
}

namespace {

TimerEvent event(TimerEvent::Kind kind, Timestamp at)
{
    TimerEvent e;
    e.kind = kind;
    e.at = at;
    return e;
}

void enter_idle(PomodoroClock& clock)
{
    clock.phase = Phase::Idle;
    clock.phase_started_at = Timestamp{};
    clock.phase_deadline = Timestamp{};
}

} // namespace

Step start_pomodoro(const PomodoroClock& clock, Timestamp now)
{
    if (clock.phase != Phase::Idle) {
        throw Error(Errc::StartWhileActive,
                    std::string("cannot start a pomodoro while in ") + to_string(clock.phase));
    }
    Step step{clock, {}};
    step.clock.phase = Phase::Work;
    step.clock.phase_started_at = now;
    step.clock.phase_deadline = now + clock.config.work;
    step.events.push_back(event(TimerEvent::Kind::Started, now));
    return step;
}

Step advance(const PomodoroClock& clock, Timestamp now)
{
    Step step{clock, {}};
    auto& c = step.clock;

    if (c.phase == Phase::Work && now >= c.phase_deadline) {
        const Timestamp done = c.phase_deadline;
        step.events.push_back(event(TimerEvent::Kind::WorkCompleted, done));
        ++c.total_completed_today;
        ++c.consecutive_completed;

        BreakKind kind = BreakKind::Short;
        if (c.consecutive_completed >= c.config.long_break_every) {
            kind = BreakKind::Long;
            c.consecutive_completed = 0;
        }
        c.phase = kind == BreakKind::Long ? Phase::LongBreak : Phase::ShortBreak;
        c.phase_started_at = done;
        c.phase_deadline = done + break_duration(c.config, kind);

        auto started = event(TimerEvent::Kind::BreakStarted, done);
        started.break_kind = kind;
        step.events.push_back(started);
    }

    if ((c.phase == Phase::ShortBreak || c.phase == Phase::LongBreak) && now >= c.phase_deadline) {
        step.events.push_back(event(TimerEvent::Kind::BreakEnded, c.phase_deadline));
        enter_idle(c);
    }
    return step;
}

Step log_interruption(const PomodoroClock& clock, const Interruption& interruption)
{
    if (clock.phase != Phase::Work) {
        throw Error(Errc::InterruptOutsideWork,
                    std::string("interruptions only apply during work, phase is ") + to_string(clock.phase));
    }
    if (interruption.at >= clock.phase_deadline) {
        throw Error(Errc::InterruptOutsideWork, "the pomodoro already reached its deadline");
    }

    Step step{clock, {}};
    auto e = event(interruption.deflected ? TimerEvent::Kind::InterruptionLogged : TimerEvent::Kind::Voided,
                   interruption.at);
    e.interruption = interruption;
    step.events.push_back(e);
    if (!interruption.deflected) enter_idle(step.clock);
    return step;
}

Duration remaining(const PomodoroClock& clock, Timestamp now)
{
    if (clock.phase == Phase::Idle) throw Error(Errc::NoActivePhase, "the clock is idle");
    return std::max(Duration::zero(), clock.phase_deadline - now);
}

PomodoroClock roll_day(PomodoroClock clock)
{
    clock.total_completed_today = 0;
    return clock;
}

PomodoroClock replay(std::span<const TimerEvent> events, const TimerConfig& config)
{
    PomodoroClock c = make_clock(config);
    Timestamp last{};

    for (std::size_t i = 0; i < events.size(); ++i) {
        const TimerEvent& e = events[i];
        auto bad = [&](const std::string& why) {
            throw Error(Errc::InvalidHistory, "event #" + std::to_string(i) + " (" + to_string(e.kind) +
                                                  " at " + std::to_string(to_ms(e.at)) + "): " + why);
        };
        if (i > 0 && e.at < last) bad("timestamp goes backwards");
        last = e.at;

        switch (e.kind) {
        case TimerEvent::Kind::Started:
            if (c.phase != Phase::Idle) bad("start while a phase is active");
            c.phase = Phase::Work;
            c.phase_started_at = e.at;
            c.phase_deadline = e.at + config.work;
            break;

        case TimerEvent::Kind::WorkCompleted: {
            if (c.phase != Phase::Work) bad("completion outside work");
            if (e.at != c.phase_deadline) bad("completion not at the work deadline");
            if (i + 1 >= events.size() || events[i + 1].kind != TimerEvent::Kind::BreakStarted) {
                bad("completion must be followed by a break start");
            }
            const TimerEvent& brk = events[i + 1];
            if (brk.at != e.at) bad("break must start at the completion instant");
            const int next = c.consecutive_completed + 1;
            const BreakKind expected = next >= config.long_break_every ? BreakKind::Long : BreakKind::Short;
            if (brk.break_kind != expected) bad("break kind does not follow the cadence");
            c.total_completed_today += 1;
            c.consecutive_completed = expected == BreakKind::Long ? 0 : next;
            c.phase = expected == BreakKind::Long ? Phase::LongBreak : Phase::ShortBreak;
            c.phase_started_at = brk.at;
            c.phase_deadline = brk.at + break_duration(config, expected);
            ++i;
            break;
        }

        case TimerEvent::Kind::BreakStarted:
            bad("break start without a preceding completion");
            break;

        case TimerEvent::Kind::BreakEnded:
            if (c.phase != Phase::ShortBreak && c.phase != Phase::LongBreak) bad("break end outside a break");
            if (e.at != c.phase_deadline) bad("break end not at the break deadline");
            enter_idle(c);
            break;

        case TimerEvent::Kind::Voided:
        case TimerEvent::Kind::InterruptionLogged: {
            if (c.phase != Phase::Work) bad("interruption outside work");
            if (!e.interruption) bad("missing interruption payload");
            const bool voiding = e.kind == TimerEvent::Kind::Voided;
            if (e.interruption->deflected == voiding) bad("deflection flag contradicts event kind");
            if (e.at >= c.phase_deadline) bad("interruption after the work deadline");
            if (voiding) enter_idle(c);
            break;
        }
        }
    }
    return c;
}

const char* to_string(Phase phase)
{
    switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::Work: return "Work";
    case Phase::ShortBreak: return "ShortBreak";
    case Phase::LongBreak: return "LongBreak";
    }
    return "?";
}

const char* to_string(TimerEvent::Kind kind)
{
    switch (kind) {
    case TimerEvent::Kind::Started: return "Started";
    case TimerEvent::Kind::WorkCompleted: return "WorkCompleted";
    case TimerEvent::Kind::BreakStarted: return "BreakStarted";
    case TimerEvent::Kind::BreakEnded: return "BreakEnded";
    case TimerEvent::Kind::Voided: return "Voided";
    case TimerEvent::Kind::InterruptionLogged: return "InterruptionLogged";
    }
    return "?";
}

} // namespace pomo

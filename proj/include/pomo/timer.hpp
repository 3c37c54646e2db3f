#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pomo {

using Duration = std::chrono::milliseconds;

/// Tag clock for the server-chosen monotonic epoch. Timestamps are integer
/// milliseconds since that epoch; the server anchors it to Unix time at
/// startup so reports can map them onto civil dates.
struct ServerClock
{
    using rep = std::int64_t;
    using period = std::milli;
    using duration = Duration;
    using time_point = std::chrono::time_point<ServerClock>;
    static constexpr bool is_steady = true;
};

using Timestamp = ServerClock::time_point;

constexpr Timestamp at_ms(std::int64_t ms) { return Timestamp{Duration{ms}}; }
constexpr std::int64_t to_ms(Timestamp t) { return t.time_since_epoch().count(); }

enum class Phase { Idle, Work, ShortBreak, LongBreak };
enum class BreakKind { Short, Long };
enum class InterruptionKind { Internal, External };

struct TimerConfig
{
    Duration work{std::chrono::minutes{25}};
    Duration short_break{std::chrono::minutes{5}};
    Duration long_break{std::chrono::minutes{15}};
    int long_break_every{4};

    bool operator==(const TimerConfig&) const = default;
};

/// Throws Error{InvalidConfig} naming the violated bound.
void validate(const TimerConfig& config);

Duration break_duration(const TimerConfig& config, BreakKind kind);

/// The authoritative timer. In Idle both phase timestamps are zero.
struct PomodoroClock
{
    TimerConfig config;
    Phase phase{Phase::Idle};
    Timestamp phase_started_at{};
    Timestamp phase_deadline{};
    int consecutive_completed{0};
    int total_completed_today{0};

    bool operator==(const PomodoroClock&) const = default;
};

struct Interruption
{
    InterruptionKind kind{InterruptionKind::External};
    bool deflected{false};
    Timestamp at{};
    std::string note;
    std::string initiator;

    bool operator==(const Interruption&) const = default;
};

struct TimerEvent
{
    enum class Kind { Started, WorkCompleted, BreakStarted, BreakEnded, Voided, InterruptionLogged };

    Kind kind{Kind::Started};
    Timestamp at{};
    BreakKind break_kind{BreakKind::Short};     // BreakStarted only
    std::optional<Interruption> interruption;  // Voided / InterruptionLogged only

    bool operator==(const TimerEvent&) const = default;
};

/// Result of applying one operation: the next clock and what happened.
struct Step
{
    PomodoroClock clock;
    std::vector<TimerEvent> events;
};

PomodoroClock make_clock(const TimerConfig& config);

Step start_pomodoro(const PomodoroClock& clock, Timestamp now);

/// Applies every transition whose deadline is <= now. Transitions are stamped
/// with the deadline that caused them, not with `now`, so the schedule does not
/// depend on how often the clock is polled. Idempotent for a fixed `now`.
Step advance(const PomodoroClock& clock, Timestamp now);

/// A deflected interruption is only logged. A non-deflected one voids the
/// pomodoro: back to Idle, counters untouched, no partial credit.
Step log_interruption(const PomodoroClock& clock, const Interruption& interruption);

/// max(0, deadline - now); throws Error{NoActivePhase} in Idle.
Duration remaining(const PomodoroClock& clock, Timestamp now);

/// Zeroes the daily completion counter at a civil day boundary.
PomodoroClock roll_day(PomodoroClock clock);

/// Rebuilds a clock from its event history without going through the live
/// operations. Throws Error{InvalidHistory} naming the first bad event.
PomodoroClock replay(std::span<const TimerEvent> events, const TimerConfig& config);

const char* to_string(Phase phase);
const char* to_string(TimerEvent::Kind kind);

} // namespace pomo

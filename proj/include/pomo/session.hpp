#pragma once

#include "pomo/ledger.hpp"
#include "pomo/timer.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace pomo {

enum class Role { Developer, Coach, CustomerProxy };

struct Member
{
    std::string id;
    std::string display_name;
    Role role{Role::Developer};
    bool full_time{true};

    bool operator==(const Member&) const = default;
};

/// Every active member appears exactly once across pairs and solo.
struct Pairing
{
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<std::string> solo;

    bool operator==(const Pairing&) const = default;
};

/// Circle-method round-robin: slot 0 is fixed, the remaining slots rotate left
/// one step per round. Odd member counts get a bye slot whose partner goes solo.
Pairing round_robin_pairing(std::span<const std::string> ordered_ids, int round);

/// Identifies the pair (or solo member) a member belonged to in `pairing`.
std::optional<std::string> pair_key(const Pairing& pairing, std::string_view member_id);

// Session log events. Timer events keep their timer-core meaning; the rest
// carry membership, pairing and ledger changes so the whole session can be
// rebuilt from its log.
namespace ev {

struct Created
{
    std::string session_id;
    TimerConfig config;
    Member creator;
    EstimationRules rules;
    bool operator==(const Created&) const = default;
};
struct MemberJoined
{
    Member member;
    bool observer{false};
    bool operator==(const MemberJoined&) const = default;
};
struct MemberLeft
{
    std::string member_id;
    bool operator==(const MemberLeft&) const = default;
};
struct ReadyDeclared
{
    std::string member_id;
    bool operator==(const ReadyDeclared&) const = default;
};
struct Started
{
    std::string initiator;
    bool coach_override{false};
    Pairing participants;
    bool operator==(const Started&) const = default;
};
struct WorkCompleted
{
    bool operator==(const WorkCompleted&) const = default;
};
struct BreakStarted
{
    BreakKind kind{BreakKind::Short};
    bool operator==(const BreakStarted&) const = default;
};
struct BreakEnded
{
    bool operator==(const BreakEnded&) const = default;
};
struct InterruptionLogged
{
    Interruption interruption;
    bool operator==(const InterruptionLogged&) const = default;
};
struct Voided
{
    Interruption interruption;
    bool operator==(const Voided&) const = default;
};
struct PairsRotated
{
    int round{0};
    Pairing pairing;
    bool operator==(const PairsRotated&) const = default;
};
struct DayRolled
{
    bool operator==(const DayRolled&) const = default;
};
struct StoryUpserted
{
    Story story;
    bool operator==(const StoryUpserted&) const = default;
};
struct StoryEstimated
{
    std::string story_id;
    Effort estimate;
    EstimateAdvice advice{EstimateAdvice::Ok};
    bool operator==(const StoryEstimated&) const = default;
};
struct StoryStatusChanged
{
    std::string story_id;
    StoryStatus status{StoryStatus::Planned};
    bool operator==(const StoryStatusChanged&) const = default;
};
struct MarkTracked
{
    TrackMark mark;
    bool operator==(const MarkTracked&) const = default;
};

} // namespace ev

using SessionEvent = std::variant<ev::Created, ev::MemberJoined, ev::MemberLeft, ev::ReadyDeclared, ev::Started,
                                  ev::WorkCompleted, ev::BreakStarted, ev::BreakEnded, ev::InterruptionLogged,
                                  ev::Voided, ev::PairsRotated, ev::DayRolled, ev::StoryUpserted,
                                  ev::StoryEstimated, ev::StoryStatusChanged, ev::MarkTracked>;

/// Wire/archive tag of an event, e.g. "Started".
const char* event_name(const SessionEvent& event);

struct LogEntry
{
    std::uint64_t seq{0};
    Timestamp at{};
    SessionEvent event;

    bool operator==(const LogEntry&) const = default;
};

struct SessionState
{
    std::string session_id;
    PomodoroClock clock;
    std::vector<Member> members;      // join order; drives pairing order
    std::set<std::string> observers;  // joined mid-pomodoro, active from the next Idle
    std::set<std::string> ready;
    int rotation_round{0};
    Pairing pairing;
    Pairing participants;                  // snapshot taken at the last Started
    std::uint64_t current_pomodoro_seq{0}; // seq of the running pomodoro's Started, 0 if none
    Ledger ledger;
    std::vector<LogEntry> event_log;

    const TimerConfig& config() const { return clock.config; }
    const Member* find_member(std::string_view id) const;
    bool is_active(std::string_view id) const;
    std::vector<std::string> active_ids() const;
    std::uint64_t last_seq() const { return event_log.empty() ? 0 : event_log.back().seq; }

    bool operator==(const SessionState&) const = default;
};

/// Log entries appended by one operation, in order.
using Appended = std::vector<LogEntry>;

// Live operations. Each first applies the clock transitions due by `now`;
// those stay applied even if the operation then throws. Past that point an
// operation validates before it mutates, so an Error changes nothing else.

SessionState create_session(std::string session_id, const TimerConfig& config, const Member& creator, Timestamp now,
                            const EstimationRules& rules = {});

/// Applies clock transitions due by `now` (completions, break ends).
Appended advance_session(SessionState& state, Timestamp now);

Appended join(SessionState& state, const Member& member, Timestamp now);
Appended leave(SessionState& state, std::string_view member_id, Timestamp now);
Appended declare_ready(SessionState& state, std::string_view member_id, Timestamp now);

/// Starts when every active member is ready, or when the initiator is a Coach.
Appended start_shared(SessionState& state, std::string_view initiator, Timestamp now);

/// Deflected interruptions are logged; a non-deflected one voids the shared
/// pomodoro for everyone.
Appended interrupt_shared(SessionState& state, const Interruption& interruption);
Appended void_shared(SessionState& state, Interruption interruption);

Appended rotate_pairs(SessionState& state, Timestamp now);
Appended roll_day(SessionState& state, Timestamp now);

// Ledger commands routed through the session so they share its log and order.

Appended upsert_story(SessionState& state, const Story& story, Timestamp now);
Appended set_story_status(SessionState& state, std::string_view story_id, StoryStatus status, Timestamp now);

struct EstimateOutcome
{
    Appended appended;
    EstimateAdvice advice{EstimateAdvice::Ok};
};

/// Unknown stories are created in `iteration_id` (or the latest iteration in
/// use). SplitRequired throws Error{SplitRequired} and stores nothing.
EstimateOutcome estimate(SessionState& state, std::string_view story_id, Effort units, std::string_view title,
                         std::string_view iteration_id, Timestamp now);

/// Tracks against `pomodoro_seq`, or the last completed pomodoro when absent.
/// The mark is owned by the member's pair in that pomodoro's participants.
Appended track(SessionState& state, std::string_view member_id, std::string_view story_id, std::string_view ptype,
               Effort effort, std::optional<std::uint64_t> pomodoro_seq, Timestamp now);

/// Applies one logged event (replay path). Throws Error{InvalidHistory}.
void apply(SessionState& state, const LogEntry& entry);

/// Rebuilds a session from its log alone.
SessionState replay_session(std::span<const LogEntry> log);

const char* to_string(Role role);

} // namespace pomo

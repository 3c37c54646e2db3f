#pragma once

#include "pomo/codec.hpp"
#include "pomo/session.hpp"
#include "pomo/timer.hpp"

#include <optional>
#include <set>
#include <string>

namespace pomo {

enum class PresenceState { DoNotDisturb, OnBreak, Idle, Offline };

struct PresenceStatus
{
    std::string member_id;
    PresenceState state{PresenceState::Idle};
    std::optional<int> minutes_remaining; // DoNotDisturb / OnBreak only
    std::string message;

    bool operator==(const PresenceStatus&) const = default;
};

/// ceil(remaining / 1 minute); 61 s -> 2.
int minutes_ceil(Duration remaining);

/// "do not disturb — 15m left", "on break — 4m left", "idle", "offline".
std::string render_presence(PresenceState state, std::optional<int> minutes);

/// Derived from the shared clock only, so every online member in a session
/// gets the same state and minutes.
PresenceStatus presence_for(const PomodoroClock& clock, std::string_view member_id, bool online, Timestamp now);

/// Session-wide status document served by /status/<session> and embedded in
/// snapshots: shared phase, deadline, minutes and one entry per member.
json status_document(const SessionState& state, const std::set<std::string>& online, Timestamp now);

void to_json(json& j, const PresenceStatus& p);
void from_json(const json& j, PresenceStatus& p);
std::string presence_state_name(PresenceState s);

} // namespace pomo

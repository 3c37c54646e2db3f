#include "pomo/presence.hpp"

namespace pomo {

int minutes_ceil(Duration remaining)
{
    const auto ms = remaining.count();
    if (ms <= 0) return 0;
    return static_cast<int>((ms + 59'999) / 60'000);
}

std::string render_presence(PresenceState state, std::optional<int> minutes)
{
    const std::string left = " — " + std::to_string(minutes.value_or(0)) + "m left";
    switch (state) {
    case PresenceState::DoNotDisturb: return "do not disturb" + left;
    case PresenceState::OnBreak: return "on break" + left;
    case PresenceState::Idle: return "idle";
    case PresenceState::Offline: return "offline";
    }
    return "";
}

PresenceStatus presence_for(const PomodoroClock& clock, std::string_view member_id, bool online, Timestamp now)
{
    PresenceStatus p;
    p.member_id = std::string(member_id);
    if (!online) {
        p.state = PresenceState::Offline;
    } else if (clock.phase == Phase::Work) {
        p.state = PresenceState::DoNotDisturb;
    } else if (clock.phase == Phase::ShortBreak || clock.phase == Phase::LongBreak) {
        p.state = PresenceState::OnBreak;
    } else {
        p.state = PresenceState::Idle;
    }
    if (p.state == PresenceState::DoNotDisturb || p.state == PresenceState::OnBreak) {
        p.minutes_remaining = minutes_ceil(remaining(clock, now));
    }
    p.message = render_presence(p.state, p.minutes_remaining);
    return p;
}

std::string presence_state_name(PresenceState s)
{
    switch (s) {
    case PresenceState::DoNotDisturb: return "DoNotDisturb";
    case PresenceState::OnBreak: return "OnBreak";
    case PresenceState::Idle: return "Idle";
    case PresenceState::Offline: return "Offline";
    }
    return "?";
}

void to_json(json& j, const PresenceStatus& p)
{
    j = json{{"member_id", p.member_id}, {"state", presence_state_name(p.state)}, {"message", p.message}};
    if (p.minutes_remaining) j["minutes_remaining"] = *p.minutes_remaining;
}

void from_json(const json& j, PresenceStatus& p)
{
    p.member_id = j.at("member_id").get<std::string>();
    const auto s = j.at("state").get<std::string>();
    if (s == "DoNotDisturb") p.state = PresenceState::DoNotDisturb;
    else if (s == "OnBreak") p.state = PresenceState::OnBreak;
    else if (s == "Idle") p.state = PresenceState::Idle;
    else if (s == "Offline") p.state = PresenceState::Offline;
    else throw json::other_error::create(501, "unknown presence state '" + s + "'", nullptr);
    p.minutes_remaining.reset();
    if (j.contains("minutes_remaining")) p.minutes_remaining = j.at("minutes_remaining").get<int>();
    p.message = j.at("message").get<std::string>();
}

json status_document(const SessionState& state, const std::set<std::string>& online, Timestamp now)
{
    const PresenceStatus shared = presence_for(state.clock, "", true, now);
    json doc{{"session", state.session_id},
             {"phase", phase_name(state.clock.phase)},
             {"state", presence_state_name(shared.state)},
             {"message", shared.message},
             {"server_time", to_ms(now)}};
    if (state.clock.phase != Phase::Idle) {
        doc["phase_deadline"] = to_ms(state.clock.phase_deadline);
        doc["minutes_remaining"] = *shared.minutes_remaining;
    }
    json members = json::array();
    for (const auto& m : state.members) {
        members.push_back(presence_for(state.clock, m.id, online.contains(m.id), now));
    }
    doc["members"] = members;
    return doc;
}

} // namespace pomo

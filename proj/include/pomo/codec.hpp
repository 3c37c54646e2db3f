#pragma once

// JSON encodings shared by the wire protocol and the archive. Field names are
// part of both external formats; see docs/protocol.md and docs/archive.md.

#include "pomo/ledger.hpp"
#include "pomo/session.hpp"
#include "pomo/timer.hpp"

#include <json.hpp>

namespace pomo {

using nlohmann::json;

void to_json(json& j, const TimerConfig& c);
void from_json(const json& j, TimerConfig& c);
void to_json(json& j, const PomodoroClock& c);
void from_json(const json& j, PomodoroClock& c);
void to_json(json& j, const Interruption& i);
void from_json(const json& j, Interruption& i);
void to_json(json& j, const TimerEvent& e);
void from_json(const json& j, TimerEvent& e);

void to_json(json& j, const Member& m);
void from_json(const json& j, Member& m);
void to_json(json& j, const Pairing& p);
void from_json(const json& j, Pairing& p);
void to_json(json& j, const LogEntry& e);
void from_json(const json& j, LogEntry& e);
void to_json(json& j, const SessionState& s);
void from_json(const json& j, SessionState& s);

void to_json(json& j, const Story& s);
void from_json(const json& j, Story& s);
void to_json(json& j, const TrackMark& m);
void from_json(const json& j, TrackMark& m);
void to_json(json& j, const EstimationRules& r);
void from_json(const json& j, EstimationRules& r);
void to_json(json& j, const Ledger& l);
void from_json(const json& j, Ledger& l);

// Strict enum codecs: unknown names throw json::other_error.
std::string phase_name(Phase p);
Phase parse_phase(const std::string& s);
Role parse_role(const std::string& s);
InterruptionKind parse_interruption_kind(const std::string& s);
StoryStatus parse_story_status(const std::string& s);
std::string role_name(Role r);
std::string interruption_kind_name(InterruptionKind k);

} // namespace pomo

#pragma once

// Deterministic sessions shared by the report, acceptance and CLI tests.

#include "pomo/archive.hpp"
#include "pomo/session.hpp"

#include <string>

namespace fixture {

using namespace pomo;

constexpr std::int64_t kMinute = 60'000;

// 2024-03-04T08:00:00Z
inline Timestamp morning() { return at_ms(1'709'539'200'000); }

inline Member dev(const std::string& id) { return Member{id, id, Role::Developer, true}; }

/// Readies everyone, runs one shared pomodoro and its break to the end.
/// Returns the pomodoro's seq; `now` ends when the break is over.
inline std::uint64_t run_pomodoro(SessionState& s, Timestamp& now)
{
    advance_session(s, now);
    for (const auto& id : s.active_ids()) declare_ready(s, id, now);
    start_shared(s, s.active_ids().front(), now);
    const std::uint64_t seq = s.current_pomodoro_seq;
    now = s.clock.phase_deadline;
    advance_session(s, now);
    now = s.clock.phase_deadline;
    advance_session(s, now);
    return seq;
}

/// Iteration IT-3: alice and bob pair, carol works solo. Matches
/// golden/iteration_IT-3.csv.
inline SessionState iteration_session()
{
    Timestamp now = morning();
    SessionState s = create_session("team", {}, dev("alice"), now);
    join(s, dev("bob"), now);
    join(s, dev("carol"), now);

    auto add = [&](std::string id, std::string title, std::string iteration, bool tracked) {
        upsert_story(s, Story{std::move(id), std::move(title), Effort{0}, tracked, StoryStatus::Planned,
                              std::move(iteration), ""},
                     now);
    };
    add("S-10", "Login form", "IT-3", true);
    add("S-11", "Search, filters", "IT-3", true);
    add("S-12", "Export \"CSV\"", "IT-3", true);
    add("E-1", "Explore charting libraries", "IT-3", false);
    add("S-13", "Docs", "IT-3", true);
    add("S-20", "Next time", "IT-4", true);
    estimate(s, "S-10", Effort{6}, "", "", now);
    estimate(s, "S-11", Effort{5}, "", "", now);
    estimate(s, "S-12", Effort{2}, "", "", now);
    estimate(s, "S-13", Effort{1}, "", "", now);
    estimate(s, "S-20", Effort{4}, "", "", now);

    std::vector<std::uint64_t> p;
    for (int i = 0; i < 6; ++i) p.push_back(run_pomodoro(s, now));

    track(s, "alice", "S-10", "Coding", Effort{2}, p[0], now);
    track(s, "carol", "S-11", "Analyzing", Effort{1}, p[0], now);
    track(s, "bob", "S-10", "Testing", Effort{2}, p[1], now);
    track(s, "alice", "S-11", "Coding", Effort{2}, p[2], now);
    track(s, "alice", "S-12", "Coding", Effort{2}, p[3], now);
    track(s, "bob", "S-12", "Refactoring", Effort{2}, p[4], now);
    track(s, "alice", "S-12", "Testing", Effort{2}, p[5], now);
    track(s, "carol", "S-20", "Spike", Effort{2}, p[5], now);
    set_story_status(s, "S-11", StoryStatus::Done, now);
    return s;
}

inline Archive archive_of(const SessionState& s, int utc_offset_minutes = 0)
{
    Archive a = Archive::in_memory();
    a.append_header(ArchiveHeader{s.session_id, "tok", utc_offset_minutes});
    for (const auto& e : s.event_log) a.append_event(e);
    return a;
}

} // namespace fixture

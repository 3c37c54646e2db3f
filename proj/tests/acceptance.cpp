// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "fixtures.hpp"
#include "hub_harness.hpp"
#include "oracles.hpp"
#include "scenario.hpp"
#include "wire_catalog.hpp"

#include "pomo/error.hpp"
#include "pomo/reports.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace pomo;
using namespace std::chrono_literals;

namespace {

constexpr std::int64_t kMinute = 60'000;

// Collects the first few violations of one criterion.
struct Check
{
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what)
    {
        if (!ok && failures.size() < 5) failures.push_back(what);
        if (!ok) ++count;
    }
    int count{0};
};

template <class F>
std::optional<Errc> code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_capacity(Check& c)
{
    const TeamCapacity cap = capacity(3, 10);
    c.expect(cap.total == 30, "capacity(3, 10) = " + std::to_string(cap.total));
}

void check_meeting(Check& c)
{
    const Effort e = meeting_effort(5, 1);
    c.expect(e.units == 5, "meeting_effort(5, 1) = " + std::to_string(e.units) + " half units");
    c.expect(render_pomodoros(e) == "2.5", "renders as " + render_pomodoros(e));
}

void check_cadence(Check& c)
{
    const auto expected = oracle::brute_force_day(10);
    c.expect(expected.long_breaks_after == std::vector<int>{4, 8}, "oracle long breaks");
    c.expect(expected.last_completion_minute == 315, "oracle wall time");

    // Through the session layer, with one member starting each pomodoro the
    // instant the previous break ends.
    Timestamp now = fixture::morning();
    const std::int64_t t0 = to_ms(now);
    SessionState s = create_session("day", {}, fixture::dev("a"), now);
    std::vector<int> long_after;
    std::vector<int> break_ends;
    std::int64_t last_completion = 0;
    for (int n = 1; n <= 10; ++n) {
        declare_ready(s, "a", now);
        start_shared(s, "a", now);
        now = s.clock.phase_deadline;
        advance_session(s, now);
        last_completion = to_ms(now) - t0;
        if (s.clock.phase == Phase::LongBreak) long_after.push_back(n);
        now = s.clock.phase_deadline;
        advance_session(s, now);
        break_ends.push_back(static_cast<int>((to_ms(now) - t0) / kMinute));
    }
    c.expect(long_after == expected.long_breaks_after, "long breaks differ from the oracle");
    c.expect(break_ends == expected.break_end_minutes, "break ends differ from the oracle");
    c.expect(last_completion == 315 * kMinute, "wall time " + std::to_string(last_completion / kMinute) + " min");
    c.expect(s.clock.total_completed_today == 10, "completed today");
}

void check_void_semantics(Check& c)
{
    int voids_seen = 0;
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        const std::string at = "seed " + std::to_string(seed) + ": ";
        const auto run = scenario::random_session(seed);
        const SessionState& s = run.state;

        // Counters across each Voided entry, stepping the log one entry at a time.
        SessionState step;
        for (const auto& entry : s.event_log) {
            const PomodoroClock before = step.clock;
            apply(step, entry);
            if (std::holds_alternative<ev::Voided>(entry.event)) {
                ++voids_seen;
                c.expect(step.clock.consecutive_completed == before.consecutive_completed &&
                             step.clock.total_completed_today == before.total_completed_today,
                         at + "void moved the counters at #" + std::to_string(entry.seq));
                c.expect(step.clock.phase == Phase::Idle, at + "void left the timer running");
            }
        }

        // No marks on voided pomodoros, and totals only count completed ones.
        const auto& outcomes = s.ledger.pomodoros();
        std::map<std::string, std::int64_t> completed_only;
        for (const auto& m : s.ledger.marks()) {
            const auto it = outcomes.find(m.pomodoro_seq);
            const bool completed = it != outcomes.end() && it->second == PomodoroOutcome::Completed;
            c.expect(completed, at + "mark on a pomodoro that did not complete");
            if (completed) completed_only[m.story_id] += m.effort.units;
        }
        for (const auto& story : s.ledger.stories()) {
            const auto want = completed_only.contains(story.id) ? completed_only.at(story.id) : 0;
            c.expect(s.ledger.actual(story.id).units == want, at + "actual of " + story.id);
        }
        for (const auto* it : {"IT-1", "IT-2"}) {
            if (!s.ledger.has_iteration(it)) continue;
            std::int64_t sum = 0;
            for (const auto& story : s.ledger.stories()) {
                if (story.iteration_id == it && completed_only.contains(story.id)) sum += completed_only.at(story.id);
            }
            c.expect(s.ledger.iteration_balance(it).total_actual.units == sum, at + "balance of " + it);
        }
        for (const auto& [seq, outcome] : outcomes) {
            const auto tracked = std::find_if(s.ledger.stories().begin(), s.ledger.stories().end(),
                                              [](const Story& st) { return st.tracked; });
            if (outcome != PomodoroOutcome::Voided || tracked == s.ledger.stories().end() || s.members.empty()) continue;
            SessionState copy = s;
            const auto code = code_of([&] {
                track(copy, s.members.front().id, tracked->id, "Coding", Effort{2}, seq,
                      s.event_log.back().at + 1min);
            });
            c.expect(code == Errc::VoidedPomodoro, at + "a voided pomodoro accepted a mark (" + (code ? std::string(to_string(*code)) : "none") + ")");
        }
    }
    c.expect(voids_seen > 100, "only " + std::to_string(voids_seen) + " voids were generated");
}

void check_estimation(Check& c)
{
    for (std::int64_t u = 0; u <= 20; ++u) {
        Ledger l;
        l.upsert_story(Story{"S-1", "s", Effort{0}, true, StoryStatus::Planned, "IT-1", ""});
        EstimateAdvice want = EstimateAdvice::Ok;
        if (u > 14) want = EstimateAdvice::SplitRequired;
        else if (u > 10) want = EstimateAdvice::SplitSuggested;
        else if (u > 0 && u < 2) want = EstimateAdvice::CombineSuggested;
        const EstimateResult r = l.estimate("S-1", Effort{u});
        c.expect(r.advice == want, std::to_string(u) + " half units: wrong advice");
        c.expect(l.find_story("S-1")->estimate.units == (want == EstimateAdvice::SplitRequired ? 0 : u),
                 std::to_string(u) + " half units: wrong stored estimate");

        SessionState s = create_session("e", {}, fixture::dev("a"), fixture::morning());
        const auto code = code_of([&] { estimate(s, "S-1", Effort{u}, "", "IT-1", fixture::morning()); });
        c.expect((code == Errc::SplitRequired) == (want == EstimateAdvice::SplitRequired),
                 std::to_string(u) + " half units: session estimate");
    }
}

void check_replay_identity(Check& c)
{
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        const auto run = scenario::random_session(seed);
        const SessionState replayed = replay_session(run.state.event_log);
        c.expect(replayed == run.state, "seed " + std::to_string(seed) + ": replay differs");
        c.expect(json(replayed).dump() == json(run.state).dump(), "seed " + std::to_string(seed) + ": json differs");
    }
}

void check_convergence(Check& c)
{
    const auto started = std::chrono::steady_clock::now();
    auto clock = std::make_shared<ManualClock>(fixture::morning());
    Hub hub(HubConfig{}, clock);
    harness::Client a(hub, "alice"), b(hub, "bob"), d(hub, "carol");
    const WireMessage snap = a.hello("team", "", TimerConfig{});
    const std::string token = snap.payload.at("token");
    for (auto* cl : {&b, &d}) {
        cl->hello("team", token);
        cl->command("join");
    }
    a.command("story", json{{"id", "S-1"}, {"iteration", "IT-1"}});

    std::mt19937_64 rng(7);
    std::vector<harness::Client*> clients{&a, &b, &d};
    const std::vector<std::string> commands{"ready", "start", "void", "interrupt", "rotate", "estimate", "track"};
    for (int burst = 0; burst < 60; ++burst) {
        for (int k = 0; k < 4; ++k) {
            auto* who = clients[rng() % clients.size()];
            const std::string name = commands[rng() % commands.size()];
            json args = json::object();
            if (name == "estimate") args = json{{"story", "S-1"}, {"units", static_cast<int>(rng() % 12)}};
            if (name == "track") args = json{{"story", "S-1"}, {"type", "Coding"}};
            if (name == "interrupt") args = json{{"deflected", rng() % 2 == 0}};
            who->send(make_command(who->member() + "-" + std::to_string(burst) + "-" + std::to_string(k), name, args));
        }
        clock->advance(std::chrono::minutes(rng() % 20));
        hub.tick();
        for (auto* cl : clients) cl->pump();

        const SessionState live = *hub.snapshot("team");
        for (auto* cl : clients) {
            const std::string at = "burst " + std::to_string(burst) + ", " + cl->member() + ": ";
            const auto& mirrored = cl->mirror().state();
            c.expect(cl->mirror().synced() && mirrored.has_value(), at + "not synced");
            if (!mirrored) continue;
            c.expect(mirrored->clock.phase == live.clock.phase, at + "phase");
            c.expect(mirrored->clock.phase_deadline == live.clock.phase_deadline, at + "deadline");
            c.expect(mirrored->event_log == live.event_log, at + "event log");
        }

        if (burst == 30) {
            harness::Client again(hub, "carol");
            hub.detach(d.peer());
            a.command("ready");
            clock->advance(3min);
            c.expect(again.hello("team", token).type == "snapshot", "re-handshake");
            c.expect(again.mirror().state() && *again.mirror().state() == *hub.snapshot("team"),
                     "reconnected client differs from the server");
            c.expect(d.hello("team", token).type == "snapshot", "second re-handshake");
        }
    }
    const auto took = std::chrono::steady_clock::now() - started;
    c.expect(took < 5s, "took " + std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(took).count()) +
                            " ms");
}

void check_wire_golden(Check& c)
{
    std::set<std::string> covered;
    for (const auto& item : wire_catalog::catalog()) {
        const std::string produced = encode(item.message);
        const std::string expected = wire_catalog::read_golden(item.name);
        c.expect(produced == expected, item.name + ": encoding differs from the golden file");
        try {
            const WireMessage decoded = decode(expected);
            c.expect(decoded == item.message, item.name + ": decode differs");
            c.expect(encode(decoded) == expected, item.name + ": re-encode differs");
            covered.insert(decoded.type);
        } catch (const Error& e) {
            c.expect(false, item.name + ": " + e.what());
        }
    }
    c.expect(covered == std::set<std::string>{"hello", "command", "snapshot", "event", "presence", "ack", "error"},
             "not every message type is covered");
}

void check_csv_export(Check& c)
{
    const SessionState s = fixture::iteration_session();
    const std::string csv = export_iteration_csv(s.ledger, "IT-3");
    c.expect(csv == read_file(std::string(POMO_GOLDEN_DIR) + "/iteration_IT-3.csv"), "CSV differs from the golden file");

    const auto rows = oracle::read_csv(csv);
    std::int64_t estimate = 0;
    std::int64_t actual = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        estimate += oracle::half_units(rows[i][2]);
        actual += oracle::half_units(rows[i][3]);
    }
    const IterationBalance b = s.ledger.iteration_balance("IT-3");
    c.expect(b.total_estimate.units == estimate, "estimate column total");
    c.expect(b.total_actual.units == actual, "actual column total");
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
        {"capacity: 3 pairs x 10 a day = 30", check_capacity},
        {"meeting: 5 people x 1 slot = 2.5 pomodoros", check_meeting},
        {"cadence: 10 pomodoros, long breaks after 4 and 8, 315 min", check_cadence},
        {"void semantics over 1000 random histories", check_void_semantics},
        {"estimation advice over 0..20 half units", check_estimation},
        {"replay identity over 1000 random sessions", check_replay_identity},
        {"3-client convergence with reconnect in under 5 s", check_convergence},
        {"wire golden vectors, decode(encode(m)) = m", check_wire_golden},
        {"iteration CSV golden file and totals", check_csv_export},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Check c;
        try {
            run(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("threw: ") + e.what());
        }
        if (c.count == 0) {
            std::cout << "PASS " << name << "\n";
        } else {
            ++failed;
            std::cout << "FAIL " << name << " (" << c.count << " violations)\n";
            for (const auto& f : c.failures) std::cout << "    " << f << "\n";
        }
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}

#include "wire_catalog.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace pomo;

namespace {

using namespace wire_catalog;

std::string golden(const std::string& name, const std::string& produced)
{
    if (std::getenv("POMO_UPDATE_GOLDEN")) {
        std::ofstream(golden_path(name), std::ios::binary) << produced;
    }
    const std::string text = read_golden(name);
    REQUIRE_MESSAGE(!text.empty(), "missing golden file " << golden_path(name));
    return text;
}

} // namespace

TEST_CASE("every message type has a byte-exact golden vector")
{
    std::set<std::string> covered;
    for (const auto& c : catalog()) {
        CAPTURE(c.name);
        const std::string produced = encode(c.message);
        const std::string expected = golden(c.name, produced);
        CHECK(produced == expected);
        CHECK(produced.find('\n') == std::string::npos);

        const WireMessage decoded = decode(expected);
        CHECK(decoded == c.message);
        CHECK(encode(decoded) == expected);
        covered.insert(decoded.type);
    }
    CHECK(covered == std::set<std::string>{"hello", "command", "snapshot", "event", "presence", "ack", "error"});
}

TEST_CASE("server messages carry seq and server_time, client messages do not")
{
    for (const auto& c : catalog()) {
        CAPTURE(c.name);
        const bool client = c.name == "hello" || c.name == "command";
        CHECK(c.message.seq.has_value() == !client);
        CHECK(c.message.server_time.has_value() == !client);
    }
}

TEST_CASE("keys are emitted in lexicographic order")
{
    const std::string line = encode(make_ack("x", "ready", json{{"z", 1}, {"a", 2}}, 1, at_ms(5)));
    CHECK(line == R"({"payload":{"command_id":"x","name":"ready","result":{"a":2,"z":1}},"seq":1,"server_time":5,"type":"ack","v":1})");
}

TEST_CASE("snapshot payload rebuilds the session")
{
    const SessionState s = fixture_session();
    const WireMessage m = decode(encode(make_snapshot(s, json::object(), at_ms(kT0))));
    CHECK(m.payload.at("state").get<SessionState>() == s);
    CHECK(m.seq == s.last_seq());
}

TEST_CASE("every session event round-trips through the event message")
{
    SessionState s = fixture_session();
    upsert_story(s, Story{"S-1", "login, \"quoted\"", Effort{0}, true, StoryStatus::Planned, "IT-1", "3pt"}, at_ms(kT0 + 5000));
    interrupt_shared(s, Interruption{InterruptionKind::External, true, at_ms(kT0 + 6000), "phone", "bob"});
    advance_session(s, at_ms(kT0 + 4000 + 31 * 60'000));
    track(s, "alice", "S-1", "Coding", Effort{2}, std::nullopt, at_ms(kT0 + 4000 + 31 * 60'000));
    estimate(s, "S-1", Effort{5}, "", "", at_ms(kT0 + 4000 + 31 * 60'000));
    set_story_status(s, "S-1", StoryStatus::Done, at_ms(kT0 + 4000 + 31 * 60'000));
    rotate_pairs(s, at_ms(kT0 + 4000 + 31 * 60'000));
    roll_day(s, at_ms(kT0 + 4000 + 31 * 60'000));
    declare_ready(s, "alice", at_ms(kT0 + 4000 + 31 * 60'000));
    declare_ready(s, "bob", at_ms(kT0 + 4000 + 31 * 60'000));
    start_shared(s, "alice", at_ms(kT0 + 4000 + 31 * 60'000));
    void_shared(s, Interruption{InterruptionKind::Internal, false, at_ms(kT0 + 4000 + 32 * 60'000), "", "alice"});
    leave(s, "bob", at_ms(kT0 + 4000 + 33 * 60'000));

    std::set<std::string> names;
    for (const auto& entry : s.event_log) {
        const WireMessage m = decode(encode(make_event(entry, at_ms(kT0))));
        CHECK(m.payload.get<LogEntry>() == entry);
        names.insert(event_name(entry.event));
    }
    CHECK(names.size() == std::variant_size_v<SessionEvent>);
}

TEST_CASE("malformed lines")
{
    const char* bad[] = {
        "",
        "not json",
        "[1,2]",
        R"({"type":"hello","payload":{}})",
        R"({"v":"1","type":"hello","payload":{}})",
        R"({"v":1,"payload":{}})",
        R"({"v":1,"type":"shout","payload":{}})",
        R"({"v":1,"type":"hello"})",
        R"({"v":1,"type":"hello","payload":[]})",
        R"({"v":1,"type":"event","payload":{},"seq":-1})",
        R"({"v":1,"type":"event","payload":{},"server_time":"now"})",
        R"({"v":1,"type":"hello","payload":{},"extra":true})",
    };
    for (const char* line : bad) {
        CAPTURE(line);
        try {
            decode(line);
            FAIL("decoded");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MalformedMessage);
        }
    }
    // Other versions decode; the receiver decides.
    CHECK(decode(R"({"v":2,"type":"hello","payload":{}})").v == 2);
}

TEST_CASE("hello payload")
{
    const HelloRequest h = parse_hello(make_hello(HelloRequest{"team", alice(), "tok", std::nullopt}).payload);
    CHECK(h.session_id == "team");
    CHECK(h.member == alice());
    CHECK(h.token == "tok");
    CHECK_FALSE(h.create.has_value());
    CHECK(parse_hello(json{{"session", "x"}, {"create", json::object()}}).create == TimerConfig{});
    CHECK_THROWS_AS(parse_hello(json{{"session", ""}}), Error);
    CHECK_THROWS_AS(parse_hello(json{{"member", "alice"}}), Error);
}

TEST_CASE("line buffer")
{
    LineBuffer buf(16);
    std::vector<std::string> lines;
    CHECK(buf.feed("ab", lines));
    CHECK(lines.empty());
    CHECK(buf.feed("c\r\nde\n\nf", lines));
    CHECK(lines == std::vector<std::string>{"abc", "de", ""});
    lines.clear();
    CHECK_FALSE(buf.feed(std::string(40, 'x') + "\nok\n", lines));
    CHECK(lines == std::vector<std::string>{"ok"});

    // Split points never change the result.
    const std::string stream = "one\ntwo\r\nthree\n";
    for (std::size_t cut = 0; cut <= stream.size(); ++cut) {
        LineBuffer b;
        std::vector<std::string> out;
        b.feed(std::string_view(stream).substr(0, cut), out);
        b.feed(std::string_view(stream).substr(cut), out);
        CHECK(out == std::vector<std::string>{"one", "two", "three"});
    }
}

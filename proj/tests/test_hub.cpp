#include "hub_harness.hpp"

#include "pomo/error.hpp"
#include "pomo/presence.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

using namespace pomo;
using harness::Client;
using namespace std::chrono_literals;

namespace {

constexpr std::int64_t kT0 = 1'709'539'200'000; // 2024-03-04T08:00:00Z

struct Rig
{
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(at_ms(kT0));
    Hub hub;

    explicit Rig(HubConfig config = {})
        : hub(std::move(config), clock)
    {}

    /// Creates "team" through `creator` and returns the token.
    std::string create(Client& creator, const std::string& session = "team")
    {
        const WireMessage snap = creator.hello(session, "", TimerConfig{});
        REQUIRE(snap.type == "snapshot");
        return snap.payload.at("token").get<std::string>();
    }
};

void join_all(std::initializer_list<Client*> clients, const std::string& token, bool creator_first = true)
{
    bool first = creator_first;
    for (Client* c : clients) {
        if (first) {
            first = false;
            continue;
        }
        REQUIRE(c->hello("team", token).type == "snapshot");
        REQUIRE(c->command("join").type == "ack");
    }
}

void pump(std::initializer_list<Client*> clients)
{
    for (Client* c : clients) c->pump();
}

std::string code(const WireMessage& m) { return m.payload.value("code", ""); }

} // namespace

TEST_CASE("handshake")
{
    Rig rig;
    Client alice(rig.hub, "alice");
    const std::string token = rig.create(alice);
    CHECK(token.size() == 16);
    CHECK(alice.mirror().synced());
    CHECK(alice.mirror().state()->members.size() == 1);
    CHECK(rig.hub.sessions() == std::vector<std::string>{"team"});

    SUBCASE("joining with the token")
    {
        Client bob(rig.hub, "bob");
        const WireMessage snap = bob.hello("team", token);
        CHECK(snap.type == "snapshot");
        CHECK_FALSE(snap.payload.contains("token"));
        CHECK(snap.server_time == kT0);
        CHECK(snap.payload.at("state").get<SessionState>() == *rig.hub.snapshot("team"));
        CHECK(rig.hub.subscriber_count("team") == 2);
    }
    SUBCASE("wrong token closes the connection")
    {
        Client eve(rig.hub, "eve");
        CHECK(code(eve.hello("team", "guess")) == "Unauthorized");
        CHECK(eve.peer()->closed());
        CHECK(rig.hub.subscriber_count("team") == 1);
    }
    SUBCASE("unknown session and duplicate create")
    {
        Client bob(rig.hub, "bob");
        CHECK(code(bob.hello("nope", token)) == "UnknownSession");
        CHECK(code(bob.hello("team", "", TimerConfig{})) == "SessionExists");
        CHECK(code(bob.hello("bad id!", "", TimerConfig{})) == "InvalidArgument");
        TimerConfig broken;
        broken.work = 0ms;
        CHECK(code(bob.hello("other", "", broken)) == "InvalidConfig");
        CHECK_FALSE(bob.peer()->closed());
    }
    SUBCASE("explicit token on create is kept and not echoed")
    {
        Client carol(rig.hub, "carol");
        carol.send(make_hello(HelloRequest{"side", Member{"carol", "C", Role::Developer, true}, "mine", TimerConfig{}}));
        const auto got = carol.pump();
        REQUIRE_FALSE(got.empty());
        CHECK(got[0].type == "snapshot");
        CHECK_FALSE(got[0].payload.contains("token"));
        Client dan(rig.hub, "dan");
        CHECK(dan.hello("side", "mine").type == "snapshot");
    }
}

TEST_CASE("connection-level errors")
{
    Rig rig;
    Client c(rig.hub, "alice");

    c.send_raw("{oops");
    auto got = c.pump();
    REQUIRE(got.size() == 1);
    CHECK(code(got[0]) == "MalformedMessage");
    CHECK(got[0].server_time.has_value());
    CHECK_FALSE(c.peer()->closed());

    c.send(make_command("c1", "ready"));
    got = c.pump();
    REQUIRE(got.size() == 1);
    CHECK(code(got[0]) == "NotSubscribed");
    CHECK(got[0].payload.at("command_id") == "c1");

    c.send_raw(R"({"payload":{},"type":"ack","v":1})");
    CHECK(code(c.pump().at(0)) == "MalformedMessage");

    c.send_raw(R"({"payload":{"id":"x"},"type":"command","v":1})");
    CHECK(code(c.pump().at(0)) == "MalformedMessage");

    c.send_raw(R"({"payload":{"session":"team"},"type":"hello","v":2})");
    got = c.pump();
    REQUIRE(got.size() == 1);
    CHECK(code(got[0]) == "UnsupportedVersion");
    CHECK(c.peer()->closed());
}

TEST_CASE("NotAllReady goes to the sender only")
{
    Rig rig;
    Client a(rig.hub, "alice"), b(rig.hub, "bob"), c(rig.hub, "carol");
    const std::string token = rig.create(a);
    join_all({&a, &b, &c}, token);
    REQUIRE(a.command("ready").type == "ack");
    REQUIRE(b.command("ready").type == "ack");
    pump({&a, &b, &c});
    const auto before_a = a.seen().size();
    const auto before_b = b.seen().size();

    const WireMessage err = c.command("start");
    CHECK(code(err) == "NotAllReady");
    CHECK(err.payload.at("reason") == "waiting for: carol");
    pump({&a, &b});
    CHECK(a.seen().size() == before_a);
    CHECK(b.seen().size() == before_b);
    CHECK(rig.hub.snapshot("team")->clock.phase == Phase::Idle);
}

TEST_CASE("three clients converge after command bursts and a reconnect")
{
    Rig rig;
    Client a(rig.hub, "alice"), b(rig.hub, "bob"), c(rig.hub, "carol");
    const std::string token = rig.create(a);
    join_all({&a, &b, &c}, token);

    std::mt19937_64 rng(42);
    std::vector<Client*> clients{&a, &b, &c};
    const std::vector<std::string> commands{"ready", "start", "void", "interrupt", "rotate", "estimate", "track"};
    a.command("story", json{{"id", "S-1"}, {"iteration", "IT-1"}});
    for (int burst = 0; burst < 60; ++burst) {
        for (int k = 0; k < 4; ++k) {
            Client* who = clients[rng() % clients.size()];
            const std::string name = commands[rng() % commands.size()];
            json args = json::object();
            if (name == "estimate") args = json{{"story", "S-1"}, {"units", static_cast<int>(rng() % 12)}};
            if (name == "track") args = json{{"story", "S-1"}, {"type", "Coding"}};
            if (name == "interrupt") args = json{{"deflected", rng() % 2 == 0}};
            who->send(make_command(who->member() + "-" + std::to_string(burst) + "-" + std::to_string(k), name, args));
        }
        rig.clock->advance(std::chrono::minutes(rng() % 20));
        rig.hub.tick();
        pump({&a, &b, &c});

        const SessionState live = *rig.hub.snapshot("team");
        for (Client* cl : clients) {
            CAPTURE(cl->member());
            REQUIRE(cl->mirror().synced());
            CHECK(cl->mirror().state()->clock.phase == live.clock.phase);
            CHECK(cl->mirror().state()->clock.phase_deadline == live.clock.phase_deadline);
            CHECK(*cl->mirror().state() == live);
        }
        // Every event line a client saw is byte-identical to alice's line
        // for the same seq, and seqs only grow.
        std::map<std::uint64_t, std::string> reference;
        for (const auto& m : a.of_type("event")) reference[*m.seq] = encode(m);
        for (Client* cl : {&b, &c}) {
            std::uint64_t last = 0;
            for (const auto& m : cl->of_type("event")) {
                CHECK(*m.seq > last);
                last = *m.seq;
                CHECK(encode(m) == reference.at(*m.seq));
            }
        }

        if (burst == 30) {
            // carol drops and re-handshakes on a fresh connection.
            Client again(rig.hub, "carol");
            rig.hub.detach(c.peer());
            a.command("ready");
            rig.clock->advance(3min);
            REQUIRE(again.hello("team", token).type == "snapshot");
            pump({&a, &b});
            CHECK(*again.mirror().state() == *a.mirror().state());
            CHECK(*again.mirror().state() == *rig.hub.snapshot("team"));
            REQUIRE(c.hello("team", token).type == "snapshot");
            CHECK(*c.mirror().state() == *rig.hub.snapshot("team"));
        }
    }
    CHECK(a.mirror().state()->event_log.size() > 40);
}

TEST_CASE("retried command ids are answered without re-applying")
{
    Rig rig;
    Client a(rig.hub, "alice"), b(rig.hub, "bob");
    const std::string token = rig.create(a);
    join_all({&a, &b}, token);

    const WireMessage first = a.command("ready", json::object(), "r-1");
    REQUIRE(first.type == "ack");
    const auto seq = rig.hub.snapshot("team")->last_seq();
    a.send(make_command("r-1", "ready"));
    const auto replay = a.pump();
    REQUIRE(replay.size() == 1);
    CHECK(encode(replay[0]) == encode(first));
    CHECK(rig.hub.snapshot("team")->last_seq() == seq);

    // A failed command is cached the same way.
    const WireMessage err = a.command("start", json::object(), "s-1");
    CHECK(code(err) == "NotAllReady");
    b.command("ready");
    a.pump();
    a.send(make_command("s-1", "start"));
    CHECK(encode(a.pump().at(0)) == encode(err));
    CHECK(rig.hub.snapshot("team")->clock.phase == Phase::Idle);

    // Ids are per member.
    CHECK(b.command("start", json::object(), "s-1").type == "ack");
    CHECK(rig.hub.snapshot("team")->clock.phase == Phase::Work);
}

TEST_CASE("the dedupe window forgets old ids")
{
    HubConfig cfg;
    cfg.dedupe_window = 2;
    Rig rig(cfg);
    Client a(rig.hub, "alice");
    rig.create(a);
    CHECK(a.command("story", json{{"id", "S-1"}}, "x1").type == "ack");
    CHECK(a.command("story", json{{"id", "S-2"}}, "x2").type == "ack");
    CHECK(a.command("story", json{{"id", "S-3"}}, "x3").type == "ack");
    const auto seq = rig.hub.snapshot("team")->last_seq();
    a.command("story", json{{"id", "S-1"}}, "x1");
    CHECK(rig.hub.snapshot("team")->last_seq() == seq + 1);
}

TEST_CASE("racing voids void once")
{
    for (int round = 0; round < 20; ++round) {
        Rig rig;
        Client a(rig.hub, "alice"), b(rig.hub, "bob"), c(rig.hub, "carol");
        const std::string token = rig.create(a);
        join_all({&a, &b, &c}, token);
        for (Client* cl : {&a, &b, &c}) cl->command("ready");
        REQUIRE(a.command("start").type == "ack");
        rig.clock->advance(5min);

        std::vector<std::thread> threads;
        for (Client* cl : {&a, &b, &c}) {
            threads.emplace_back([cl] { cl->send(make_command("v", "void", json{{"kind", "external"}})); });
        }
        for (auto& t : threads) t.join();

        int acks = 0;
        int refused = 0;
        for (Client* cl : {&a, &b, &c}) {
            const WireMessage r = cl->reply_to("v");
            if (r.type == "ack") ++acks;
            if (code(r) == "InterruptOutsideWork") ++refused;
        }
        CHECK(acks == 1);
        CHECK(refused == 2);
        const SessionState s = *rig.hub.snapshot("team");
        int voids = 0;
        for (const auto& e : s.event_log) voids += std::holds_alternative<ev::Voided>(e.event);
        CHECK(voids == 1);
        for (Client* cl : {&a, &b, &c}) CHECK(*cl->mirror().state() == s);
    }
}

TEST_CASE("a slow client is dropped and can re-handshake")
{
    Rig rig;
    Client a(rig.hub, "alice");
    const std::string token = rig.create(a);
    Client slow(rig.hub, "bob", 3);
    REQUIRE(slow.hello("team", token).type == "snapshot");
    // bob stops reading; four more broadcasts overflow the queue.
    for (int i = 0; i < 6; ++i) a.command("story", json{{"id", "S-" + std::to_string(i)}});
    CHECK(slow.peer()->closed());
    CHECK(rig.hub.subscriber_count("team") == 1);
    a.pump();
    CHECK(a.mirror().synced());

    slow.peer()->reopen();
    REQUIRE(slow.hello("team", token).type == "snapshot");
    CHECK(*slow.mirror().state() == *rig.hub.snapshot("team"));
}

TEST_CASE("a missed event makes the mirror ask for a snapshot")
{
    Rig rig;
    Client a(rig.hub, "alice"), b(rig.hub, "bob");
    const std::string token = rig.create(a);
    join_all({&a, &b}, token);
    b.pump();
    a.command("story", json{{"id", "S-1"}});
    b.peer()->take(); // lost in transit
    a.command("story", json{{"id", "S-2"}});
    b.pump();
    CHECK(b.needs_snapshot());
    CHECK(b.mirror().stale());
    CHECK_FALSE(b.mirror().synced());

    REQUIRE(b.hello("team", token).type == "snapshot");
    CHECK(b.mirror().synced());
    CHECK(*b.mirror().state() == *rig.hub.snapshot("team"));
    a.command("story", json{{"id", "S-3"}});
    b.pump();
    CHECK(*b.mirror().state() == *rig.hub.snapshot("team"));
}

TEST_CASE("transitions are broadcast as they fall due")
{
    Rig rig;
    Client a(rig.hub, "alice"), b(rig.hub, "bob");
    const std::string token = rig.create(a);
    join_all({&a, &b}, token);
    a.command("ready");
    b.command("ready");
    a.command("start");
    pump({&a, &b});

    rig.clock->advance(25min);
    rig.hub.tick();
    b.pump();
    const auto events = b.of_type("event");
    REQUIRE(events.size() >= 2);
    CHECK(events[events.size() - 2].payload.at("kind") == "WorkCompleted");
    CHECK(events.back().payload.at("kind") == "BreakStarted");
    // Stamped at the deadline, not at the tick.
    CHECK(events.back().payload.at("at") == kT0 + 25 * 60'000);
    CHECK(b.mirror().state()->clock.phase == Phase::ShortBreak);
}

TEST_CASE("presence follows the shared minutes")
{
    Rig rig;
    Client a(rig.hub, "alice"), b(rig.hub, "bob");
    const std::string token = rig.create(a);
    join_all({&a, &b}, token);
    a.command("ready");
    b.command("ready");
    a.command("start");
    pump({&a, &b});
    const auto count = b.of_type("presence").size();

    rig.clock->advance(10s);
    rig.hub.tick();
    b.pump();
    CHECK(b.of_type("presence").size() == count); // still 25m

    rig.clock->advance(10min);
    rig.hub.tick();
    b.pump();
    const auto presence = b.of_type("presence");
    REQUIRE(presence.size() == count + 1);
    CHECK(presence.back().payload.at("minutes_remaining") == 15);
    CHECK(presence.back().payload.at("message") == "do not disturb — 15m left");
    CHECK(presence.back().payload.at("state") == "DoNotDisturb");

    const json status = *rig.hub.status("team");
    CHECK(status.at("minutes_remaining") == 15);
    CHECK(status.at("members").size() == 2);

    // Leaving the connection shows the member offline.
    rig.hub.detach(a.peer());
    b.pump();
    const auto after = b.of_type("presence").back().payload.at("members");
    CHECK(after[0].at("state") == "Offline");
    CHECK(after[1].at("state") == "DoNotDisturb");
    CHECK_FALSE(rig.hub.status("nope").has_value());
}

TEST_CASE("crossing midnight records the day and rolls the counter")
{
    Rig rig;
    Client a(rig.hub, "alice");
    rig.create(a);
    a.command("ready");
    a.command("start");
    rig.clock->set(at_ms(kT0 + 16 * 3'600'000 + 60'000)); // 2024-03-05T00:01Z
    rig.hub.tick();
    a.pump();

    const SessionState s = *rig.hub.snapshot("team");
    CHECK(std::holds_alternative<ev::DayRolled>(s.event_log.back().event));
    CHECK(s.clock.total_completed_today == 0);
    CHECK(s.clock.consecutive_completed == 1);
    const ArchiveContents c = rig.hub.archive("team")->load();
    REQUIRE(c.days.contains("2024-03-04"));
    CHECK(c.days.at("2024-03-04").completed == 1);
    CHECK(*a.mirror().state() == s);

    // Another tick on the same day changes nothing.
    rig.hub.tick();
    CHECK(rig.hub.snapshot("team")->last_seq() == s.last_seq());
}

TEST_CASE("commands beyond the basics")
{
    Rig rig;
    Client a(rig.hub, "alice"), b(rig.hub, "bob");
    const std::string token = rig.create(a);
    join_all({&a, &b}, token);

    const WireMessage split = a.command("estimate", json{{"story", "S-12"}, {"units", 16}});
    CHECK(code(split) == "SplitRequired");
    CHECK(split.payload.at("reason").get<std::string>().find("break it down") != std::string::npos);
    const WireMessage ok = a.command("estimate", json{{"story", "S-12"}, {"units", 5}, {"iteration", "IT-3"}});
    CHECK(ok.payload.at("result").at("estimate_pomodoros") == "2.5");
    CHECK(code(a.command("estimate", json{{"story", "S-12"}})) == "InvalidArgument");
    CHECK(code(a.command("estimate", json{{"story", "S-12"}, {"units", "many"}})) == "InvalidArgument");
    CHECK(code(a.command("fly")) != "");

    const WireMessage rot = a.command("rotate");
    CHECK(rot.payload.at("result").at("round") == 1);
    CHECK(a.command("story_status", json{{"id", "S-12"}, {"status", "Done"}}).type == "ack");
    CHECK(code(a.command("story_status", json{{"id", "S-12"}, {"status", "Later"}})) == "InvalidArgument");
    CHECK(a.command("status").payload.at("result").at("session") == "team");
    CHECK(b.command("leave").type == "ack");
    CHECK(rig.hub.snapshot("team")->find_member("bob") == nullptr);
}

TEST_CASE("sessions survive a restart")
{
    const auto dir = std::filesystem::temp_directory_path() / ("pomo-hub-" + random_id());
    HubConfig cfg;
    cfg.data_dir = dir;
    std::string token;
    SessionState before;
    {
        Rig rig(cfg);
        Client a(rig.hub, "alice"), b(rig.hub, "bob");
        token = rig.create(a);
        join_all({&a, &b}, token);
        a.command("ready");
        b.command("ready");
        a.command("start");
        rig.clock->advance(26min);
        a.command("journal", json{{"action", "add"}, {"lines", json::array({"paired on S-1"})}});
        before = *rig.hub.snapshot("team");
        CHECK(std::filesystem::exists(dir / "team.jsonl"));
        CHECK(std::filesystem::exists(dir / "journal" / "team" / "2024-03-04" / "alice.txt"));
    }
    std::ofstream(dir / "broken.jsonl") << "not json\n";

    Rig rig(cfg);
    REQUIRE(rig.hub.load_errors().size() == 1);
    CHECK(rig.hub.load_errors()[0].find("broken.jsonl") != std::string::npos);
    CHECK(*rig.hub.snapshot("team") == before);
    Client again(rig.hub, "alice");
    CHECK(code(again.hello("team", "wrong")) == "Unauthorized");
    Client ok(rig.hub, "alice");
    REQUIRE(ok.hello("team", token).type == "snapshot");
    CHECK(*ok.mirror().state() == before);
    const WireMessage shown = ok.command("journal", json{{"action", "show"}});
    CHECK(shown.payload.at("result").at("text").get<std::string>().find("- paired on S-1") != std::string::npos);
    Client dup(rig.hub, "zed");
    CHECK(code(dup.hello("team", "", TimerConfig{})) == "SessionExists");
    std::filesystem::remove_all(dir);
}

#include "pomo/error.hpp"
#include "pomo/net.hpp"

#include <doctest.h>

#include <thread>

using namespace pomo;
using namespace std::chrono_literals;

namespace {

constexpr std::int64_t kT0 = 1'709'539'200'000;

struct Live
{
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(at_ms(kT0));
    Hub hub{HubConfig{}, clock};
    Server server{hub, options()};

    static ServerOptions options()
    {
        ServerOptions o;
        o.listen = "127.0.0.1:0";
        o.http_listen = "127.0.0.1:0";
        o.tick = 20ms;
        o.max_line = 4096;
        return o;
    }

    Live() { server.start(); }
    ~Live() { server.stop(); }

    Endpoint tcp() const { return Endpoint{"127.0.0.1", server.port()}; }
    Endpoint http() const { return Endpoint{"127.0.0.1", server.http_port()}; }
};

template <class C>
WireMessage read_until(C& client, const std::string& type, std::chrono::milliseconds budget = 3s)
{
    const auto deadline = std::chrono::steady_clock::now() + budget;
    while (std::chrono::steady_clock::now() < deadline) {
        if (auto m = client.read(200ms); m && m->type == type) return *m;
    }
    FAIL("no " << type << " message");
    return {};
}

template <class C>
std::vector<WireMessage> read_events(C& client, std::size_t n)
{
    std::vector<WireMessage> out;
    const auto deadline = std::chrono::steady_clock::now() + 3s;
    while (out.size() < n && std::chrono::steady_clock::now() < deadline) {
        if (auto m = client.read(200ms); m && m->type == "event") out.push_back(*m);
    }
    return out;
}

Member member(const std::string& id) { return Member{id, id, Role::Developer, true}; }

} // namespace

TEST_CASE("endpoints")
{
    CHECK(parse_endpoint("127.0.0.1:7878").host == "127.0.0.1");
    CHECK(parse_endpoint("127.0.0.1:7878").port == 7878);
    CHECK(parse_endpoint(":9000").host == "0.0.0.0");
    CHECK(parse_endpoint("[::1]:80").host == "::1");
    CHECK(parse_endpoint("localhost:1").host == "localhost");
    for (const char* bad : {"", "host", "host:", "host:99999", "host:x", "[::1]80"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_endpoint(bad), Error);
    }
}

TEST_CASE("nothing listening is a connection error")
{
    LineClient c;
    CHECK_THROWS_AS(c.connect(Endpoint{"127.0.0.1", 1}, 1s), ConnectionError);
    CHECK_THROWS_AS(http_get(Endpoint{"127.0.0.1", 1}, "/status", 1s), ConnectionError);
}

TEST_CASE("TCP and WebSocket clients see the same stream")
{
    Live live;
    LineClient alice;
    alice.connect(live.tcp());
    alice.send(make_hello(HelloRequest{"team", member("alice"), "", TimerConfig{}}));
    const WireMessage snap = read_until(alice, "snapshot");
    const std::string token = snap.payload.at("token");

    LineClient bob;
    bob.connect(live.tcp());
    bob.send(make_hello(HelloRequest{"team", member("bob"), token, std::nullopt}));
    read_until(bob, "snapshot");
    bob.send(make_command("b1", "join"));
    CHECK(read_until(bob, "ack").payload.at("command_id") == "b1");

    WsClient dash;
    dash.connect(live.http());
    dash.send(make_hello(HelloRequest{"team", std::nullopt, token, std::nullopt}));
    const WireMessage dash_snap = read_until(dash, "snapshot");
    CHECK(dash_snap.payload.at("state").at("members").size() == 2);

    alice.send(make_command("a1", "ready"));
    bob.send(make_command("b2", "ready"));
    read_until(bob, "ack");
    alice.send(make_command("a2", "start"));
    const WireMessage ack = read_until(alice, "ack");
    // a1's ack may arrive first; look for the start ack.
    WireMessage start_ack = ack;
    while (start_ack.payload.at("command_id") != "a2") start_ack = read_until(alice, "ack");
    CHECK(start_ack.payload.at("result").at("phase") == "Work");

    const auto on_ws = read_events(dash, 3);
    REQUIRE(on_ws.size() == 3);
    CHECK(on_ws[2].payload.at("kind") == "Started");
    CHECK(on_ws[2].payload.at("participants").at("pairs").size() == 1);

    // The scripted clock moves; the server's tick broadcasts the completion.
    live.clock->advance(25min);
    const auto later = read_events(dash, 2);
    REQUIRE(later.size() == 2);
    CHECK(later[0].payload.at("kind") == "WorkCompleted");
    CHECK(later[1].payload.at("kind") == "BreakStarted");

    // Bob's TCP stream carries byte-identical event lines.
    std::map<std::uint64_t, std::string> on_tcp;
    const auto deadline = std::chrono::steady_clock::now() + 3s;
    while (!on_tcp.contains(*later[1].seq) && std::chrono::steady_clock::now() < deadline) {
        if (auto m = bob.read(200ms); m && m->type == "event") on_tcp[*m->seq] = encode(*m);
    }
    for (const auto& m : on_ws) {
        if (on_tcp.contains(*m.seq)) CHECK(on_tcp.at(*m.seq) == encode(m));
    }
    REQUIRE(on_tcp.contains(*on_ws[2].seq));
    for (const auto& m : later) CHECK(on_tcp.at(*m.seq) == encode(m));
}

TEST_CASE("status endpoint")
{
    Live live;
    LineClient alice;
    alice.connect(live.tcp());
    alice.send(make_hello(HelloRequest{"team", member("alice"), "t", TimerConfig{}}));
    read_until(alice, "snapshot");
    alice.send(make_command("r", "ready"));
    alice.send(make_command("s", "start"));
    read_until(alice, "ack");
    read_until(alice, "ack");
    live.clock->advance(10min);

    const HttpResponse one = http_get(live.http(), "/status/team");
    CHECK(one.status == 200);
    CHECK(one.content_type.find("application/json") != std::string::npos);
    const json doc = json::parse(one.body);
    CHECK(doc.at("session") == "team");
    CHECK(doc.at("state") == "DoNotDisturb");
    CHECK(doc.at("minutes_remaining") == 15);
    CHECK(doc.at("message") == "do not disturb — 15m left");
    CHECK(doc.at("server_time") == kT0 + 10 * 60'000);
    CHECK(doc.at("members")[0].at("state") == "DoNotDisturb");

    const json all = json::parse(http_get(live.http(), "/status").body);
    CHECK(all.at("sessions").size() == 1);
    CHECK(all.at("sessions")[0] == "team");

    const HttpResponse missing = http_get(live.http(), "/status/ghost");
    CHECK(missing.status == 404);
    CHECK(json::parse(missing.body).at("code") == "UnknownSession");
    CHECK(http_get(live.http(), "/elsewhere").status == 404);
}

TEST_CASE("protocol errors over TCP")
{
    Live live;
    LineClient c;
    c.connect(live.tcp());

    c.send_raw("this is not json");
    CHECK(read_until(c, "error").payload.at("code") == "MalformedMessage");

    c.send_raw(std::string(5000, 'x'));
    CHECK(read_until(c, "error").payload.at("code") == "MalformedMessage");

    // Still usable.
    c.send(make_hello(HelloRequest{"team", member("alice"), "t", TimerConfig{}}));
    read_until(c, "snapshot");
    CHECK(live.hub.subscriber_count("team") == 1);

    c.send_raw(R"({"payload":{"session":"team"},"type":"hello","v":9})");
    CHECK(read_until(c, "error").payload.at("code") == "UnsupportedVersion");
    const auto deadline = std::chrono::steady_clock::now() + 3s;
    bool closed = false;
    while (!closed && std::chrono::steady_clock::now() < deadline) {
        try {
            c.read(100ms);
        } catch (const ConnectionError&) {
            closed = true;
        }
    }
    CHECK(closed);
    CHECK(live.hub.subscriber_count("team") == 0);
}

TEST_CASE("disconnects unsubscribe and a reconnect converges")
{
    Live live;
    LineClient a;
    a.connect(live.tcp());
    a.send(make_hello(HelloRequest{"team", member("alice"), "t", TimerConfig{}}));
    read_until(a, "snapshot");
    {
        LineClient b;
        b.connect(live.tcp());
        b.send(make_hello(HelloRequest{"team", member("bob"), "t", std::nullopt}));
        read_until(b, "snapshot");
        CHECK(live.hub.subscriber_count("team") == 2);
    }
    const auto deadline = std::chrono::steady_clock::now() + 3s;
    while (live.hub.subscriber_count("team") != 1 && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(10ms);
    }
    CHECK(live.hub.subscriber_count("team") == 1);

    a.send(make_command("x", "story", json{{"id", "S-1"}}));
    read_until(a, "ack");
    LineClient b;
    b.connect(live.tcp());
    b.send(make_hello(HelloRequest{"team", member("bob"), "t", std::nullopt}));
    const WireMessage snap = read_until(b, "snapshot");
    CHECK(snap.payload.at("state").get<SessionState>() == *live.hub.snapshot("team"));
}

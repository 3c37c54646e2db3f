#include "pomo/wire.hpp"

#include <array>

namespace pomo {

namespace {

constexpr std::array<std::string_view, 7> kTypes{"hello", "command", "snapshot", "event", "presence", "ack", "error"};

[[noreturn]] void malformed(const std::string& why) { throw Error(Errc::MalformedMessage, why); }

} // namespace

bool is_known_type(std::string_view type)
{
    for (auto t : kTypes) {
        if (t == type) return true;
    }
    return false;
}

std::string encode(const WireMessage& m)
{
    json j{{"v", m.v}, {"type", m.type}, {"payload", m.payload}};
    if (m.seq) j["seq"] = *m.seq;
    if (m.server_time) j["server_time"] = *m.server_time;
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

WireMessage decode(std::string_view line)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        malformed(std::string("not JSON: ") + e.what());
    }
    if (!j.is_object()) malformed("message must be a JSON object");

    WireMessage m;
    const auto v = j.find("v");
    if (v == j.end() || !v->is_number_integer()) malformed("missing integer field 'v'");
    m.v = v->get<int>();

    const auto type = j.find("type");
    if (type == j.end() || !type->is_string()) malformed("missing string field 'type'");
    m.type = type->get<std::string>();
    if (!is_known_type(m.type)) malformed("unknown message type '" + m.type + "'");

    const auto payload = j.find("payload");
    if (payload == j.end() || !payload->is_object()) malformed("missing object field 'payload'");
    m.payload = *payload;

    if (const auto seq = j.find("seq"); seq != j.end()) {
        if (!seq->is_number_unsigned()) malformed("'seq' must be a non-negative integer");
        m.seq = seq->get<std::uint64_t>();
    }
    if (const auto st = j.find("server_time"); st != j.end()) {
        if (!st->is_number_integer()) malformed("'server_time' must be an integer");
        m.server_time = st->get<std::int64_t>();
    }
    for (const auto& [key, _] : j.items()) {
        if (key != "v" && key != "type" && key != "payload" && key != "seq" && key != "server_time") {
            malformed("unexpected field '" + key + "'");
        }
    }
    return m;
}

WireMessage make_hello(const HelloRequest& hello)
{
    WireMessage m;
    m.type = "hello";
    m.payload["session"] = hello.session_id;
    if (hello.member) m.payload["member"] = *hello.member;
    if (!hello.token.empty()) m.payload["token"] = hello.token;
    if (hello.create) m.payload["create"] = json{{"config", *hello.create}};
    return m;
}

HelloRequest parse_hello(const json& payload)
{
    HelloRequest h;
    try {
        h.session_id = payload.at("session").get<std::string>();
        if (payload.contains("member")) h.member = payload.at("member").get<Member>();
        h.token = payload.value("token", std::string{});
        if (payload.contains("create")) {
            const auto& c = payload.at("create");
            h.create = c.contains("config") ? c.at("config").get<TimerConfig>() : TimerConfig{};
        }
    } catch (const json::exception& e) {
        malformed(std::string("bad hello payload: ") + e.what());
    }
    if (h.session_id.empty()) malformed("hello needs a session id");
    return h;
}

WireMessage make_command(std::string_view command_id, std::string_view name, json args)
{
    WireMessage m;
    m.type = "command";
    m.payload = json{{"id", command_id}, {"name", name}, {"args", std::move(args)}};
    return m;
}

WireMessage make_snapshot(const SessionState& state, const json& status, Timestamp server_time)
{
    WireMessage m;
    m.type = "snapshot";
    m.seq = state.last_seq();
    m.server_time = to_ms(server_time);
    m.payload = json{{"state", state}, {"status", status}};
    return m;
}

WireMessage make_event(const LogEntry& entry, Timestamp server_time)
{
    WireMessage m;
    m.type = "event";
    m.seq = entry.seq;
    m.server_time = to_ms(server_time);
    m.payload = entry;
    return m;
}

WireMessage make_presence(const json& status, std::uint64_t seq, Timestamp server_time)
{
    WireMessage m;
    m.type = "presence";
    m.seq = seq;
    m.server_time = to_ms(server_time);
    m.payload = status;
    return m;
}

WireMessage make_ack(std::string_view command_id, std::string_view name, const json& result, std::uint64_t seq,
                     Timestamp server_time)
{
    WireMessage m;
    m.type = "ack";
    m.seq = seq;
    m.server_time = to_ms(server_time);
    m.payload = json{{"command_id", command_id}, {"name", name}, {"result", result}};
    return m;
}

WireMessage make_error(Errc code, std::string_view reason, std::optional<std::string> command_id, std::uint64_t seq,
                       Timestamp server_time)
{
    WireMessage m;
    m.type = "error";
    m.seq = seq;
    m.server_time = to_ms(server_time);
    m.payload = json{{"code", to_string(code)}, {"reason", reason}};
    if (command_id) m.payload["command_id"] = *command_id;
    return m;
}

bool LineBuffer::feed(std::string_view bytes, std::vector<std::string>& lines)
{
    bool ok = true;
    for (char c : bytes) {
        if (c == '\n') {
            if (!discarding_) {
                if (!partial_.empty() && partial_.back() == '\r') partial_.pop_back();
                lines.push_back(std::move(partial_));
            }
            partial_.clear();
            discarding_ = false;
            continue;
        }
        if (discarding_) continue;
        if (partial_.size() >= max_line_) {
            partial_.clear();
            discarding_ = true;
            ok = false;
            continue;
        }
        partial_.push_back(c);
    }
    return ok;
}

} // namespace pomo

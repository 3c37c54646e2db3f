#pragma once

// Newline-delimited JSON protocol. One message per line, UTF-8, object keys
// in lexicographic order so encodings are byte-stable.
//
//   {"payload":{...},"seq":12,"server_time":1700000000000,"type":"event","v":1}
//
// Types: hello, command (client to server); snapshot, event, presence, ack,
// error (server to client). `seq` and `server_time` are present on every
// server message and absent on client messages.

#include "pomo/codec.hpp"
#include "pomo/error.hpp"
#include "pomo/session.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pomo {

inline constexpr int kProtocolVersion = 1;

struct WireMessage
{
    int v{kProtocolVersion};
    std::string type;
    std::optional<std::uint64_t> seq;
    std::optional<std::int64_t> server_time;
    json payload = json::object();

    bool operator==(const WireMessage&) const = default;
};

bool is_known_type(std::string_view type);

/// Single line, no trailing newline.
std::string encode(const WireMessage& message);

/// Throws Error{MalformedMessage}. Does not reject other protocol versions;
/// that is the receiver's call.
WireMessage decode(std::string_view line);

// Builders for the message catalog.

struct HelloRequest
{
    std::string session_id;
    std::optional<Member> member;
    std::string token;
    std::optional<TimerConfig> create; // set to create the session
};

WireMessage make_hello(const HelloRequest& hello);
HelloRequest parse_hello(const json& payload);

WireMessage make_command(std::string_view command_id, std::string_view name, json args = json::object());

WireMessage make_snapshot(const SessionState& state, const json& status, Timestamp server_time);
WireMessage make_event(const LogEntry& entry, Timestamp server_time);
/// `status` is a status document; `seq` is the log position it reflects.
WireMessage make_presence(const json& status, std::uint64_t seq, Timestamp server_time);
WireMessage make_ack(std::string_view command_id, std::string_view name, const json& result, std::uint64_t seq,
                     Timestamp server_time);
WireMessage make_error(Errc code, std::string_view reason, std::optional<std::string> command_id, std::uint64_t seq,
                       Timestamp server_time);

/// Splits a byte stream into lines. Lines longer than the limit are reported
/// as overflow and skipped up to the next newline.
class LineBuffer
{
  public:
    explicit LineBuffer(std::size_t max_line = 1 << 20)
        : max_line_(max_line)
    {}

    /// Appends bytes; complete lines (without '\n' or trailing '\r') are
    /// pushed onto `lines`. Returns false if a line overflowed.
    bool feed(std::string_view bytes, std::vector<std::string>& lines);

  private:
    std::string partial_;
    std::size_t max_line_;
    bool discarding_{false};
};

} // namespace pomo

#pragma once

#include "pomo/session.hpp"
#include "pomo/wire.hpp"

#include <cstdint>
#include <optional>

namespace pomo {

/// A client's copy of a session, fed with server messages. Events are applied
/// through the replay path, never recomputed locally.
class ClientMirror
{
  public:
    enum class Outcome {
        Applied,
        Ignored,      // duplicate or unrelated message
        NeedSnapshot, // a seq gap or an event that does not apply; re-send hello
    };

    /// `local_receive` is the client's own clock when the line arrived.
    Outcome on_message(const WireMessage& message, Timestamp local_receive);

    bool synced() const { return state_.has_value() && !stale_; }
    bool stale() const { return stale_; }
    const std::optional<SessionState>& state() const { return state_; }
    std::uint64_t last_seq() const { return state_ ? state_->last_seq() : 0; }
    const std::optional<json>& presence() const { return presence_; }

    /// server_time - local receive time of the latest server message.
    std::int64_t skew_ms() const { return skew_ms_; }
    Timestamp server_now(Timestamp local) const { return local + Duration{skew_ms_}; }

    /// Whole seconds left in the current phase as seen from `local`, or
    /// nothing in Idle.
    std::optional<std::int64_t> seconds_remaining(Timestamp local) const;

  private:
    std::optional<SessionState> state_;
    std::optional<json> presence_;
    std::int64_t skew_ms_{0};
    bool stale_{false};
};

} // namespace pomo

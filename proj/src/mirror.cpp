#include "pomo/mirror.hpp"

#include "pomo/codec.hpp"

namespace pomo {

ClientMirror::Outcome ClientMirror::on_message(const WireMessage& m, Timestamp local_receive)
{
    if (m.server_time) skew_ms_ = *m.server_time - to_ms(local_receive);

    if (m.type == "snapshot") {
        try {
            state_ = m.payload.at("state").get<SessionState>();
        } catch (const json::exception&) {
            stale_ = true;
            return Outcome::NeedSnapshot;
        }
        if (m.payload.contains("status")) presence_ = m.payload.at("status");
        stale_ = false;
        return Outcome::Applied;
    }
    if (m.type == "presence") {
        presence_ = m.payload;
        return Outcome::Applied;
    }
    if (m.type != "event") return Outcome::Ignored;
    if (!state_ || stale_) return Outcome::NeedSnapshot;

    if (!m.seq) {
        stale_ = true;
        return Outcome::NeedSnapshot;
    }
    if (*m.seq <= state_->last_seq()) return Outcome::Ignored;
    if (*m.seq != state_->last_seq() + 1) {
        stale_ = true;
        return Outcome::NeedSnapshot;
    }
    try {
        apply(*state_, m.payload.get<LogEntry>());
    } catch (const std::exception&) {
        stale_ = true;
        return Outcome::NeedSnapshot;
    }
    return Outcome::Applied;
}

std::optional<std::int64_t> ClientMirror::seconds_remaining(Timestamp local) const
{
    if (!state_ || state_->clock.phase == Phase::Idle) return std::nullopt;
    const auto left = state_->clock.phase_deadline - server_now(local);
    const std::int64_t ms = std::max<std::int64_t>(0, left.count());
    return (ms + 999) / 1000;
}

} // namespace pomo

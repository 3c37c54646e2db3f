#pragma once

// Transport-independent core of the server. Connections hand it raw lines and
// receive encoded lines back through Peer::send. All commands of one session
// run under that session's lock, so each session's log is a total order and
// every subscriber sees the same messages in the same order.

#include "pomo/archive.hpp"
#include "pomo/session.hpp"
#include "pomo/wire.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pomo {

class Clock
{
  public:
    virtual ~Clock() = default;
    virtual Timestamp now() const = 0;
};

/// Scripted time for tests.
class ManualClock : public Clock
{
  public:
    explicit ManualClock(Timestamp start = at_ms(0))
        : ms_(to_ms(start))
    {}

    Timestamp now() const override { return at_ms(ms_.load()); }
    void set(Timestamp t) { ms_.store(to_ms(t)); }
    void advance(Duration d) { ms_.fetch_add(d.count()); }

  private:
    std::atomic<std::int64_t> ms_;
};

/// Unix milliseconds read once at startup, then driven by the steady clock so
/// wall-clock jumps never move a deadline.
class SteadyServerClock : public Clock
{
  public:
    SteadyServerClock();
    Timestamp now() const override;

  private:
    std::int64_t unix_ms_at_start_;
    std::chrono::steady_clock::time_point steady_start_;
};

/// One connection as the hub sees it. send() must not block: it queues the
/// line and returns false when the connection's queue is full.
class Peer
{
  public:
    virtual ~Peer() = default;
    virtual bool send(const std::string& line) = 0;
    virtual void close() = 0;
};

struct HubConfig
{
    std::filesystem::path data_dir; // empty keeps archives in memory
    TimerConfig session_defaults;
    EstimationRules estimation;
    int utc_offset_minutes{0};
    std::size_t dedupe_window{1024}; // remembered command ids per session
};

class Hub
{
  public:
    Hub(HubConfig config, std::shared_ptr<Clock> clock);
    ~Hub();

    Hub(const Hub&) = delete;
    Hub& operator=(const Hub&) = delete;

    void attach(const std::shared_ptr<Peer>& peer);
    /// Handles one line from `peer`. Replies go to the peer; session events
    /// go to every subscriber of the session.
    void receive(const std::shared_ptr<Peer>& peer, std::string_view line);
    void detach(const std::shared_ptr<Peer>& peer);

    /// Applies due transitions and day boundaries in every session and emits
    /// presence when the shared minutes change. Call about once a second.
    void tick();

    std::optional<json> status(std::string_view session_id);
    std::optional<SessionState> snapshot(std::string_view session_id);
    std::vector<std::string> sessions() const;
    std::optional<Archive> archive(std::string_view session_id) const;
    std::size_t subscriber_count(std::string_view session_id) const;

    /// Archives that could not be loaded at startup, one message each.
    const std::vector<std::string>& load_errors() const { return load_errors_; }

    Timestamp now() const { return clock_->now(); }
    const HubConfig& config() const { return config_; }

  private:
    struct Subscriber
    {
        std::shared_ptr<Peer> peer;
        std::string member_id;
    };

    struct Host
    {
        std::mutex mu;
        SessionState state;
        std::string token;
        Archive archive;
        int utc_offset{0};
        std::string current_day;
        std::vector<Subscriber> subscribers;
        std::map<std::string, std::string> responses; // dedupe key -> encoded reply
        std::deque<std::string> response_order;
        std::optional<json> last_presence;

        Host(SessionState s, std::string t, Archive a)
            : state(std::move(s))
            , token(std::move(t))
            , archive(std::move(a))
        {}
    };

    struct Conn
    {
        std::weak_ptr<Peer> peer;
        std::string session_id; // empty until a hello succeeds
        std::string member_id;
    };

    using Drops = std::vector<std::shared_ptr<Peer>>;

    void load_archives();
    std::shared_ptr<Host> find_host(std::string_view session_id) const;
    void handle_hello(const std::shared_ptr<Peer>& peer, const WireMessage& msg);
    void handle_command(const std::shared_ptr<Peer>& peer, const WireMessage& msg);

    Timestamp host_now(const Host& host) const;
    void catch_up(Host& host, Timestamp now, Drops& drops);
    /// Persists and broadcasts every log entry after `from_seq`.
    void publish(Host& host, std::uint64_t from_seq, Timestamp now, Drops& drops);
    void publish_presence(Host& host, Timestamp now, bool force, Drops& drops);
    void deliver(Host& host, const std::string& line, Drops& drops);
    void unsubscribe(Host& host, const Peer* peer);
    std::set<std::string> online(const Host& host) const;
    json run_command(Host& host, const std::string& member_id, const std::string& name, const json& args,
                     Timestamp now);
    void remember(Host& host, const std::string& key, const std::string& line);

    void reply(const std::shared_ptr<Peer>& peer, const WireMessage& msg);
    void drop(const std::shared_ptr<Peer>& peer);
    void finish(const Drops& drops);

    HubConfig config_;
    std::shared_ptr<Clock> clock_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Host>, std::less<>> hosts_;
    std::map<const Peer*, Conn> conns_;
    std::vector<std::string> load_errors_;
};

/// Letters, digits, '.', '_' and '-'; 1 to 64 characters.
bool valid_session_id(std::string_view id);

/// Random hex string for tokens and command ids.
std::string random_id(std::size_t bytes = 8);

} // namespace pomo

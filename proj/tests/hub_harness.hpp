#pragma once

// In-process clients for the hub: a peer that records every line it is sent
// and a client that feeds those lines into a ClientMirror.

#include "pomo/hub.hpp"
#include "pomo/mirror.hpp"

#include <limits>
#include <mutex>
#include <string>
#include <vector>

namespace harness {

using namespace pomo;

class FakePeer : public Peer
{
  public:
    explicit FakePeer(std::size_t capacity = std::numeric_limits<std::size_t>::max())
        : capacity_(capacity)
    {}

    bool send(const std::string& line) override
    {
        std::lock_guard lock(mu_);
        if (closed_ || lines_.size() - taken_ >= capacity_) return false;
        lines_.push_back(line);
        return true;
    }

    void close() override
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }

    /// Lines not yet taken, oldest first.
    std::vector<std::string> take()
    {
        std::lock_guard lock(mu_);
        std::vector<std::string> out(lines_.begin() + static_cast<std::ptrdiff_t>(taken_), lines_.end());
        taken_ = lines_.size();
        return out;
    }

    std::vector<std::string> all()
    {
        std::lock_guard lock(mu_);
        return lines_;
    }

    bool closed()
    {
        std::lock_guard lock(mu_);
        return closed_;
    }

    void reopen()
    {
        std::lock_guard lock(mu_);
        closed_ = false;
        taken_ = lines_.size();
    }

  private:
    std::mutex mu_;
    std::vector<std::string> lines_;
    std::size_t taken_{0};
    std::size_t capacity_;
    bool closed_{false};
};

class Client
{
  public:
    Client(Hub& hub, std::string member, std::size_t capacity = std::numeric_limits<std::size_t>::max())
        : hub_(hub)
        , member_(std::move(member))
        , peer_(std::make_shared<FakePeer>(capacity))
    {
        hub_.attach(peer_);
    }

    ~Client() { hub_.detach(peer_); }

    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void send(const WireMessage& m) { hub_.receive(peer_, encode(m)); }
    void send_raw(const std::string& line) { hub_.receive(peer_, line); }

    /// Returns the snapshot or error answering the hello.
    WireMessage hello(const std::string& session, const std::string& token,
                      std::optional<TimerConfig> create = std::nullopt, Role role = Role::Developer)
    {
        send(make_hello(HelloRequest{session, Member{member_, member_, role, true}, token, create}));
        for (const auto& m : pump()) {
            if (m.type == "snapshot" || m.type == "error") return m;
        }
        return WireMessage{};
    }

    /// Sends a command and returns its ack or error.
    WireMessage command(const std::string& name, json args = json::object(), std::string id = {})
    {
        if (id.empty()) id = member_ + "-" + std::to_string(++next_id_);
        send(make_command(id, name, std::move(args)));
        return reply_to(id);
    }

    WireMessage reply_to(const std::string& id)
    {
        pump();
        for (auto it = seen_.rbegin(); it != seen_.rend(); ++it) {
            if ((it->type == "ack" || it->type == "error") && it->payload.value("command_id", "") == id) return *it;
        }
        return WireMessage{};
    }

    /// Feeds pending lines to the mirror and returns them.
    std::vector<WireMessage> pump()
    {
        std::vector<WireMessage> got;
        for (const auto& line : peer_->take()) {
            WireMessage m = decode(line);
            if (mirror_.on_message(m, hub_.now()) == ClientMirror::Outcome::NeedSnapshot) needs_snapshot_ = true;
            if (m.type == "snapshot") needs_snapshot_ = false;
            seen_.push_back(m);
            got.push_back(std::move(m));
        }
        return got;
    }

    std::vector<WireMessage> of_type(const std::string& type) const
    {
        std::vector<WireMessage> out;
        for (const auto& m : seen_) {
            if (m.type == type) out.push_back(m);
        }
        return out;
    }

    const std::string& member() const { return member_; }
    const ClientMirror& mirror() const { return mirror_; }
    ClientMirror& mirror() { return mirror_; }
    const std::shared_ptr<FakePeer>& peer() const { return peer_; }
    const std::vector<WireMessage>& seen() const { return seen_; }
    bool needs_snapshot() const { return needs_snapshot_; }

  private:
    Hub& hub_;
    std::string member_;
    std::shared_ptr<FakePeer> peer_;
    ClientMirror mirror_;
    std::vector<WireMessage> seen_;
    int next_id_{0};
    bool needs_snapshot_{false};
};

} // namespace harness

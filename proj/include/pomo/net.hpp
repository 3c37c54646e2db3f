#pragma once

// Sockets around the hub: a newline-delimited JSON listener, and an HTTP
// listener that serves GET /status/<session> and upgrades /ws to a WebSocket
// carrying the same messages (one message per text frame). Plus small blocking
// clients for the CLI and the tests.

#include "pomo/hub.hpp"
#include "pomo/wire.hpp"

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace pomo {

struct Endpoint
{
    std::string host;
    unsigned short port{0};
};

/// "host:port", "[v6]:port" or ":port" (all interfaces). Throws
/// Error{InvalidArgument}.
Endpoint parse_endpoint(std::string_view text);

struct ServerOptions
{
    std::string listen{"127.0.0.1:7878"};
    std::string http_listen{"127.0.0.1:7879"}; // empty disables status and WebSocket
    std::size_t max_queue{256};                // outgoing messages per connection
    std::size_t max_line{1 << 20};
    std::chrono::milliseconds tick{250};
    bool stop_on_signals{false}; // SIGINT / SIGTERM end wait()
};

class Server
{
  public:
    Server(Hub& hub, ServerOptions options);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds both listeners and starts serving on a background thread.
    void start();
    void stop();
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait();

    /// Bound ports, useful when the options asked for port 0.
    unsigned short port() const;
    unsigned short http_port() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class ConnectionError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Blocking NDJSON client.
class LineClient
{
  public:
    LineClient();
    ~LineClient();

    /// Throws ConnectionError.
    void connect(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(5));
    void send(const WireMessage& message);
    void send_raw(std::string_view line);
    /// Next decoded message, or nothing after `timeout`. Throws ConnectionError
    /// when the server closes the connection.
    std::optional<WireMessage> read(std::chrono::milliseconds timeout);
    std::optional<std::string> read_line(std::chrono::milliseconds timeout);
    void close();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Blocking WebSocket client. A read timeout closes the connection.
class WsClient
{
  public:
    WsClient();
    ~WsClient();

    void connect(const Endpoint& endpoint, std::string_view target = "/ws",
                 std::chrono::milliseconds timeout = std::chrono::seconds(5));
    void send(const WireMessage& message);
    std::optional<WireMessage> read(std::chrono::milliseconds timeout);
    void close();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct HttpResponse
{
    int status{0};
    std::string content_type;
    std::string body;
};

/// One GET request. Throws ConnectionError.
HttpResponse http_get(const Endpoint& endpoint, std::string_view target,
                      std::chrono::milliseconds timeout = std::chrono::seconds(5));

} // namespace pomo

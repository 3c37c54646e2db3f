#include "pomo/net.hpp"

#include "pomo/error.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <array>
#include <condition_variable>
#include <csignal>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

namespace pomo {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using boost::system::error_code;

Endpoint parse_endpoint(std::string_view text)
{
    Endpoint ep;
    std::string_view port;
    if (!text.empty() && text.front() == '[') {
        const auto close = text.find("]:");
        if (close == std::string_view::npos) throw Error(Errc::InvalidArgument, "bad endpoint '" + std::string(text) + "'");
        ep.host = std::string(text.substr(1, close - 1));
        port = text.substr(close + 2);
    } else {
        const auto colon = text.rfind(':');
        if (colon == std::string_view::npos) {
            throw Error(Errc::InvalidArgument, "endpoint '" + std::string(text) + "' needs host:port");
        }
        ep.host = std::string(text.substr(0, colon));
        port = text.substr(colon + 1);
    }
    if (ep.host.empty()) ep.host = "0.0.0.0";
    unsigned long value = 0;
    if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string_view::npos ||
        (value = std::stoul(std::string(port))) > 65535) {
        throw Error(Errc::InvalidArgument, "bad port in endpoint '" + std::string(text) + "'");
    }
    ep.port = static_cast<unsigned short>(value);
    return ep;
}

namespace {

tcp::endpoint listen_endpoint(asio::io_context& io, const Endpoint& ep)
{
    tcp::resolver resolver(io);
    error_code ec;
    auto results = resolver.resolve(ep.host, std::to_string(ep.port), tcp::resolver::passive, ec);
    if (ec || results.empty()) {
        throw Error(Errc::InvalidArgument, "cannot resolve " + ep.host + ": " + ec.message());
    }
    return results.begin()->endpoint();
}

void listen_on(tcp::acceptor& acceptor, const tcp::endpoint& ep)
{
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
}

/// Outgoing queue shared by both connection kinds. Lines are queued under the
/// mutex and written one at a time on the io thread.
class QueuedPeer : public Peer
{
  public:
    explicit QueuedPeer(std::size_t max_queue)
        : max_queue_(max_queue)
    {}

    bool send(const std::string& line) override
    {
        bool kick = false;
        {
            std::lock_guard lock(mu_);
            if (closing_ || dead_ || out_.size() >= max_queue_) return false;
            out_.push_back(frame(line));
            kick = !writing_;
            writing_ = true;
        }
        if (kick) post_write();
        return true;
    }

    void close() override
    {
        bool idle = false;
        {
            std::lock_guard lock(mu_);
            if (closing_ || dead_) return;
            closing_ = true;
            idle = !writing_;
        }
        if (idle) post_shutdown();
    }

    /// Marks the connection unusable without touching the socket.
    void kill()
    {
        std::lock_guard lock(mu_);
        dead_ = true;
    }

  protected:
    virtual std::string frame(const std::string& line) const = 0;
    virtual void post_write() = 0;
    virtual void post_shutdown() = 0;

    /// The line to write next, or nothing when the queue drained. A drained
    /// queue on a closing connection triggers the shutdown.
    const std::string* next_line(bool popped)
    {
        bool shutdown = false;
        const std::string* line = nullptr;
        {
            std::lock_guard lock(mu_);
            if (popped && !out_.empty()) out_.pop_front();
            if (out_.empty() || dead_) {
                writing_ = false;
                shutdown = closing_;
            } else {
                line = &out_.front();
            }
        }
        if (shutdown) post_shutdown();
        return line;
    }

    bool dead() const
    {
        std::lock_guard lock(mu_);
        return dead_;
    }

  private:
    mutable std::mutex mu_;
    std::deque<std::string> out_;
    std::size_t max_queue_;
    bool writing_{false};
    bool closing_{false};
    bool dead_{false};
};

class Registry
{
  public:
    void add(const std::shared_ptr<QueuedPeer>& p)
    {
        std::lock_guard lock(mu_);
        std::erase_if(peers_, [](const auto& w) { return w.expired(); });
        peers_.push_back(p);
    }

    std::vector<std::shared_ptr<QueuedPeer>> live()
    {
        std::lock_guard lock(mu_);
        std::vector<std::shared_ptr<QueuedPeer>> out;
        for (const auto& w : peers_) {
            if (auto p = w.lock()) out.push_back(std::move(p));
        }
        return out;
    }

  private:
    std::mutex mu_;
    std::vector<std::weak_ptr<QueuedPeer>> peers_;
};

class TcpConn : public QueuedPeer, public std::enable_shared_from_this<TcpConn>
{
  public:
    TcpConn(Hub& hub, tcp::socket socket, const ServerOptions& options)
        : QueuedPeer(options.max_queue)
        , hub_(hub)
        , socket_(std::move(socket))
        , lines_(options.max_line)
    {}

    void start()
    {
        hub_.attach(shared_from_this());
        read();
    }

  protected:
    std::string frame(const std::string& line) const override { return line + "\n"; }

    void post_write() override
    {
        asio::post(socket_.get_executor(), [self = shared_from_this()] { self->write(false); });
    }

    void post_shutdown() override
    {
        asio::post(socket_.get_executor(), [self = shared_from_this()] { self->shutdown(); });
    }

  private:
    void read()
    {
        socket_.async_read_some(asio::buffer(buf_), [self = shared_from_this()](error_code ec, std::size_t n) {
            if (ec || self->dead()) {
                self->shutdown();
                return;
            }
            std::vector<std::string> lines;
            const bool ok = self->lines_.feed(std::string_view(self->buf_.data(), n), lines);
            for (const auto& line : lines) {
                if (!line.empty()) self->hub_.receive(self, line);
            }
            if (!ok) {
                self->send(encode(make_error(Errc::MalformedMessage, "line too long", std::nullopt, 0,
                                             self->hub_.now())));
            }
            self->read();
        });
    }

    void write(bool popped)
    {
        const std::string* line = next_line(popped);
        if (!line) return;
        asio::async_write(socket_, asio::buffer(*line), [self = shared_from_this()](error_code ec, std::size_t) {
            if (ec) {
                self->shutdown();
                return;
            }
            self->write(true);
        });
    }

    void shutdown()
    {
        error_code ignored;
        socket_.shutdown(tcp::socket::shutdown_both, ignored);
        socket_.close(ignored);
        if (!detached_.exchange(true)) {
            kill();
            hub_.detach(shared_from_this());
        }
    }

    Hub& hub_;
    tcp::socket socket_;
    LineBuffer lines_;
    std::array<char, 8192> buf_{};
    std::atomic<bool> detached_{false};
};

class WsConn : public QueuedPeer, public std::enable_shared_from_this<WsConn>
{
  public:
    WsConn(Hub& hub, tcp::socket socket, const ServerOptions& options)
        : QueuedPeer(options.max_queue)
        , hub_(hub)
        , ws_(std::move(socket))
    {
        ws_.read_message_max(options.max_line);
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.text(true);
    }

    void accept(http::request<http::string_body> req)
    {
        ws_.async_accept(req, [self = shared_from_this()](error_code ec) {
            if (ec) return;
            self->hub_.attach(self);
            self->read();
        });
    }

  protected:
    std::string frame(const std::string& line) const override { return line; }

    void post_write() override
    {
        asio::post(ws_.get_executor(), [self = shared_from_this()] { self->write(false); });
    }

    void post_shutdown() override
    {
        asio::post(ws_.get_executor(), [self = shared_from_this()] {
            if (!self->ws_.is_open()) {
                self->finish();
                return;
            }
            self->ws_.async_close(websocket::close_code::normal, [self](error_code) { self->finish(); });
        });
    }

  private:
    void read()
    {
        ws_.async_read(buffer_, [self = shared_from_this()](error_code ec, std::size_t) {
            if (ec || self->dead()) {
                self->finish();
                return;
            }
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            std::size_t start = 0;
            while (start <= text.size()) {
                auto end = text.find('\n', start);
                if (end == std::string::npos) end = text.size();
                std::string line = text.substr(start, end - start);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (!line.empty()) self->hub_.receive(self, line);
                start = end + 1;
            }
            self->read();
        });
    }

    void write(bool popped)
    {
        const std::string* line = next_line(popped);
        if (!line) return;
        ws_.async_write(asio::buffer(*line), [self = shared_from_this()](error_code ec, std::size_t) {
            if (ec) {
                self->finish();
                return;
            }
            self->write(true);
        });
    }

    void finish()
    {
        error_code ignored;
        beast::get_lowest_layer(ws_).socket().close(ignored);
        if (!detached_.exchange(true)) {
            kill();
            hub_.detach(shared_from_this());
        }
    }

    Hub& hub_;
    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::atomic<bool> detached_{false};
};

class HttpConn : public std::enable_shared_from_this<HttpConn>
{
  public:
    HttpConn(Hub& hub, tcp::socket socket, const ServerOptions& options, Registry& registry)
        : hub_(hub)
        , stream_(std::move(socket))
        , options_(options)
        , registry_(registry)
    {}

    void start()
    {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](error_code ec, std::size_t) {
            if (ec) return;
            self->route();
        });
    }

  private:
    void route()
    {
        const std::string target(req_.target());
        if (websocket::is_upgrade(req_)) {
            if (target != "/ws") {
                respond(http::status::not_found, json{{"code", "NotFound"}, {"reason", "WebSocket lives at /ws"}});
                return;
            }
            stream_.expires_never();
            auto conn = std::make_shared<WsConn>(hub_, stream_.release_socket(), options_);
            registry_.add(conn);
            conn->accept(std::move(req_));
            return;
        }
        if (req_.method() != http::verb::get) {
            respond(http::status::method_not_allowed, json{{"code", "MethodNotAllowed"}, {"reason", "GET only"}});
            return;
        }
        const std::string_view prefix = "/status/";
        if (target == "/status" || target == "/status/") {
            respond(http::status::ok, json{{"sessions", hub_.sessions()}, {"server_time", to_ms(hub_.now())}});
        } else if (target.rfind(prefix, 0) == 0) {
            const std::string id = target.substr(prefix.size());
            if (auto doc = hub_.status(id)) {
                respond(http::status::ok, *doc);
            } else {
                respond(http::status::not_found,
                        json{{"code", to_string(Errc::UnknownSession)}, {"reason", "no session " + id}});
            }
        } else {
            respond(http::status::not_found, json{{"code", "NotFound"}, {"reason", "no route " + target}});
        }
    }

    void respond(http::status status, const json& body)
    {
        auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res->set(http::field::server, "pomod");
        res->set(http::field::content_type, "application/json");
        res->set(http::field::access_control_allow_origin, "*");
        res->keep_alive(false);
        res->body() = body.dump() + "\n";
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](error_code, std::size_t) {
            error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    Hub& hub_;
    beast::tcp_stream stream_;
    const ServerOptions& options_;
    Registry& registry_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

} // namespace

struct Server::Impl
{
    Hub& hub;
    ServerOptions options;
    asio::io_context io;
    tcp::acceptor tcp_acceptor{io};
    tcp::acceptor http_acceptor{io};
    asio::steady_timer timer{io};
    asio::signal_set signals{io};
    std::thread thread;
    Registry registry;
    unsigned short port{0};
    unsigned short http_port{0};
    std::mutex mu;
    bool finished{false};

    Impl(Hub& h, ServerOptions o)
        : hub(h)
        , options(std::move(o))
    {}

    void accept_tcp()
    {
        tcp_acceptor.async_accept([this](error_code ec, tcp::socket socket) {
            if (ec) return;
            auto conn = std::make_shared<TcpConn>(hub, std::move(socket), options);
            registry.add(conn);
            conn->start();
            accept_tcp();
        });
    }

    void accept_http()
    {
        http_acceptor.async_accept([this](error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<HttpConn>(hub, std::move(socket), options, registry)->start();
            accept_http();
        });
    }

    void schedule_tick()
    {
        timer.expires_after(options.tick);
        timer.async_wait([this](error_code ec) {
            if (ec) return;
            hub.tick();
            schedule_tick();
        });
    }

    /// Runs once after the io thread has stopped: connections still held by
    /// the hub are detached so it never writes to a dead socket.
    void cleanup()
    {
        std::lock_guard lock(mu);
        if (finished) return;
        finished = true;
        for (const auto& p : registry.live()) {
            p->kill();
            hub.detach(p);
        }
    }
};

Server::Server(Hub& hub, ServerOptions options)
    : impl_(std::make_unique<Impl>(hub, std::move(options)))
{}

Server::~Server() { stop(); }

void Server::start()
{
    auto& im = *impl_;
    listen_on(im.tcp_acceptor, listen_endpoint(im.io, parse_endpoint(im.options.listen)));
    im.port = im.tcp_acceptor.local_endpoint().port();
    if (!im.options.http_listen.empty()) {
        listen_on(im.http_acceptor, listen_endpoint(im.io, parse_endpoint(im.options.http_listen)));
        im.http_port = im.http_acceptor.local_endpoint().port();
        im.accept_http();
    }
    im.accept_tcp();
    if (im.options.stop_on_signals) {
        im.signals.add(SIGINT);
        im.signals.add(SIGTERM);
        im.signals.async_wait([&im](error_code ec, int) {
            if (!ec) im.io.stop();
        });
    }
    im.schedule_tick();
    im.thread = std::thread([&im] { im.io.run(); });
}

void Server::stop()
{
    if (!impl_) return;
    impl_->io.stop();
    wait();
}

void Server::wait()
{
    auto& im = *impl_;
    if (im.thread.joinable() && im.thread.get_id() != std::this_thread::get_id()) im.thread.join();
    if (!im.thread.joinable()) im.cleanup();
}

unsigned short Server::port() const { return impl_->port; }
unsigned short Server::http_port() const { return impl_->http_port; }

// ---------------------------------------------------------------------------
// Clients

namespace {

/// Runs `io` until `done` or the deadline. Returns false on timeout.
bool run_until(asio::io_context& io, const bool& done, std::chrono::steady_clock::time_point deadline)
{
    io.restart();
    while (!done) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) return false;
        io.run_one_for(deadline - now);
    }
    return true;
}

tcp::resolver::results_type resolve(asio::io_context& io, const Endpoint& ep)
{
    tcp::resolver resolver(io);
    error_code ec;
    auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
    if (ec) throw ConnectionError("cannot resolve " + ep.host + ": " + ec.message());
    return results;
}

std::string describe(const Endpoint& ep) { return ep.host + ":" + std::to_string(ep.port); }

} // namespace

struct LineClient::Impl
{
    asio::io_context io;
    tcp::socket socket{io};
    LineBuffer buffer;
    std::deque<std::string> lines;
    std::array<char, 8192> chunk{};
    bool closed{false};
};

LineClient::LineClient()
    : impl_(std::make_unique<Impl>())
{}

LineClient::~LineClient() { close(); }

void LineClient::connect(const Endpoint& endpoint, std::chrono::milliseconds timeout)
{
    auto& im = *impl_;
    const auto results = resolve(im.io, endpoint);
    bool done = false;
    error_code result;
    asio::async_connect(im.socket, results, [&](error_code ec, const tcp::endpoint&) {
        result = ec;
        done = true;
    });
    if (!run_until(im.io, done, std::chrono::steady_clock::now() + timeout)) {
        error_code ignored;
        im.socket.close(ignored);
        im.io.restart();
        im.io.run();
        throw ConnectionError("timed out connecting to " + describe(endpoint));
    }
    if (result) throw ConnectionError("cannot connect to " + describe(endpoint) + ": " + result.message());
    im.closed = false;
}

void LineClient::send(const WireMessage& message) { send_raw(encode(message)); }

void LineClient::send_raw(std::string_view line)
{
    std::string data(line);
    data += '\n';
    error_code ec;
    asio::write(impl_->socket, asio::buffer(data), ec);
    if (ec) throw ConnectionError("send failed: " + ec.message());
}

std::optional<std::string> LineClient::read_line(std::chrono::milliseconds timeout)
{
    auto& im = *impl_;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (im.lines.empty()) {
        if (im.closed) throw ConnectionError("connection closed by server");
        bool done = false;
        error_code result;
        std::size_t got = 0;
        im.socket.async_read_some(asio::buffer(im.chunk), [&](error_code ec, std::size_t n) {
            result = ec;
            got = n;
            done = true;
        });
        if (!run_until(im.io, done, deadline)) {
            error_code ignored;
            im.socket.cancel(ignored);
            run_until(im.io, done, std::chrono::steady_clock::now() + std::chrono::seconds(5));
            if (result == asio::error::operation_aborted) return std::nullopt;
        }
        if (got > 0) {
            std::vector<std::string> out;
            im.buffer.feed(std::string_view(im.chunk.data(), got), out);
            for (auto& l : out) {
                if (!l.empty()) im.lines.push_back(std::move(l));
            }
        }
        if (result) {
            im.closed = true;
            if (im.lines.empty()) throw ConnectionError("connection closed by server");
        }
    }
    std::string line = std::move(im.lines.front());
    im.lines.pop_front();
    return line;
}

std::optional<WireMessage> LineClient::read(std::chrono::milliseconds timeout)
{
    auto line = read_line(timeout);
    if (!line) return std::nullopt;
    return decode(*line);
}

void LineClient::close()
{
    if (!impl_) return;
    error_code ignored;
    impl_->socket.shutdown(tcp::socket::shutdown_both, ignored);
    impl_->socket.close(ignored);
    impl_->closed = true;
}

struct WsClient::Impl
{
    asio::io_context io;
    websocket::stream<beast::tcp_stream> ws{io};
    bool open{false};
};

WsClient::WsClient()
    : impl_(std::make_unique<Impl>())
{}

WsClient::~WsClient() { close(); }

void WsClient::connect(const Endpoint& endpoint, std::string_view target, std::chrono::milliseconds timeout)
{
    auto& im = *impl_;
    const auto results = resolve(im.io, endpoint);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    bool done = false;
    error_code result;
    beast::get_lowest_layer(im.ws).expires_after(timeout);
    beast::get_lowest_layer(im.ws).async_connect(results, [&](error_code ec, const tcp::endpoint&) {
        result = ec;
        done = true;
    });
    if (!run_until(im.io, done, deadline) || result) {
        throw ConnectionError("cannot connect to " + describe(endpoint) + ": " + result.message());
    }
    beast::get_lowest_layer(im.ws).expires_never();
    im.ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
    done = false;
    im.ws.async_handshake(endpoint.host + ":" + std::to_string(endpoint.port), std::string(target),
                          [&](error_code ec) {
                              result = ec;
                              done = true;
                          });
    if (!run_until(im.io, done, deadline) || result) {
        throw ConnectionError("WebSocket handshake with " + describe(endpoint) + " failed: " + result.message());
    }
    im.ws.text(true);
    im.open = true;
}

void WsClient::send(const WireMessage& message)
{
    auto& im = *impl_;
    error_code ec;
    im.ws.write(asio::buffer(encode(message)), ec);
    if (ec) throw ConnectionError("send failed: " + ec.message());
}

std::optional<WireMessage> WsClient::read(std::chrono::milliseconds timeout)
{
    auto& im = *impl_;
    if (!im.open) throw ConnectionError("connection closed");
    beast::flat_buffer buffer;
    bool done = false;
    error_code result;
    im.ws.async_read(buffer, [&](error_code ec, std::size_t) {
        result = ec;
        done = true;
    });
    if (!run_until(im.io, done, std::chrono::steady_clock::now() + timeout)) {
        error_code ignored;
        beast::get_lowest_layer(im.ws).socket().close(ignored);
        run_until(im.io, done, std::chrono::steady_clock::now() + std::chrono::seconds(5));
        im.open = false;
        return std::nullopt;
    }
    if (result) {
        im.open = false;
        throw ConnectionError("connection closed by server: " + result.message());
    }
    return decode(beast::buffers_to_string(buffer.data()));
}

void WsClient::close()
{
    if (!impl_ || !impl_->open) return;
    auto& im = *impl_;
    im.open = false;
    bool done = false;
    im.ws.async_close(websocket::close_code::normal, [&](error_code) { done = true; });
    if (!run_until(im.io, done, std::chrono::steady_clock::now() + std::chrono::seconds(2))) {
        error_code ignored;
        beast::get_lowest_layer(im.ws).socket().close(ignored);
    }
}

HttpResponse http_get(const Endpoint& endpoint, std::string_view target, std::chrono::milliseconds timeout)
{
    asio::io_context io;
    const auto results = resolve(io, endpoint);
    beast::tcp_stream stream(io);
    http::request<http::empty_body> req{http::verb::get, std::string(target), 11};
    req.set(http::field::host, endpoint.host);
    req.set(http::field::user_agent, "pomo");
    http::response<http::string_body> res;
    beast::flat_buffer buffer;
    error_code result;

    stream.expires_after(timeout);
    stream.async_connect(results, [&](error_code ec, const tcp::endpoint&) {
        if (ec) {
            result = ec;
            return;
        }
        http::async_write(stream, req, [&](error_code ec2, std::size_t) {
            if (ec2) {
                result = ec2;
                return;
            }
            http::async_read(stream, buffer, res, [&](error_code ec3, std::size_t) { result = ec3; });
        });
    });
    io.run();
    if (result) throw ConnectionError("GET " + std::string(target) + " from " + describe(endpoint) + ": " +
                                      result.message());
    error_code ignored;
    stream.socket().shutdown(tcp::socket::shutdown_both, ignored);
    return HttpResponse{static_cast<int>(res.result_int()), std::string(res[http::field::content_type]), res.body()};
}

} // namespace pomo

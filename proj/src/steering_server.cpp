#include "mzsim/steering_server.hpp"

#include <atomic>
#include <chrono>
#include <list>
#include <thread>

#include <boost/asio.hpp>

#include "mzsim/error.hpp"
#include "mzsim/protocol.hpp"

namespace mzsim {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

struct Connection {
    explicit Connection(tcp::socket s) : socket(std::move(s)) {}

    bool send(const wire::json& message) {
        const auto bytes = wire::encode(message);
        std::lock_guard lock(write_mutex);
        boost::system::error_code ec;
        asio::write(socket, asio::buffer(bytes), ec);
        return !ec;
    }

    // Wakes a blocked reader; the reader closes the socket itself.
    void shutdown() {
        std::lock_guard lock(write_mutex);
        boost::system::error_code ec;
        socket.shutdown(tcp::socket::shutdown_both, ec);
    }

    void close() {
        std::lock_guard lock(write_mutex);
        boost::system::error_code ec;
        socket.shutdown(tcp::socket::shutdown_both, ec);
        socket.close(ec);
    }

    tcp::socket socket;
    std::mutex write_mutex;
    std::atomic<bool> open{true};
};

struct Subscription {
    std::shared_ptr<Session> session;
    std::weak_ptr<Connection> connection;
};

} // namespace

struct SteeringServer::Impl {
    explicit Impl(ServerOptions o) : options(std::move(o)), acceptor(io) {}

    ServerOptions options;
    SessionRegistry registry;
    asio::io_context io;
    tcp::acceptor acceptor;
    std::atomic<bool> running{false};

    std::thread accept_thread;
    std::thread ticker_thread;
    std::mutex mutex;  // guards connections, readers, subscriptions
    std::list<std::shared_ptr<Connection>> connections;
    std::list<std::thread> readers;
    std::list<Subscription> subscriptions;

    void accept_loop() {
        while (running) {
            boost::system::error_code ec;
            tcp::socket s(io);
            acceptor.accept(s, ec);
            if (ec) {
                if (!running) return;
                continue;
            }
            auto conn = std::make_shared<Connection>(std::move(s));
            std::lock_guard lock(mutex);
            connections.push_back(conn);
            readers.emplace_back([this, conn] { read_loop(conn); });
        }
    }

    void read_loop(const std::shared_ptr<Connection>& conn) {
        wire::Decoder decoder;
        std::array<char, 4096> buf{};
        while (running) {
            boost::system::error_code ec;
            const auto n = conn->socket.read_some(asio::buffer(buf), ec);
            if (ec) break;
            decoder.feed(buf.data(), n);
            try {
                while (auto msg = decoder.next()) {
                    auto reply = wire::handle(registry, *msg);
                    conn->send(reply.response);
                    if (reply.subscribe) {
                        conn->send(wire::to_json(reply.subscribe->frame(), reply.subscribe->id()));
                        std::lock_guard lock(mutex);
                        subscriptions.push_back({reply.subscribe, conn});
                    }
                }
            } catch (const Error& e) {
                conn->send(wire::error_json(wire::json::object(), to_string(e.kind()), e.what()));
                break;  // the byte stream can no longer be framed
            }
        }
        conn->open = false;
        conn->close();
    }

    void tick_loop() {
        using clock = std::chrono::steady_clock;
        const auto period = std::chrono::milliseconds(options.tick_ms);
        auto next = clock::now() + period;
        const double dt = options.tick_ms / 1000.0;
        while (running) {
            std::this_thread::sleep_until(next);
            next += period;
            for (auto& s : registry.all()) {
                const bool was_finished = s->state() == SessionState::Finished;
                const Frame f = s->tick(dt);
                if (was_finished) continue;  // the final frame has gone out already
                const auto msg = wire::to_json(f, s->id());
                std::lock_guard lock(mutex);
                for (auto it = subscriptions.begin(); it != subscriptions.end();) {
                    auto conn = it->connection.lock();
                    if (!conn || !conn->open) {
                        it = subscriptions.erase(it);
                        continue;
                    }
                    if (it->session == s && !conn->send(msg)) conn->open = false;
                    ++it;
                }
            }
        }
    }
};

SteeringServer::SteeringServer(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
    if (impl_->options.tick_ms <= 0) throw Error(ErrorKind::NonPositiveInput, "tick must be positive");
}

SteeringServer::~SteeringServer() { stop(); }

unsigned short SteeringServer::port() const { return impl_->acceptor.local_endpoint().port(); }

SessionRegistry& SteeringServer::registry() { return impl_->registry; }

void SteeringServer::start() {
    auto& im = *impl_;
    const tcp::endpoint ep(asio::ip::make_address(im.options.host), im.options.port);
    im.acceptor.open(ep.protocol());
    im.acceptor.set_option(tcp::acceptor::reuse_address(true));
    im.acceptor.bind(ep);
    im.acceptor.listen();
    im.running = true;
    im.accept_thread = std::thread([&im] { im.accept_loop(); });
    im.ticker_thread = std::thread([&im] { im.tick_loop(); });
}

void SteeringServer::stop() {
    auto& im = *impl_;
    if (!im.running.exchange(false)) return;
    boost::system::error_code ec;
    {
        // A blocking accept is not woken by close(); poke it with a connection.
        tcp::socket poke(im.io);
        poke.connect(im.acceptor.local_endpoint(ec), ec);
    }
    if (im.accept_thread.joinable()) im.accept_thread.join();
    im.acceptor.close(ec);
    if (im.ticker_thread.joinable()) im.ticker_thread.join();
    std::list<std::thread> readers;
    {
        std::lock_guard lock(im.mutex);
        for (auto& c : im.connections) c->shutdown();
        readers.swap(im.readers);
    }
    for (auto& t : readers)
        if (t.joinable()) t.join();
}

} // namespace mzsim

#include <catch_amalgamated.hpp>

#include <boost/asio.hpp>
#include <numbers>

#include "mzsim/protocol.hpp"
#include "mzsim/steering_server.hpp"

using namespace mzsim;
using boost::asio::ip::tcp;
using wire::json;

namespace {

// Blocking test client speaking the framed protocol.
class Client {
public:
    explicit Client(unsigned short port) : socket_(io_) {
        socket_.connect({boost::asio::ip::make_address("127.0.0.1"), port});
    }

    void send(json msg) {
        if (!msg.contains("v")) msg["v"] = 1;
        send_raw(wire::encode(msg));
    }
    void send_raw(const std::string& bytes) { boost::asio::write(socket_, boost::asio::buffer(bytes)); }

    json read() {
        while (true) {
            if (auto m = decoder_.next()) return *m;
            std::array<char, 4096> buf{};
            const auto n = socket_.read_some(boost::asio::buffer(buf));
            decoder_.feed(buf.data(), n);
        }
    }

    // Skips pushed frames until a message of the given type arrives.
    json read_type(const std::string& type) {
        for (int i = 0; i < 100000; ++i) {
            auto m = read();
            if (m["type"] == type) return m;
            if (m["type"] == "frame") frames.push_back(m);
        }
        FAIL("no " << type << " message");
        return {};
    }

    json final_frame() {
        for (int i = 0; i < 100000; ++i) {
            const auto m = read();
            if (m["type"] == "frame") {
                frames.push_back(m);
                if (m["state"] == "finished") return m;
            }
        }
        FAIL("session did not finish");
        return {};
    }

    std::vector<json> frames;

private:
    boost::asio::io_context io_;
    tcp::socket socket_;
    wire::Decoder decoder_;
};

} // namespace

TEST_CASE("server runs a baseline session to D1") {
    SteeringServer server({"127.0.0.1", 0, 5});
    server.start();
    REQUIRE(server.port() != 0);
    Client c(server.port());
    c.send({{"type", "open"}, {"scenario", "baseline"}, {"rate", 20.0}, {"id", "a"}});
    const auto opened = c.read_type("opened");
    CHECK(opened["id"] == "a");
    const std::string sid = opened["session"];
    c.send({{"type", "subscribe"}, {"session", sid}});
    c.read_type("subscribed");
    c.send({{"type", "command"}, {"session", sid}, {"op", "start"}});
    CHECK(c.read_type("ack")["op"] == "start");
    const auto last = c.final_frame();
    CHECK(last["counters"]["D1"] == 1);
    CHECK(last["counters"]["D2"] == 0);
    CHECK(last["outcome"]["detector"] == "D1");
    for (const auto& f : c.frames)
        for (const auto& t : f["tracks"]) CHECK(t["kind"] == "wave");
    // Frame times never go backwards.
    for (std::size_t i = 1; i < c.frames.size(); ++i)
        CHECK(c.frames[i]["time"].get<double>() >= c.frames[i - 1]["time"].get<double>());
    server.stop();
}

TEST_CASE("a scripted plate session matches its headless replay") {
    SteeringServer server({"127.0.0.1", 0, 5});
    server.start();
    Client c(server.port());
    c.send({{"type", "open"}, {"scenario", "baseline"}, {"rate", 0.5}});
    const std::string sid = c.read_type("opened")["session"];
    c.send({{"type", "subscribe"}, {"session", sid}});
    c.read_type("subscribed");
    c.send({{"type", "command"}, {"session", sid}, {"op", "start"}});
    c.read_type("ack");
    c.send({{"type", "command"},
            {"session", sid},
            {"op", "insert_plate"},
            {"segment", "6"},
            {"phase", std::numbers::pi},
            {"client_time", -5.0}});
    const auto ack = c.read_type("ack");
    CHECK(ack["steers_measured"] == true);
    CHECK(ack["time"].get<double>() < 0.75);
    c.send({{"type", "command"}, {"session", sid}, {"op", "set_rate"}, {"rate", 50.0}});
    c.read_type("ack");
    const auto last = c.final_frame();
    CHECK(last["counters"]["D2"] == 1);
    c.send({{"type", "replay"}, {"session", sid}});
    CHECK(c.read_type("replayed")["counters"] == last["counters"]);

    const auto session = server.registry().get(sid);
    const auto headless = scenario_from_log(session->scenario(), session->event_log());
    const auto r = run_monte_carlo(headless.experiment, 1, headless.seed, headless.disturbance, {1});
    CHECK(r.counts.at("D2") == 1);

    c.send({{"type", "event_log"}, {"session", sid}});
    const auto log = c.read_type("event_log");
    REQUIRE(log["entries"].size() == 3);
    CHECK(log["entries"][1]["action"]["segment"] == "6");
    CHECK(log["entries"][2]["rate"] == 50.0);
    server.stop();
}

TEST_CASE("server error responses") {
    SteeringServer server({"127.0.0.1", 0, 20});
    server.start();
    {
        Client c(server.port());
        c.send({{"type", "open"}, {"v", 3}, {"id", 1}});
        const auto e = c.read_type("error");
        CHECK(e["kind"] == "SchemaMismatch");
        CHECK(e["id"] == 1);
        c.send({{"type", "command"}, {"session", "s99"}, {"op", "start"}});
        CHECK(c.read_type("error")["kind"] == "UnknownSession");
        c.send({{"type", "open"}, {"scenario", {{"name", "x"}}}});
        CHECK(c.read_type("error")["kind"] == "InvalidScenario");
        // A broken payload ends the connection after one error.
        c.send_raw(std::string("\0\0\0\2{]", 6));
        CHECK(c.read_type("error")["kind"] == "ParseError");
    }
    {
        Client c(server.port());
        c.send_raw(std::string("\x7f\0\0\0", 4));
        CHECK(c.read_type("error")["kind"] == "ParseError");
    }
    // Sessions from several connections share one registry.
    Client a(server.port()), b(server.port());
    a.send({{"type", "open"}, {"scenario", "plate_once"}});
    const std::string sid = a.read_type("opened")["session"];
    b.send({{"type", "frame"}, {"session", sid}});
    CHECK(b.read_type("frame")["state"] == "paused");
    server.stop();
    server.stop();
}

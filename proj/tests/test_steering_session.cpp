#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mzsim/error.hpp"
#include "mzsim/protocol.hpp"
#include "mzsim/steering_session.hpp"
#include "test_support.hpp"

using namespace mzsim;
using wire::json;

namespace {

constexpr double kPi = std::numbers::pi;

Command plate_cmd(SegmentId seg, double phase = kPi) {
    Command c;
    c.op = CommandOp::Intervene;
    c.action = InsertPlate{std::move(seg), phase, 0.5};
    return c;
}

Command op(CommandOp o) {
    Command c;
    c.op = o;
    return c;
}

void run_out(Session& s, double dt = 0.05) {
    for (int i = 0; i < 100000 && s.state() != SessionState::Finished; ++i) s.tick(dt);
    REQUIRE(s.state() == SessionState::Finished);
}

Scenario single(const char* name, std::uint64_t seed = 3) {
    auto s = builtin(name);
    s.seed = seed;
    return s;
}

// Request/response transcript driven through the wire handler with
// deterministic ticks in between.
struct Transcript {
    SessionRegistry registry;
    std::string text;
    std::string session;

    json send(json req) {
        req["v"] = 1;
        if (!session.empty() && !req.contains("session") && req["type"] != "open") req["session"] = session;
        const auto reply = wire::handle(registry, req);
        text += "> " + req.dump() + "\n< " + reply.response.dump() + "\n";
        if (reply.response["type"] == "opened") session = reply.response["session"];
        return reply.response;
    }
    void tick(double dt) {
        const auto f = registry.get(session)->tick(dt);
        text += "~ " + wire::to_json(f, session).dump() + "\n";
    }
};

void check_golden(const std::string& name, const std::string& text) {
    const std::string path = std::string(MZSIM_GOLDEN_DIR) + "/" + name;
    if (const char* u = std::getenv("MZSIM_UPDATE_GOLDEN"); u && std::string(u) == "1") {
        std::ofstream(path) << text;
        return;
    }
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream want;
    want << in.rdbuf();
    CHECK(text == want.str());
}

} // namespace

TEST_CASE("a plate inserted ahead of the wave steers it to D2") {
    Session s("t", single("baseline"), 1.0);
    s.command(op(CommandOp::Start));
    s.tick(0.3);
    const auto r = s.command(plate_cmd("6"));
    CHECK(r.accepted);
    CHECK(r.time == 0.3);
    CHECK(r.steers_measured);
    run_out(s);
    CHECK(s.counters() == std::map<NodeId, std::size_t>{{"D1", 0}, {"D2", 1}});
}

TEST_CASE("a late plate is rejected and changes nothing") {
    Session s("t", single("baseline"), 1.0);
    s.command(op(CommandOp::Start));
    s.tick(0.8);
    const auto r = s.command(plate_cmd("6"));
    CHECK_FALSE(r.accepted);
    CHECK(r.reason == "IllegalAlreadyPassed");
    CHECK(s.frame().plates.empty());
    run_out(s);
    CHECK(s.counters().at("D1") == 1);
}

TEST_CASE("a second plate on the other arm restores D1") {
    Session s("t", single("baseline"), 1.0);
    s.command(op(CommandOp::Start));
    s.tick(0.3);
    CHECK(s.command(plate_cmd("6")).accepted);
    s.tick(0.1);
    CHECK(s.command(plate_cmd("7")).accepted);
    run_out(s);
    CHECK(s.counters().at("D1") == 1);
}

TEST_CASE("paused sessions repeat the same time") {
    Session s("t", single("baseline"), 2.0);
    const auto a = s.tick(0.5);
    const auto b = s.tick(0.5);
    CHECK(a.time == 0.0);
    CHECK(b.time == 0.0);
    CHECK(b.seq == a.seq + 1);
    CHECK(b.state == SessionState::Paused);
    s.command(op(CommandOp::Start));
    CHECK(s.tick(0.25).time == 0.5);  // rate 2
    s.command(op(CommandOp::Pause));
    CHECK(s.tick(1.0).time == 0.5);
}

TEST_CASE("commands report their outcome in the next frame") {
    Session s("t", single("baseline"), 1.0);
    auto bad = op(CommandOp::SetRate);
    bad.rate = -1;
    CHECK(s.command(bad).reason == "NonPositiveInput");
    const auto f = s.tick(0.1);
    REQUIRE(f.ack.has_value());
    CHECK(f.ack->op == "set_rate");
    CHECK_FALSE(s.tick(0.1).ack.has_value());

    Command none = op(CommandOp::Intervene);
    CHECK(s.command(none).reason == "MissingAction");
    Command mirror = op(CommandOp::Intervene);
    mirror.action = RemoveMirror{"S_A"};
    CHECK(s.command(mirror).reason == "NotRemovable");
    CHECK(s.command(plate_cmd("zz")).reason == "UnknownTarget");
    CHECK(s.command(plate_cmd("6")).accepted);
    CHECK(s.command(plate_cmd("6")).reason == "InvalidSchedule");  // same target, same instant

    Command advisory = plate_cmd("7");
    advisory.client_time = 123.0;
    CHECK(s.command(advisory).time == 0.0);

    s.command(op(CommandOp::Start));
    run_out(s);
    CHECK(s.command(op(CommandOp::Start)).reason == "Finished");
    CHECK(s.frame().outcome.has_value());
}

TEST_CASE("particle identity stays hidden until revealed") {
    Session s("t", single("which_path", 11), 1.0);
    s.command(op(CommandOp::Start));
    bool saw_full = false;
    while (s.state() != SessionState::Finished) {
        const auto f = s.tick(0.05);
        const auto text = wire::to_json(f, s.id()).dump();
        CHECK(text.find("\"FW\"") == std::string::npos);
        CHECK(text.find("\"EW\"") == std::string::npos);
        for (const auto& t : f.tracks) CHECK(t.kind == "wave");
        if (f.time > 0.6 && !saw_full) {
            Command on = op(CommandOp::RevealParticle);
            on.reveal = true;
            s.command(on);
            const auto shown = s.frame();
            for (const auto& t : shown.tracks) saw_full |= t.kind == "FW";
            Command off = op(CommandOp::RevealParticle);
            s.command(off);
        }
    }
    CHECK(saw_full);
}

TEST_CASE("property: a session log replays to the same counters", "[property]") {
    gen::Rng rng(60);
    const std::vector<SegmentId> segs{"1", "6", "7", "4", "5"};
    for (int i = 0; i < 100; ++i) {
        const char* name = rng.coin() ? "which_path" : "baseline";
        Session s("t", single(name, rng.u64()), rng.uniform(0.5, 4.0));
        s.command(op(CommandOp::Start));
        while (s.state() != SessionState::Finished) {
            s.tick(rng.uniform(0.01, 0.2));
            if (rng.integer(0, 3) == 0) {
                if (rng.coin()) {
                    s.command(plate_cmd(segs[static_cast<std::size_t>(rng.integer(0, 4))], rng.angle()));
                } else {
                    Command rm = op(CommandOp::Intervene);
                    rm.action = RemovePlate{segs[static_cast<std::size_t>(rng.integer(0, 4))]};
                    s.command(rm);
                }
            }
        }
        const auto log = s.event_log();
        CHECK(replay_counters(s.scenario(), log) == s.counters());
        // The same trial through the batch engine.
        const auto headless = scenario_from_log(s.scenario(), log);
        const auto r = run_monte_carlo(headless.experiment, 1, headless.seed, headless.disturbance, {1});
        for (const auto& [det, n] : s.counters())
            if (n) CHECK(r.counts.at(det) == n);
    }
}

TEST_CASE("registry") {
    SessionRegistry reg;
    const auto a = reg.open(builtin("baseline"), 1.0);
    const auto b = reg.open(builtin("baseline"), 1.0);
    CHECK(a->id() == "s1");
    CHECK(b->id() == "s2");
    CHECK(reg.get("s2") == b);
    CHECK(reg.all().size() == 2);
    auto kind = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::InvariantViolation;
    };
    CHECK(kind([&] { reg.get("s9"); }) == ErrorKind::UnknownSession);
    CHECK(kind([&] { reg.open(builtin("baseline"), 0.0); }) == ErrorKind::NonPositiveInput);
    auto broken = builtin("baseline");
    broken.n_trials = 0;
    CHECK(kind([&] { reg.open(broken, 1.0); }) == ErrorKind::InvalidScenario);
}

TEST_CASE("wire framing") {
    const json m{{"v", 1}, {"type", "frame"}, {"session", "s1"}};
    const auto bytes = wire::encode(m);
    const auto n = m.dump().size();
    CHECK(static_cast<unsigned char>(bytes[0]) == ((n >> 24) & 0xff));
    CHECK(static_cast<unsigned char>(bytes[3]) == (n & 0xff));
    wire::Decoder d;
    const auto twice = bytes + bytes;
    for (char c : twice) d.feed(&c, 1);  // byte at a time
    CHECK(d.next() == m);
    CHECK(d.next() == m);
    CHECK_FALSE(d.next().has_value());

    wire::Decoder big;
    const char huge[4] = {0x7f, 0, 0, 0};
    big.feed(huge, 4);
    CHECK_THROWS_AS(big.next(), Error);
    wire::Decoder junk;
    const std::string bad = std::string("\0\0\0\3{x}", 7);
    junk.feed(bad.data(), bad.size());
    CHECK_THROWS_AS(junk.next(), Error);
}

TEST_CASE("wire error responses") {
    SessionRegistry reg;
    CHECK(wire::handle(reg, {{"v", 2}, {"type", "open"}}).response["kind"] == "SchemaMismatch");
    CHECK(wire::handle(reg, {{"type", "open"}}).response["kind"] == "SchemaMismatch");
    CHECK(wire::handle(reg, {{"v", 1}, {"type", "open"}, {"scenario", "nope"}}).response["kind"] == "InvalidScenario");
    CHECK(wire::handle(reg, {{"v", 1}, {"type", "frame"}, {"session", "s7"}}).response["kind"] == "UnknownSession");
    const auto opened = wire::handle(reg, {{"v", 1}, {"type", "open"}, {"scenario", "baseline"}, {"id", 5}}).response;
    CHECK(opened["type"] == "opened");
    CHECK(opened["id"] == 5);
    CHECK(opened["layout"]["segments"].size() == 7);
    const auto sid = opened["session"].get<std::string>();
    CHECK(wire::handle(reg, {{"v", 1}, {"type", "command"}, {"session", sid}, {"op", "fly"}}).response["kind"] ==
          "ParseError");
    CHECK(wire::handle(reg, {{"v", 1}, {"type", "command"}, {"session", sid}, {"op", "insert_plate"}})
              .response["kind"] == "ParseError");
    CHECK(wire::handle(reg, {{"v", 1}, {"type", "dance"}, {"session", sid}}).response["type"] == "error");
    CHECK(wire::handle(reg, json::array()).response["kind"] == "ParseError");
    const auto sub = wire::handle(reg, {{"v", 1}, {"type", "subscribe"}, {"session", sid}});
    CHECK(sub.response["type"] == "subscribed");
    CHECK(sub.subscribe != nullptr);
}

TEST_CASE("golden transcript: plate steering session") {
    Transcript t;
    t.send({{"type", "open"}, {"scenario", "baseline"}, {"rate", 1.0}, {"id", 1}});
    t.send({{"type", "command"}, {"op", "start"}});
    t.tick(0.25);
    t.send({{"type", "command"}, {"op", "insert_plate"}, {"segment", "6"}, {"phase", kPi}, {"client_time", 9.0}});
    t.tick(0.25);
    t.tick(0.25);
    t.send({{"type", "command"}, {"op", "insert_plate"}, {"segment", "7"}, {"phase", kPi}});
    t.send({{"type", "command"}, {"op", "reveal_particle"}, {"on", true}});
    t.tick(0.25);
    t.send({{"type", "command"}, {"op", "pause"}});
    t.tick(0.25);
    t.send({{"type", "command"}, {"op", "set_rate"}, {"rate", 4.0}});
    t.send({{"type", "command"}, {"op", "start"}});
    for (int i = 0; i < 4; ++i) t.tick(0.25);
    t.send({{"type", "frame"}});
    t.send({{"type", "event_log"}});
    t.send({{"type", "replay"}});
    check_golden("plate_session.txt", t.text);
}

TEST_CASE("golden transcript: mirror removal in the two-source setup") {
    Transcript t;
    t.send({{"type", "open"}, {"scenario", "modified"}, {"rate", 2.0}});
    t.send({{"type", "command"}, {"op", "remove_mirror"}, {"mirror", "S_A"}});
    t.send({{"type", "command"}, {"op", "start"}});
    t.tick(0.45);
    t.send({{"type", "command"}, {"op", "remove_mirror"}, {"mirror", "S_B"}});
    t.send({{"type", "command"}, {"op", "remove_plate"}, {"segment", "6"}});
    for (int i = 0; i < 6; ++i) t.tick(0.5);
    t.send({{"type", "event_log"}});
    t.send({{"type", "replay"}});
    check_golden("mirror_session.txt", t.text);
}

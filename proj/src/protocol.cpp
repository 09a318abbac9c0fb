#include "mzsim/protocol.hpp"

#include "mzsim/error.hpp"

namespace mzsim::wire {

std::string encode(const json& message) {
    const std::string payload = message.dump();
    if (payload.size() > kMaxMessage) throw Error(ErrorKind::ParseError, "message exceeds the size limit");
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xff));
    out += payload;
    return out;
}

std::optional<json> Decoder::next() {
    if (buffer_.size() < 4) return std::nullopt;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer_[static_cast<std::size_t>(i)]);
    if (n > kMaxMessage) throw Error(ErrorKind::ParseError, "message exceeds the size limit");
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    const std::string payload = buffer_.substr(4, n);
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    try {
        return json::parse(payload);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed message: ") + e.what());
    }
}

json to_json(const CommandResult& r, const std::string& session) {
    json j{{"v", kVersion},
           {"type", r.accepted ? "ack" : "rejection"},
           {"session", session},
           {"seq", r.seq},
           {"op", r.op},
           {"time", r.time},
           {"steers_measured", r.steers_measured}};
    if (!r.accepted) j["reason"] = r.reason;
    return j;
}

json to_json(const Frame& f, const std::string& session) {
    json tracks = json::array();
    for (const auto& t : f.tracks)
        tracks.push_back(
            {{"id", t.id}, {"system", t.system}, {"kind", t.kind}, {"segment", t.segment}, {"fraction", t.fraction}});
    json plates = json::array();
    for (const auto& p : f.plates)
        plates.push_back({{"segment", p.segment}, {"position", p.position}, {"phase", p.phase}});
    json j{{"v", kVersion},
           {"type", "frame"},
           {"session", session},
           {"seq", f.seq},
           {"time", f.time},
           {"state", to_string(f.state)},
           {"revealed", f.revealed},
           {"tracks", tracks},
           {"plates", plates},
           {"mirrors", f.mirrors},
           {"counters", f.counters},
           {"ack", nullptr},
           {"outcome", nullptr}};
    if (f.ack) j["ack"] = to_json(*f.ack, session);
    if (f.outcome)
        j["outcome"] = {{"detector", f.outcome->detector},
                        {"click_time", f.outcome->click_time},
                        {"clicks", f.outcome->clicks}};
    return j;
}

json layout_json(const OpticalNetwork& net) {
    json nodes = json::array();
    for (const auto& n : net.nodes()) {
        json jn{{"id", n.id}, {"kind", to_string(n.kind)}, {"x", n.position.x}, {"y", n.position.y}};
        if (n.removable) jn["removable"] = true;
        nodes.push_back(std::move(jn));
    }
    json segs = json::array();
    for (const auto& s : net.segments())
        segs.push_back({{"id", s.id}, {"from", s.from}, {"to", s.to}, {"length", s.length}, {"ket", s.ket}});
    return {{"nodes", nodes}, {"segments", segs}};
}

namespace {

const json& field(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorKind::ParseError, std::string("missing field ") + key);
    return j.at(key);
}

std::string string_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_string()) throw Error(ErrorKind::ParseError, std::string(key) + " must be a string");
    return v.get<std::string>();
}

double number_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number()) throw Error(ErrorKind::ParseError, std::string(key) + " must be a number");
    return v.get<double>();
}

json with_id(json response, const json& request) {
    if (request.is_object() && request.contains("id")) response["id"] = request.at("id");
    return response;
}

Scenario scenario_from_request(const json& req) {
    const auto& s = field(req, "scenario");
    try {
        if (s.is_string()) return builtin(s.get<std::string>());
        if (s.is_object()) return parse_scenario(s.dump());
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidScenario, e.what());
    }
    throw Error(ErrorKind::InvalidScenario, "scenario must be a built-in name or a scenario document");
}

json action_json(const InterventionAction& a) {
    if (const auto* p = std::get_if<InsertPlate>(&a))
        return {{"op", "insert_plate"}, {"segment", p->segment}, {"phase", p->phase}, {"position", p->position}};
    if (const auto* p = std::get_if<RemovePlate>(&a)) return {{"op", "remove_plate"}, {"segment", p->segment}};
    return {{"op", "remove_mirror"}, {"mirror", std::get<RemoveMirror>(a).mirror}};
}

} // namespace

Command command_from_json(const json& req) {
    const std::string op = string_field(req, "op");
    Command c;
    if (op == "start") {
        c.op = CommandOp::Start;
    } else if (op == "pause") {
        c.op = CommandOp::Pause;
    } else if (op == "set_rate") {
        c.op = CommandOp::SetRate;
        c.rate = number_field(req, "rate");
    } else if (op == "reveal_particle") {
        c.op = CommandOp::RevealParticle;
        const auto& on = field(req, "on");
        if (!on.is_boolean()) throw Error(ErrorKind::ParseError, "on must be true or false");
        c.reveal = on.get<bool>();
    } else if (op == "insert_plate") {
        c.op = CommandOp::Intervene;
        InsertPlate p{string_field(req, "segment"), number_field(req, "phase")};
        if (req.contains("position")) p.position = number_field(req, "position");
        c.action = p;
    } else if (op == "remove_plate") {
        c.op = CommandOp::Intervene;
        c.action = RemovePlate{string_field(req, "segment")};
    } else if (op == "remove_mirror") {
        c.op = CommandOp::Intervene;
        c.action = RemoveMirror{string_field(req, "mirror")};
    } else {
        throw Error(ErrorKind::ParseError, "unknown op " + op);
    }
    if (req.contains("client_time") && req.at("client_time").is_number())
        c.client_time = req.at("client_time").get<double>();
    return c;
}

json error_json(const json& request, std::string_view kind, const std::string& message) {
    return with_id({{"v", kVersion}, {"type", "error"}, {"kind", kind}, {"message", message}}, request);
}

Reply handle(SessionRegistry& registry, const json& req) {
    try {
        if (!req.is_object()) throw Error(ErrorKind::ParseError, "message must be an object");
        if (!req.contains("v") || req.at("v") != kVersion)
            return {error_json(req, "SchemaMismatch", "expected v = 1"), nullptr};
        const std::string type = string_field(req, "type");
        if (type == "open") {
            const double rate = req.contains("rate") ? number_field(req, "rate") : 1.0;
            auto s = registry.open(scenario_from_request(req), rate);
            return {with_id({{"v", kVersion},
                             {"type", "opened"},
                             {"session", s->id()},
                             {"scenario", s->scenario().name},
                             {"state", to_string(s->state())},
                             {"time", s->time()},
                             {"rate", s->clock_rate()},
                             {"layout", layout_json(s->scenario().experiment.network)}},
                            req),
                    nullptr};
        }
        auto session = registry.get(string_field(req, "session"));
        if (type == "command") {
            const auto r = session->command(command_from_json(req));
            return {with_id(to_json(r, session->id()), req), nullptr};
        }
        if (type == "subscribe")
            return {with_id({{"v", kVersion}, {"type", "subscribed"}, {"session", session->id()}}, req), session};
        if (type == "frame") return {with_id(to_json(session->frame(), session->id()), req), nullptr};
        if (type == "event_log") {
            json entries = json::array();
            for (const auto& e : session->event_log()) {
                json entry = to_json(e.result, session->id());
                if (e.command.action) entry["action"] = action_json(*e.command.action);
                if (e.command.op == CommandOp::SetRate) entry["rate"] = e.command.rate;
                if (e.command.op == CommandOp::RevealParticle) entry["on"] = e.command.reveal;
                entries.push_back(std::move(entry));
            }
            return {with_id({{"v", kVersion}, {"type", "event_log"}, {"session", session->id()}, {"entries", entries}},
                            req),
                    nullptr};
        }
        if (type == "replay") {
            const auto counters = replay_counters(session->scenario(), session->event_log());
            return {with_id({{"v", kVersion}, {"type", "replayed"}, {"session", session->id()}, {"counters", counters}},
                            req),
                    nullptr};
        }
        throw Error(ErrorKind::ParseError, "unknown message type " + type);
    } catch (const Error& e) {
        return {error_json(req, to_string(e.kind()), e.what()), nullptr};
    }
}

} // namespace mzsim::wire

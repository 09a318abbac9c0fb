// JSON scenario files and report output.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mzsim/error.hpp"
#include "mzsim/scenarios.hpp"

namespace mzsim {

using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json event_to_json(const InterventionEvent& e) {
    json j{{"time", e.time}};
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, InsertPlate>) {
                j["action"] = "insert_plate";
                j["segment"] = a.segment;
                j["phase"] = a.phase;
                j["position"] = a.position;
            } else if constexpr (std::is_same_v<T, RemovePlate>) {
                j["action"] = "remove_plate";
                j["segment"] = a.segment;
            } else {
                j["action"] = "remove_mirror";
                j["mirror"] = a.mirror;
            }
        },
        e.action);
    return j;
}

json network_to_json(const OpticalNetwork& net) {
    json nodes = json::array();
    for (const auto& n : net.nodes()) {
        json routes = json::array();
        for (const auto& r : n.routes) routes.push_back({{"in", r.in}, {"out", r.out}, {"role", to_string(r.role)}});
        json jn{{"id", n.id}, {"kind", to_string(n.kind)}, {"x", n.position.x}, {"y", n.position.y}, {"routes", routes}};
        if (n.removable) jn["removable"] = true;
        if (!n.system.empty()) jn["system"] = n.system;
        nodes.push_back(std::move(jn));
    }
    json segs = json::array();
    for (const auto& s : net.segments())
        segs.push_back({{"id", s.id}, {"from", s.from}, {"to", s.to}, {"length", s.length}, {"ket", s.ket}});
    return {{"nodes", nodes}, {"segments", segs}};
}

// Field access with the JSON pointer of the value for error messages.
class Field {
public:
    Field(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const json& value() const { return j_; }
    const std::string& path() const { return path_; }

    void object(std::initializer_list<std::string_view> allowed) const {
        if (!j_.is_object()) fail("expected an object");
        for (const auto& [key, _] : j_.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                throw Error(ErrorKind::UnknownField, path_ + "/" + key + ": unknown field");
    }
    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    Field at(const char* key) const {
        if (!j_.contains(key)) throw Error(ErrorKind::ParseError, path_ + "/" + key + ": missing field");
        return {j_.at(key), path_ + "/" + key};
    }
    Field at(std::size_t i) const { return {j_.at(i), path_ + "/" + std::to_string(i)}; }
    std::size_t size() const {
        if (!j_.is_array()) fail("expected an array");
        return j_.size();
    }

    std::string str() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }
    double number() const {
        if (!j_.is_number()) fail("expected a number");
        return j_.get<double>();
    }
    bool boolean() const {
        if (!j_.is_boolean()) fail("expected true or false");
        return j_.get<bool>();
    }
    std::uint64_t unsigned_int() const {
        if (!j_.is_number_unsigned()) fail("expected a non-negative integer");
        return j_.get<std::uint64_t>();
    }

    [[noreturn]] void fail(const std::string& msg) const { throw Error(ErrorKind::ParseError, path_ + ": " + msg); }

private:
    const json& j_;
    std::string path_;
};

OpticalNetwork network_from_json(const Field& f) {
    f.object({"nodes", "segments"});
    std::vector<Node> nodes;
    const auto jn = f.at("nodes");
    for (std::size_t i = 0; i < jn.size(); ++i) {
        const auto n = jn.at(i);
        n.object({"id", "kind", "x", "y", "routes", "removable", "system"});
        Node node;
        node.id = n.at("id").str();
        const auto kind = node_kind_from_string(n.at("kind").str());
        if (!kind) throw Error(ErrorKind::ParseError, n.path() + "/kind: unknown node kind");
        node.kind = *kind;
        node.position = {n.at("x").number(), n.at("y").number()};
        if (n.has("removable")) node.removable = n.at("removable").boolean();
        if (n.has("system")) node.system = n.at("system").str();
        const auto jr = n.at("routes");
        for (std::size_t k = 0; k < jr.size(); ++k) {
            const auto r = jr.at(k);
            r.object({"in", "out", "role"});
            const auto role = route_role_from_string(r.at("role").str());
            if (!role) throw Error(ErrorKind::ParseError, r.path() + "/role: unknown route role");
            node.routes.push_back({r.at("in").str(), r.at("out").str(), *role});
        }
        nodes.push_back(std::move(node));
    }
    std::vector<Segment> segs;
    const auto js = f.at("segments");
    for (std::size_t i = 0; i < js.size(); ++i) {
        const auto s = js.at(i);
        s.object({"id", "from", "to", "length", "ket"});
        Segment seg{s.at("id").str(), s.at("from").str(), s.at("to").str(), s.at("length").number(),
                    s.has("ket") ? s.at("ket").str() : ""};
        if (!(seg.length > 0.0) || !std::isfinite(seg.length))
            throw Error(ErrorKind::InvariantViolation, s.path() + "/length: segment " + seg.id + " must have positive length");
        segs.push_back(std::move(seg));
    }
    return {std::move(nodes), std::move(segs)};
}

InterventionEvent event_from_json(const Field& e) {
    const auto action = e.at("action").str();
    InterventionEvent ev;
    if (action == "insert_plate") {
        e.object({"time", "action", "segment", "phase", "position"});
        InsertPlate p{e.at("segment").str(), e.at("phase").number()};
        if (e.has("position")) p.position = e.at("position").number();
        ev.action = p;
    } else if (action == "remove_plate") {
        e.object({"time", "action", "segment"});
        ev.action = RemovePlate{e.at("segment").str()};
    } else if (action == "remove_mirror") {
        e.object({"time", "action", "mirror"});
        ev.action = RemoveMirror{e.at("mirror").str()};
    } else {
        throw Error(ErrorKind::ParseError, e.path() + "/action: unknown action " + action);
    }
    ev.time = e.at("time").number();
    return ev;
}

std::string line_col(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

} // namespace

std::string serialize_scenario(const Scenario& sc) {
    const auto& exp = sc.experiment;
    json systems = json::array();
    for (const auto& s : exp.systems)
        systems.push_back({{"id", s.id}, {"speed", s.speed}, {"mass", s.mass}, {"wave_number", s.wave_number}});
    json events = json::array();
    for (const auto& e : exp.schedule.events) events.push_back(event_to_json(e));
    json emissions = json::object();
    for (const auto& [src, t] : exp.schedule.emissions) emissions[src] = t;

    json j{{"v", kFormatVersion},
           {"name", sc.name},
           {"engine", to_string(sc.engine)},
           {"trials", sc.n_trials},
           {"seed", sc.seed},
           {"measured_system", exp.measured_system},
           {"epsilon", exp.epsilon},
           {"empty_waves_persist", exp.empty_waves_persist},
           {"disturbance",
            {{"enabled", sc.disturbance.enabled}, {"delta", sc.disturbance.delta},
             {"applies_to", sc.disturbance.applies_to}}},
           {"systems", systems},
           {"network", network_to_json(exp.network)},
           {"schedule", {{"emissions", emissions}, {"events", events}}}};
    if (exp.post_select) j["post_select"] = {{"system", exp.post_select->system}, {"detector", exp.post_select->detector}};
    return j.dump(2) + "\n";
}

Scenario parse_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, line_col(text, e.byte) + ": malformed document");
    }
    const Field root(doc, "");
    root.object({"v", "name", "engine", "trials", "seed", "measured_system", "epsilon", "empty_waves_persist",
                 "disturbance", "systems", "network", "schedule", "post_select"});
    if (root.at("v").unsigned_int() != kFormatVersion) root.at("v").fail("unsupported version");

    Scenario sc;
    sc.name = root.at("name").str();
    if (root.has("engine")) {
        const auto e = engine_from_string(root.at("engine").str());
        if (!e) root.at("engine").fail("expected amplitude or pilot_wave");
        sc.engine = *e;
    }
    if (root.has("trials")) sc.n_trials = root.at("trials").unsigned_int();
    if (root.has("seed")) sc.seed = root.at("seed").unsigned_int();

    auto& exp = sc.experiment;
    if (root.has("measured_system")) exp.measured_system = root.at("measured_system").str();
    if (root.has("epsilon")) exp.epsilon = root.at("epsilon").number();
    if (root.has("empty_waves_persist")) exp.empty_waves_persist = root.at("empty_waves_persist").boolean();
    if (root.has("disturbance")) {
        const auto d = root.at("disturbance");
        d.object({"enabled", "delta", "applies_to"});
        sc.disturbance.enabled = d.at("enabled").boolean();
        sc.disturbance.delta = d.at("delta").number();
        if (d.has("applies_to")) sc.disturbance.applies_to = d.at("applies_to").str();
    }
    const auto systems = root.at("systems");
    for (std::size_t i = 0; i < systems.size(); ++i) {
        const auto s = systems.at(i);
        s.object({"id", "speed", "mass", "wave_number"});
        SystemSpec spec{s.at("id").str(), s.at("speed").number()};
        if (s.has("mass")) spec.mass = s.at("mass").number();
        if (s.has("wave_number")) spec.wave_number = s.at("wave_number").number();
        exp.systems.push_back(spec);
    }
    exp.network = network_from_json(root.at("network"));
    if (root.has("schedule")) {
        const auto sch = root.at("schedule");
        sch.object({"emissions", "events"});
        if (sch.has("emissions")) {
            const auto em = sch.at("emissions");
            if (!em.value().is_object()) em.fail("expected an object");
            for (const auto& [src, t] : em.value().items())
                exp.schedule.emissions[src] = Field(t, em.path() + "/" + src).number();
        }
        if (sch.has("events")) {
            const auto ev = sch.at("events");
            for (std::size_t i = 0; i < ev.size(); ++i) exp.schedule.events.push_back(event_from_json(ev.at(i)));
        }
    }
    if (root.has("post_select")) {
        const auto p = root.at("post_select");
        p.object({"system", "detector"});
        exp.post_select = PostSelection{p.at("system").str(), p.at("detector").str()};
    }
    check_scenario(sc);
    return sc;
}

std::string report_to_json(const RunReport& r) {
    json intervals = json::object();
    for (const auto& [label, iv] : r.intervals) intervals[label] = {iv.lo, iv.hi};
    json j{{"v", kFormatVersion},
           {"scenario", r.scenario},
           {"engine", r.engine},
           {"seed", r.seed},
           {"trials", r.n_trials},
           {"retained", r.retained},
           {"retained_fraction", r.retained_fraction},
           {"counts", r.counts},
           {"frequencies", r.frequencies},
           {"intervals_5sigma", intervals},
           {"theoretical", r.theoretical},
           {"theoretical_weight", r.theoretical_weight},
           {"disturbed", r.disturbed},
           {"chi_square", nullptr}};
    if (r.chi_square)
        j["chi_square"] = {{"statistic", r.chi_square->statistic},
                           {"dof", r.chi_square->dof},
                           {"zero_cells_ok", r.chi_square->zero_cells_ok}};
    j["config"] = r.config.empty() ? json(nullptr) : json::parse(r.config);
    return j.dump(2) + "\n";
}

std::string report_to_table(const RunReport& r) {
    std::ostringstream out;
    out << "scenario " << r.scenario << "  engine " << r.engine << "  seed " << r.seed << "\n";
    out << "trials " << r.n_trials << "  retained " << r.retained << " (" << std::setprecision(6)
        << r.retained_fraction << ")  post-selection weight " << r.theoretical_weight << "\n\n";
    out << std::left << std::setw(10) << "outcome" << std::right << std::setw(10) << "count" << std::setw(12)
        << "freq" << std::setw(12) << "theory" << "   5-sigma interval\n";
    out << std::fixed;
    for (const auto& [label, k] : r.counts) {
        const auto th = r.theoretical.count(label) ? r.theoretical.at(label) : 0.0;
        const auto& iv = r.intervals.at(label);
        out << std::left << std::setw(10) << label << std::right << std::setw(10) << k << std::setw(12)
            << std::setprecision(6) << r.frequencies.at(label) << std::setw(12) << th << "   [" << iv.lo << ", "
            << iv.hi << "]\n";
    }
    if (r.chi_square) {
        out << "\nchi-square " << std::setprecision(4) << r.chi_square->statistic << " (dof " << r.chi_square->dof
            << ")  zero-probability cells " << (r.chi_square->zero_cells_ok ? "empty" : "NOT EMPTY") << "\n";
    }
    return out.str();
}

} // namespace mzsim

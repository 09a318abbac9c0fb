#include "mzsim/optical_network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "mzsim/error.hpp"

namespace mzsim {

std::string_view to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::Source: return "source";
    case NodeKind::BeamSplitter: return "beam_splitter";
    case NodeKind::Mirror: return "mirror";
    case NodeKind::PhasePlateSlot: return "plate_slot";
    case NodeKind::Detector: return "detector";
    }
    return "?";
}

std::string_view to_string(RouteRole role) {
    switch (role) {
    case RouteRole::Transmit: return "transmit";
    case RouteRole::Reflect: return "reflect";
    case RouteRole::Through: return "through";
    }
    return "?";
}

std::optional<NodeKind> node_kind_from_string(std::string_view s) {
    for (auto k : {NodeKind::Source, NodeKind::BeamSplitter, NodeKind::Mirror,
                   NodeKind::PhasePlateSlot, NodeKind::Detector}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::optional<RouteRole> route_role_from_string(std::string_view s) {
    for (auto r : {RouteRole::Transmit, RouteRole::Reflect, RouteRole::Through}) {
        if (to_string(r) == s) return r;
    }
    return std::nullopt;
}

OpticalNetwork::OpticalNetwork(std::vector<Node> nodes, std::vector<Segment> segments)
    : nodes_(std::move(nodes)), segments_(std::move(segments)) {
    // Duplicates keep the first entry; validate() reports them.
    for (std::size_t i = 0; i < nodes_.size(); ++i) node_index_.emplace(nodes_[i].id, i);
    for (std::size_t i = 0; i < segments_.size(); ++i) segment_index_.emplace(segments_[i].id, i);
}

const Node* OpticalNetwork::find_node(std::string_view id) const {
    auto it = node_index_.find(id);
    return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

const Segment* OpticalNetwork::find_segment(std::string_view id) const {
    auto it = segment_index_.find(id);
    return it == segment_index_.end() ? nullptr : &segments_[it->second];
}

const Node& OpticalNetwork::node(std::string_view id) const {
    if (const auto* n = find_node(id)) return *n;
    throw Error(ErrorKind::UnknownNode, std::string(id));
}

const Segment& OpticalNetwork::segment(std::string_view id) const {
    if (const auto* s = find_segment(id)) return *s;
    throw Error(ErrorKind::UnknownSegment, std::string(id));
}

std::vector<SegmentId> OpticalNetwork::inputs(std::string_view node) const {
    std::vector<SegmentId> out;
    for (const auto& s : segments_)
        if (s.to == node) out.push_back(s.id);
    return out;
}

std::vector<SegmentId> OpticalNetwork::outputs(std::string_view node) const {
    std::vector<SegmentId> out;
    for (const auto& s : segments_)
        if (s.from == node) out.push_back(s.id);
    return out;
}

std::vector<NodeId> OpticalNetwork::detectors() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_)
        if (n.kind == NodeKind::Detector) out.push_back(n.id);
    return out;
}

std::vector<NodeId> OpticalNetwork::sources() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_)
        if (n.kind == NodeKind::Source) out.push_back(n.id);
    return out;
}

const Node* OpticalNetwork::source_of(std::string_view system) const {
    for (const auto& n : nodes_)
        if (n.kind == NodeKind::Source && n.system == system) return &n;
    return nullptr;
}

bool OpticalNetwork::reaches(std::string_view from, std::string_view target) const {
    std::set<std::string, std::less<>> seen;
    std::vector<std::string> stack{std::string(from)};
    while (!stack.empty()) {
        std::string seg = std::move(stack.back());
        stack.pop_back();
        if (seg == target) return true;
        if (!seen.insert(seg).second) continue;
        const auto* s = find_segment(seg);
        if (!s) continue;
        const auto* n = find_node(s->to);
        if (!n) continue;
        for (const auto& r : n->routes)
            if (r.in == seg) stack.push_back(r.out);
    }
    return false;
}

std::optional<std::vector<SegmentId>> OpticalNetwork::route_between(std::string_view from_node,
                                                                    std::string_view to_node) const {
    std::vector<std::vector<SegmentId>> found;
    std::vector<SegmentId> path;
    std::function<void(const std::string&)> walk = [&](const std::string& seg) {
        if (path.size() > segments_.size()) return;  // cyclic input
        path.push_back(seg);
        const auto* s = find_segment(seg);
        if (s) {
            if (s->to == to_node) {
                found.push_back(path);
            } else if (const auto* n = find_node(s->to)) {
                for (const auto& r : n->routes)
                    if (r.in == seg) walk(r.out);
            }
        }
        path.pop_back();
    };
    for (const auto& seg : outputs(from_node)) walk(seg);
    if (found.size() != 1) return std::nullopt;
    return found.front();
}

namespace {

void check_kind_ports(const OpticalNetwork& net, const Node& n, std::vector<Violation>& v) {
    const auto in = net.inputs(n.id);
    const auto out = net.outputs(n.id);
    auto port_count = [&](const std::string& msg) {
        v.push_back({"port_count", n.id, msg});
    };
    switch (n.kind) {
    case NodeKind::Source:
        if (!in.empty()) v.push_back({"source_has_input", n.id, "source has an input"});
        if (out.size() != 1) port_count("source must have exactly one output");
        if (n.system.empty()) v.push_back({"missing_system", n.id, "source has no system label"});
        break;
    case NodeKind::Detector:
        if (!out.empty()) v.push_back({"detector_has_output", n.id, "detector has output"});
        if (in.size() != 1) port_count("detector must have exactly one input");
        break;
    case NodeKind::PhasePlateSlot:
        if (in.size() != 1 || out.size() != 1) port_count("plate slot must have one input and one output");
        break;
    case NodeKind::Mirror:
        if (!n.removable) {
            if (in.size() != 1 || out.size() != 1) port_count("mirror must have one input and one output");
        } else {
            if (in.empty() || in.size() > 2 || out.empty() || out.size() > 2)
                port_count("removable mirror must have one or two inputs and outputs");
        }
        break;
    case NodeKind::BeamSplitter:
        if (in.empty() || in.size() > 2) port_count("beam splitter must have one or two inputs");
        if (out.size() != 2) port_count("beam splitter must have exactly two outputs");
        break;
    }
}

void check_routes(const OpticalNetwork& net, const Node& n, std::vector<Violation>& v) {
    const auto in = net.inputs(n.id);
    const auto out = net.outputs(n.id);
    auto has = [](const std::vector<SegmentId>& xs, const std::string& x) {
        return std::find(xs.begin(), xs.end(), x) != xs.end();
    };
    for (const auto& r : n.routes) {
        if (!has(in, r.in))
            v.push_back({"bad_route", n.id, "route input " + r.in + " is not an input of the node"});
        if (!has(out, r.out))
            v.push_back({"bad_route", n.id, "route output " + r.out + " is not an output of the node"});
        if (r.role == RouteRole::Through && !(n.kind == NodeKind::Mirror && n.removable))
            v.push_back({"bad_route", n.id, "through routes are only allowed on removable mirrors"});
    }
    if (n.kind != NodeKind::Detector && n.kind != NodeKind::Source) {
        for (const auto& o : out) {
            bool fed = std::any_of(n.routes.begin(), n.routes.end(),
                                   [&](const Route& r) { return r.out == o; });
            if (!fed) v.push_back({"dangling_port", n.id, "output " + o + " is not fed by any route"});
        }
        for (const auto& i : in) {
            bool used = std::any_of(n.routes.begin(), n.routes.end(),
                                    [&](const Route& r) { return r.in == i; });
            if (!used) v.push_back({"dangling_port", n.id, "input " + i + " is not routed"});
        }
    }

    auto routes_from = [&](const std::string& i, RouteRole role) {
        std::vector<SegmentId> o;
        for (const auto& r : n.routes)
            if (r.in == i && r.role == role) o.push_back(r.out);
        return o;
    };

    switch (n.kind) {
    case NodeKind::BeamSplitter: {
        for (const auto& r : n.routes)
            if (r.role == RouteRole::Through)
                v.push_back({"bad_port_convention", n.id, "beam splitter route must transmit or reflect"});
        std::vector<std::pair<SegmentId, SegmentId>> roles;  // (transmit, reflect) per input
        for (const auto& i : in) {
            auto t = routes_from(i, RouteRole::Transmit);
            auto r = routes_from(i, RouteRole::Reflect);
            if (t.size() != 1 || r.size() != 1 || t.front() == r.front()) {
                v.push_back({"bad_port_convention", n.id,
                             "input " + i + " needs exactly one transmit and one reflect output"});
                continue;
            }
            roles.emplace_back(t.front(), r.front());
        }
        if (roles.size() == 2 &&
            !(roles[0].first == roles[1].second && roles[0].second == roles[1].first))
            v.push_back({"bad_port_convention", n.id, "the two inputs must swap roles on the same outputs"});
        break;
    }
    case NodeKind::Mirror: {
        std::size_t reflects = 0;
        for (const auto& r : n.routes)
            if (r.role == RouteRole::Reflect) ++reflects;
            else if (r.role == RouteRole::Transmit)
                v.push_back({"bad_route", n.id, "mirror routes must reflect or pass through"});
        if (reflects != 1) v.push_back({"bad_route", n.id, "mirror needs exactly one reflect route"});
        if (n.removable) {
            for (const auto& r : n.routes) {
                if (r.role != RouteRole::Reflect) continue;
                if (routes_from(r.in, RouteRole::Through).size() != 1)
                    v.push_back({"bad_route", n.id,
                                 "removable mirror needs a pass-through output for input " + r.in});
            }
        }
        break;
    }
    case NodeKind::PhasePlateSlot:
        for (const auto& r : n.routes)
            if (r.role != RouteRole::Transmit)
                v.push_back({"bad_route", n.id, "plate slot routes must transmit"});
        break;
    case NodeKind::Source:
    case NodeKind::Detector:
        if (!n.routes.empty()) v.push_back({"bad_route", n.id, "sources and detectors have no routes"});
        break;
    }
}

bool has_cycle(const OpticalNetwork& net, std::string& where) {
    std::map<std::string, int> colour;  // 0 white, 1 grey, 2 black
    std::function<bool(const std::string&)> dfs = [&](const std::string& id) {
        colour[id] = 1;
        for (const auto& seg : net.outputs(id)) {
            const auto& next = net.segment(seg).to;
            if (!net.find_node(next)) continue;
            int c = colour[next];
            if (c == 1) {
                where = id + "->" + next;
                return true;
            }
            if (c == 0 && dfs(next)) return true;
        }
        colour[id] = 2;
        return false;
    };
    for (const auto& n : net.nodes())
        if (colour[n.id] == 0 && dfs(n.id)) return true;
    return false;
}

} // namespace

std::vector<Violation> validate(const OpticalNetwork& network) {
    std::vector<Violation> v;
    std::set<std::string> ids;
    for (const auto& n : network.nodes())
        if (!ids.insert(n.id).second) v.push_back({"duplicate_id", n.id, "duplicate node id"});
    ids.clear();
    for (const auto& s : network.segments())
        if (!ids.insert(s.id).second) v.push_back({"duplicate_id", s.id, "duplicate segment id"});
    std::set<std::string> systems;
    for (const auto& n : network.nodes())
        if (n.kind == NodeKind::Source && !n.system.empty() && !systems.insert(n.system).second)
            v.push_back({"duplicate_id", n.id, "system label emitted by two sources"});

    bool endpoints_ok = true;
    for (const auto& s : network.segments()) {
        if (!(s.length > 0.0) || !std::isfinite(s.length))
            v.push_back({"nonpositive_length", s.id, "segment length must be positive"});
        if (!network.find_node(s.from) || !network.find_node(s.to)) {
            v.push_back({"unknown_endpoint", s.id, "segment endpoint does not exist"});
            endpoints_ok = false;
        }
    }
    for (const auto& n : network.nodes()) {
        if (n.removable && n.kind != NodeKind::Mirror)
            v.push_back({"bad_flag", n.id, "only mirrors can be removable"});
        check_kind_ports(network, n, v);
        check_routes(network, n, v);
    }
    if (endpoints_ok) {
        std::string where;
        if (has_cycle(network, where)) v.push_back({"cycle", where, "cycle"});
    }
    return v;
}

namespace {

void require_positive(double len, const char* what) {
    if (!(len > 0.0) || !std::isfinite(len))
        throw Error(ErrorKind::NonPositiveLength, std::string(what) + " must be positive");
}

void add_mz_core(std::vector<Node>& nodes, std::vector<Segment>& segs, double h) {
    nodes.push_back({"src", NodeKind::Source, false, "S", {-h, 0.0}, {}});
    nodes.push_back({"BS2", NodeKind::BeamSplitter, false, "", {0.0, 0.0},
                     {{"1", "6", RouteRole::Transmit}, {"1", "7", RouteRole::Reflect}}});
    nodes.push_back({"S_A", NodeKind::Mirror, false, "", {h, 0.0}, {{"6", "8", RouteRole::Reflect}}});
    nodes.push_back({"S_B", NodeKind::Mirror, false, "", {0.0, h}, {{"7", "9", RouteRole::Reflect}}});
    // |A> travels horizontally, |B> vertically; the horizontal input 9
    // transmits to the horizontal output 4 (D1).
    nodes.push_back({"BS3", NodeKind::BeamSplitter, false, "", {h, h},
                     {{"9", "4", RouteRole::Transmit},
                      {"9", "5", RouteRole::Reflect},
                      {"8", "5", RouteRole::Transmit},
                      {"8", "4", RouteRole::Reflect}}});
    nodes.push_back({"D1", NodeKind::Detector, false, "", {2 * h, h}, {}});
    nodes.push_back({"D2", NodeKind::Detector, false, "", {h, 2 * h}, {}});

    segs.push_back({"1", "src", "BS2", h, "1"});
    segs.push_back({"6", "BS2", "S_A", h, "A"});
    segs.push_back({"7", "BS2", "S_B", h, "B"});
    segs.push_back({"8", "S_A", "BS3", h, "B"});
    segs.push_back({"9", "S_B", "BS3", h, "A"});
    segs.push_back({"4", "BS3", "D1", h, "A"});
    segs.push_back({"5", "BS3", "D2", h, "B"});
}

} // namespace

OpticalNetwork build_renninger_geometry(double arm_length) {
    require_positive(arm_length, "arm_length");
    std::vector<Node> nodes;
    std::vector<Segment> segs;
    add_mz_core(nodes, segs, arm_length / 2.0);
    return OpticalNetwork(std::move(nodes), std::move(segs));
}

OpticalNetwork build_modified_geometry(double arm_length, double prime_arm_length) {
    require_positive(arm_length, "arm_length");
    require_positive(prime_arm_length, "prime_arm_length");
    const double h = arm_length / 2.0;
    const double p = prime_arm_length / 2.0;
    std::vector<Node> nodes;
    std::vector<Segment> segs;
    add_mz_core(nodes, segs, h);

    auto& sb = *std::find_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.id == "S_B"; });
    sb.removable = true;
    sb.routes = {{"7", "9", RouteRole::Reflect},
                 {"A'", "9", RouteRole::Through},
                 {"7", "7s", RouteRole::Through}};

    nodes.push_back({"src'", NodeKind::Source, false, "S'", {-2 * p, h}, {}});
    nodes.push_back({"BS2'", NodeKind::BeamSplitter, false, "", {-p, h},
                     {{"1'", "A'", RouteRole::Transmit}, {"1'", "B'", RouteRole::Reflect}}});
    nodes.push_back({"D2'", NodeKind::Detector, false, "", {-p, h + p}, {}});
    nodes.push_back({"stop_B", NodeKind::Detector, false, "", {0.0, 2 * h}, {}});

    segs.push_back({"1'", "src'", "BS2'", p, "1'"});
    segs.push_back({"A'", "BS2'", "S_B", p, "A'"});
    segs.push_back({"B'", "BS2'", "D2'", p, "B'"});
    segs.push_back({"7s", "S_B", "stop_B", h, "B"});
    return OpticalNetwork(std::move(nodes), std::move(segs));
}

OpticalNetwork build_which_path_geometry(double arm_length) {
    require_positive(arm_length, "arm_length");
    const double h = arm_length / 2.0;
    std::vector<Node> nodes{
        {"src", NodeKind::Source, false, "S", {-h, 0.0}, {}},
        {"BS2", NodeKind::BeamSplitter, false, "", {0.0, 0.0},
         {{"1", "6", RouteRole::Transmit}, {"1", "7", RouteRole::Reflect}}},
        {"D6", NodeKind::Detector, false, "", {h, 0.0}, {}},
        {"D7", NodeKind::Detector, false, "", {0.0, h}, {}},
    };
    std::vector<Segment> segs{
        {"1", "src", "BS2", h, "1"},
        {"6", "BS2", "D6", h, "A"},
        {"7", "BS2", "D7", h, "B"},
    };
    return OpticalNetwork(std::move(nodes), std::move(segs));
}

bool collinear(const OpticalNetwork& network, std::string_view a, std::string_view b, double tol) {
    const auto& sa = network.segment(a);
    const auto& sb = network.segment(b);
    if (sa.to != sb.from) return false;
    const auto& p0 = network.node(sa.from).position;
    const auto& p1 = network.node(sa.to).position;
    const auto& p2 = network.node(sb.to).position;
    const double ax = p1.x - p0.x, ay = p1.y - p0.y;
    const double bx = p2.x - p1.x, by = p2.y - p1.y;
    const double cross = ax * by - ay * bx;
    const double dot = ax * bx + ay * by;
    const double scale = std::hypot(ax, ay) * std::hypot(bx, by);
    return scale > 0.0 && std::abs(cross) <= tol * scale && dot > 0.0;
}

} // namespace mzsim

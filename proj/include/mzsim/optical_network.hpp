#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mzsim {

using NodeId = std::string;
using SegmentId = std::string;

enum class NodeKind { Source, BeamSplitter, Mirror, PhasePlateSlot, Detector };

/// How an input port is carried to an output port.
/// Transmit and Through leave the amplitude unchanged (beam splitters scale by
/// 1/sqrt(2)); Reflect multiplies by i. Through routes exist only on removable
/// mirrors and are taken while the mirror is out of the beam.
enum class RouteRole { Transmit, Reflect, Through };

std::string_view to_string(NodeKind kind);
std::string_view to_string(RouteRole role);
std::optional<NodeKind> node_kind_from_string(std::string_view s);
std::optional<RouteRole> route_role_from_string(std::string_view s);

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

struct Route {
    SegmentId in;
    SegmentId out;
    RouteRole role = RouteRole::Transmit;
    bool operator==(const Route&) const = default;
};

struct Node {
    NodeId id;
    NodeKind kind = NodeKind::Detector;
    bool removable = false;   // mirrors only
    std::string system;       // sources only: label of the emitted system
    Point position;           // layout metadata, not used by the physics
    std::vector<Route> routes;
    bool operator==(const Node&) const = default;
};

struct Segment {
    SegmentId id;
    NodeId from;
    NodeId to;
    double length = 0.0;  // meters
    std::string ket;      // display label of the mode, e.g. "A" or "B'"
    bool operator==(const Segment&) const = default;
};

struct Violation {
    std::string code;
    std::string subject;
    std::string message;
};

/// Immutable interferometer topology. Construction does not validate; call
/// validate() (the builders below always produce valid networks).
class OpticalNetwork {
public:
    OpticalNetwork() = default;
    OpticalNetwork(std::vector<Node> nodes, std::vector<Segment> segments);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Segment>& segments() const { return segments_; }

    const Node* find_node(std::string_view id) const;
    const Segment* find_segment(std::string_view id) const;
    const Node& node(std::string_view id) const;        // throws UnknownNode
    const Segment& segment(std::string_view id) const;  // throws UnknownSegment

    std::vector<SegmentId> inputs(std::string_view node) const;
    std::vector<SegmentId> outputs(std::string_view node) const;
    std::vector<NodeId> detectors() const;
    std::vector<NodeId> sources() const;

    /// Source node emitting the given system label, or nullptr.
    const Node* source_of(std::string_view system) const;

    /// True when `target` can be reached from the end of `from` (or is `from`),
    /// following every route regardless of element state.
    bool reaches(std::string_view from, std::string_view target) const;

    /// Unique directed chain of segments from the output of `from_node` to the
    /// input of `to_node`, if exactly one exists.
    std::optional<std::vector<SegmentId>> route_between(std::string_view from_node,
                                                        std::string_view to_node) const;

    bool operator==(const OpticalNetwork& other) const {
        return nodes_ == other.nodes_ && segments_ == other.segments_;
    }

private:
    std::vector<Node> nodes_;
    std::vector<Segment> segments_;
    std::map<std::string, std::size_t, std::less<>> node_index_;
    std::map<std::string, std::size_t, std::less<>> segment_index_;
};

/// Returns every invariant violation; an empty list means the network is valid.
std::vector<Violation> validate(const OpticalNetwork& network);

/// Two-beam-splitter Mach-Zehnder with mirrors S_A (arm 6-8) and S_B (arm 7-9)
/// and detectors D1 (path 4) and D2 (path 5). Every segment is arm_length / 2.
OpticalNetwork build_renninger_geometry(double arm_length);

/// Adds a second source src' feeding BS2', whose transmitted arm A' runs in
/// line with path 9 through a removable S_B and whose reflected arm B' ends at
/// D2'. While S_B is out of the beam, path 7 continues onto 7s and a beam stop.
OpticalNetwork build_modified_geometry(double arm_length, double prime_arm_length);

/// Detectors D6 and D7 placed mid-arm in place of the two mirrors.
OpticalNetwork build_which_path_geometry(double arm_length);

/// True when segment `a` ends where `b` starts and both point the same way.
bool collinear(const OpticalNetwork& network, std::string_view a, std::string_view b,
               double tol = 1e-12);

} // namespace mzsim

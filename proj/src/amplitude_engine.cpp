#include "mzsim/amplitude_engine.hpp"

#include <cmath>
#include <deque>
#include <numbers>

#include "mzsim/error.hpp"

namespace mzsim {

namespace {
constexpr Amplitude kI{0.0, 1.0};
const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

const Node& node_of_kind(const OpticalNetwork& network, std::string_view id, NodeKind kind) {
    const auto& n = network.node(id);
    if (n.kind != kind)
        throw Error(ErrorKind::UnknownNode,
                    std::string(id) + " is not a " + std::string(to_string(kind)));
    return n;
}
} // namespace

Amplitude PureState::amplitude(std::string_view mode) const {
    auto it = amps_.find(std::string(mode));
    return it == amps_.end() ? Amplitude{} : it->second;
}

double PureState::norm_squared() const {
    double n = 0.0;
    for (const auto& [_, a] : amps_) n += std::norm(a);
    return n;
}

PureState PureState::scaled(Amplitude factor) const {
    PureState out = *this;
    for (auto& [_, a] : out.amps_) a *= factor;
    return out;
}

std::set<SegmentId> PureState::occupied_modes(double threshold) const {
    std::set<SegmentId> out;
    for (const auto& [m, a] : amps_)
        if (std::norm(a) > threshold) out.insert(m);
    return out;
}

void WaveNumbers::check() const {
    for (double x : {k, k_prime, v_s, v_s_prime, m_s, m_s_prime})
        if (!(x > 0.0) || !std::isfinite(x))
            throw Error(ErrorKind::NonPositiveInput, "wave numbers, speeds and masses must be positive");
}

PureState apply_beam_splitter(const PureState& state, const OpticalNetwork& network,
                              std::string_view node) {
    const auto& bs = node_of_kind(network, node, NodeKind::BeamSplitter);
    PureState out = state;
    for (const auto& in : network.inputs(node)) out.erase(in);
    for (const auto& r : bs.routes) {
        const Amplitude a = state.amplitude(r.in);
        const Amplitude factor = r.role == RouteRole::Reflect ? kI * kInvSqrt2 : Amplitude{kInvSqrt2};
        out.add(r.out, a * factor);
    }
    return out;
}

PureState apply_mirror(const PureState& state, const OpticalNetwork& network, std::string_view node,
                       bool present) {
    const auto& m = node_of_kind(network, node, NodeKind::Mirror);
    if (!present) throw Error(ErrorKind::MirrorRemoved, std::string(node));
    PureState out = state;
    for (const auto& r : m.routes) {
        if (r.role != RouteRole::Reflect) continue;
        const Amplitude a = state.amplitude(r.in);
        out.erase(r.in);
        out.add(r.out, kI * a);
    }
    return out;
}

PureState apply_pass_through(const PureState& state, const OpticalNetwork& network,
                             std::string_view node) {
    const auto& m = node_of_kind(network, node, NodeKind::Mirror);
    PureState out = state;
    for (const auto& r : m.routes)
        if (r.role == RouteRole::Through) out.erase(r.in);
    for (const auto& r : m.routes)
        if (r.role == RouteRole::Through) out.add(r.out, state.amplitude(r.in));
    return out;
}

PureState apply_arm_phase(const PureState& state, const OpticalNetwork& network,
                          std::string_view segment, double phi) {
    network.segment(segment);
    PureState out = state;
    if (out.contains(segment)) out.set(std::string(segment), state.amplitude(segment) * std::polar(1.0, phi));
    return out;
}

PureState propagate_phase(const PureState& state, double k, double dz) {
    if (dz < 0.0) throw Error(ErrorKind::NegativeDistance, "dz must be non-negative");
    return state.scaled(std::polar(1.0, k * dz));
}

ConditionalState post_select(const JointState& joint, const OpticalNetwork& network,
                             std::string_view detector) {
    node_of_kind(network, detector, NodeKind::Detector);
    Amplitude a{};
    for (const auto& seg : network.inputs(detector)) a += joint.ancilla.amplitude(seg);
    if (a == Amplitude{})
        throw Error(ErrorKind::ZeroProbabilityOutcome, "no ancilla amplitude reaches " + std::string(detector));
    const double magnitude = std::abs(a);
    ConditionalState out;
    out.state = joint.system.scaled(magnitude);
    out.weight = std::norm(a) * joint.system.norm_squared();
    return out;
}

std::map<std::string, double> detection_probabilities(const ConditionalState& state,
                                                      const OpticalNetwork& network,
                                                      const ElementConfig& config) {
    if (!(state.weight > 0.0)) throw Error(ErrorKind::ZeroWeight, "post-selection weight is zero");
    std::map<std::string, double> probs;
    for (const auto& d : network.detectors()) probs[d] = 0.0;
    for (const auto& [mode, a] : state.state.modes()) {
        if (a == Amplitude{}) continue;
        const auto& seg = network.segment(mode);
        const auto& end = network.node(seg.to);
        std::string key;
        if (end.kind == NodeKind::Detector) {
            key = end.id;
        } else if (end.kind == NodeKind::Mirror && config.mirror_present(end.id)) {
            for (const auto& r : end.routes)
                if (r.role == RouteRole::Through && r.in == mode) key = end.id;
        }
        if (key.empty())
            throw Error(ErrorKind::NonTerminalState, "mode " + mode + " has not reached a detector");
        probs[key] += std::norm(a) / state.weight;
    }
    return probs;
}

PureState evolve(const OpticalNetwork& network, std::string_view system, const ElementConfig& config,
                 std::optional<double> wave_number) {
    const Node* src = network.source_of(system);
    if (!src) throw Error(ErrorKind::UnknownNode, "no source emits system " + std::string(system));

    // Kahn topological order over nodes.
    std::map<std::string, int> indegree;
    for (const auto& n : network.nodes()) indegree[n.id] = 0;
    for (const auto& s : network.segments()) ++indegree[s.to];
    std::deque<std::string> ready;
    for (const auto& n : network.nodes())
        if (indegree[n.id] == 0) ready.push_back(n.id);
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto id = ready.front();
        ready.pop_front();
        order.push_back(id);
        for (const auto& seg : network.outputs(id))
            if (--indegree[network.segment(seg).to] == 0) ready.push_back(network.segment(seg).to);
    }
    if (order.size() != network.nodes().size())
        throw Error(ErrorKind::InvalidNetwork, "network contains a cycle");

    PureState state;
    state.set(network.outputs(src->id).front(), Amplitude{1.0});
    for (const auto& id : order) {
        const auto& node = network.node(id);
        for (const auto& in : network.inputs(id)) {
            if (!state.contains(in)) continue;
            if (auto it = config.phases.find(in); it != config.phases.end())
                state = apply_arm_phase(state, network, in, it->second);
            if (wave_number)
                state = apply_arm_phase(state, network, in, *wave_number * network.segment(in).length);
        }
        switch (node.kind) {
        case NodeKind::BeamSplitter:
            state = apply_beam_splitter(state, network, id);
            break;
        case NodeKind::Mirror:
            state = config.mirror_present(id) ? apply_mirror(state, network, id)
                                              : apply_pass_through(state, network, id);
            break;
        case NodeKind::PhasePlateSlot:
            for (const auto& r : node.routes) {
                const Amplitude a = state.amplitude(r.in);
                if (!state.contains(r.in)) continue;
                state.erase(r.in);
                state.add(r.out, a);
            }
            break;
        case NodeKind::Source:
        case NodeKind::Detector:
            break;
        }
    }
    return state;
}

ModifiedPrediction predict_modified_setup(double delta) {
    const auto net = build_modified_geometry(1.0, 1.0);
    JointState joint{PureState{{"1", 1.0}}, PureState{{"1'", 1.0}}};
    joint.ancilla = apply_beam_splitter(joint.ancilla, net, "BS2'");
    joint.system = apply_beam_splitter(joint.system, net, "BS2");
    joint.system = apply_mirror(joint.system, net, "S_A");
    joint.system = apply_mirror(joint.system, net, "S_B");

    ConditionalState cond = post_select(joint, net, "D2'");
    cond.state = apply_arm_phase(cond.state, net, "9", delta);
    ModifiedPrediction out;
    out.before_bs3 = cond.state;
    cond.state = apply_beam_splitter(cond.state, net, "BS3");
    const auto probs = detection_probabilities(cond, net);
    out.post_weight = cond.weight;
    out.p_d1 = probs.at("D1");
    out.p_d2 = probs.at("D2");
    out.final_state = cond.state;
    return out;
}

} // namespace mzsim

#pragma once

#include <complex>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "mzsim/optical_network.hpp"

namespace mzsim {

using Amplitude = std::complex<double>;

/// Complex amplitude per mode. A mode is the occupancy of one directed
/// segment, so the ket of a mode is the segment's `ket` label.
class PureState {
public:
    PureState() = default;
    PureState(std::initializer_list<std::pair<const SegmentId, Amplitude>> init) : amps_(init) {}

    Amplitude amplitude(std::string_view mode) const;
    void set(const SegmentId& mode, Amplitude a) { amps_[mode] = a; }
    void add(const SegmentId& mode, Amplitude a) { amps_[mode] += a; }
    void erase(const SegmentId& mode) { amps_.erase(mode); }
    bool contains(std::string_view mode) const { return amps_.find(std::string(mode)) != amps_.end(); }

    double norm_squared() const;
    PureState scaled(Amplitude factor) const;

    /// Modes whose squared magnitude exceeds `threshold`.
    std::set<SegmentId> occupied_modes(double threshold = 1e-24) const;

    const std::map<SegmentId, Amplitude>& modes() const { return amps_; }
    bool operator==(const PureState&) const = default;

private:
    std::map<SegmentId, Amplitude> amps_;
};

/// Product state of the measured system S and the ancilla system S'.
struct JointState {
    PureState system;
    PureState ancilla;
    double norm_squared() const { return system.norm_squared() * ancilla.norm_squared(); }
};

/// Post-selected system state. Amplitudes are left unnormalized; `weight` is
/// the probability of the retained outcome and normalizes the Born rule.
struct ConditionalState {
    PureState state;
    double weight = 1.0;
};

struct WaveNumbers {
    double k = 1.0;        // rad/m, system S
    double k_prime = 1.0;  // rad/m, system S'
    double v_s = 1.0;      // m/s
    double v_s_prime = 1.0;
    double m_s = 1.0;      // kg
    double m_s_prime = 1.0;

    void check() const;  // throws NonPositiveInput
};

/// Element state as seen by a wave: accumulated plate phase per segment and
/// the mirrors that are out of the beam.
struct ElementConfig {
    std::map<SegmentId, double> phases;
    std::set<NodeId> removed_mirrors;

    bool mirror_present(std::string_view id) const {
        return removed_mirrors.find(std::string(id)) == removed_mirrors.end();
    }
};

PureState apply_beam_splitter(const PureState& state, const OpticalNetwork& network,
                              std::string_view node);

/// Reflection: the incoming mode is relabeled to the outgoing one and picks up
/// a factor i. Throws MirrorRemoved when `present` is false.
PureState apply_mirror(const PureState& state, const OpticalNetwork& network, std::string_view node,
                       bool present = true);

/// A removed mirror: every input follows its through route unchanged.
PureState apply_pass_through(const PureState& state, const OpticalNetwork& network,
                             std::string_view node);

PureState apply_arm_phase(const PureState& state, const OpticalNetwork& network,
                          std::string_view segment, double phi);

/// Multiplies every mode by exp(i k dz).
PureState propagate_phase(const PureState& state, double k, double dz);

/// Retains the branch in which the ancilla reaches `detector`. The returned
/// system factor is scaled by the magnitude of that ancilla amplitude, so its
/// squared norm equals the weight.
ConditionalState post_select(const JointState& joint, const OpticalNetwork& network,
                             std::string_view detector);

/// Born-rule probability per detector (and per mirror absorbing a blocked
/// pass-through input). Every detector of the network appears in the map.
std::map<std::string, double> detection_probabilities(const ConditionalState& state,
                                                      const OpticalNetwork& network,
                                                      const ElementConfig& config = {});

/// Evolves one unit-amplitude quantum of `system` from its source to the
/// terminal modes. With a wave number, each traversed segment also multiplies
/// its mode by exp(i k length).
PureState evolve(const OpticalNetwork& network, std::string_view system, const ElementConfig& config,
                 std::optional<double> wave_number = std::nullopt);

struct ModifiedPrediction {
    double post_weight = 0.0;
    double p_d1 = 0.0;
    double p_d2 = 0.0;
    PureState final_state;      // S after BS3, unnormalized
    PureState before_bs3;       // S after post-selection and the delta phase
};

/// Runs the two-source pipeline step by step: BS2/BS2', the mirrors,
/// post-selection on D2', a phase `delta` on path 9, and BS3.
ModifiedPrediction predict_modified_setup(double delta);

} // namespace mzsim

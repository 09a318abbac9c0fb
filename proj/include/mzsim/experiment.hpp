#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mzsim/optical_network.hpp"
#include "mzsim/timeline.hpp"

namespace mzsim {

struct SystemSpec {
    std::string id;
    double speed = 1.0;        // m/s
    double mass = 1.0;         // kg
    double wave_number = 1.0;  // rad/m
    bool operator==(const SystemSpec&) const = default;
};

struct PostSelection {
    std::string system;
    NodeId detector;
    bool operator==(const PostSelection&) const = default;
};

/// Everything a trial needs: geometry, the quanta, timing and post-selection.
struct Experiment {
    OpticalNetwork network;
    std::vector<SystemSpec> systems;
    Schedule schedule;
    std::string measured_system = "S";
    std::optional<PostSelection> post_select;
    double epsilon = 0.01;             // superposition window, fraction of the segment
    bool empty_waves_persist = true;

    std::map<std::string, double> speeds() const {
        std::map<std::string, double> v;
        for (const auto& s : systems) v[s.id] = s.speed;
        return v;
    }

    TimelineOptions timeline_options(bool apply_illegal = false) const {
        TimelineOptions o;
        o.measured_system = measured_system;
        o.empty_waves_persist = empty_waves_persist;
        o.apply_illegal_events = apply_illegal;
        return o;
    }

    bool operator==(const Experiment&) const = default;
};

/// Labels a quantum of `system` can end at: reachable detectors plus mirrors
/// whose back side it can hit.
std::vector<std::string> outcome_labels(const OpticalNetwork& network, const std::string& system);

} // namespace mzsim

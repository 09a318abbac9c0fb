#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "mzsim/amplitude_engine.hpp"
#include "mzsim/optical_network.hpp"

namespace mzsim {

enum class WaveKind { Undifferentiated, Full, Empty };
enum class TrackStatus { Live, Split, Detected, Absorbed, Vanished };

std::string_view to_string(WaveKind kind);
std::string_view to_string(TrackStatus status);

/// A propagating wavefront. The front position is derived from the absolute
/// time it entered its current segment, so stepping never accumulates error.
struct WavefrontTrack {
    int id = -1;
    std::string system;
    WaveKind kind = WaveKind::Undifferentiated;
    SegmentId segment;
    double entered_at = 0.0;
    double speed = 1.0;
    Amplitude amplitude{1.0};
    int parent = -1;
    TrackStatus status = TrackStatus::Live;
    double ended_at = std::numeric_limits<double>::quiet_NaN();
    NodeId end_node;
    std::vector<SegmentId> history;  // segments traversed by this lineage

    bool live() const { return status == TrackStatus::Live; }
    bool carries_particle() const { return kind != WaveKind::Empty; }
    /// Time at which the front reaches `fraction` of the current segment.
    double crossing_time(double segment_length, double fraction) const {
        return entered_at + fraction * segment_length / speed;
    }
    double position(double t, double segment_length) const;
};

struct InsertPlate {
    SegmentId segment;
    double phase = 0.0;
    double position = 0.5;  // fraction of the segment length
    bool operator==(const InsertPlate&) const = default;
};
struct RemovePlate {
    SegmentId segment;
    bool operator==(const RemovePlate&) const = default;
};
struct RemoveMirror {
    NodeId mirror;
    bool operator==(const RemoveMirror&) const = default;
};
using InterventionAction = std::variant<InsertPlate, RemovePlate, RemoveMirror>;

struct InterventionEvent {
    double time = 0.0;
    InterventionAction action;
    bool operator==(const InterventionEvent&) const = default;
};

/// Segment id or mirror id the action acts on.
std::string target_of(const InterventionAction& action);
std::string describe(const InterventionAction& action);

struct Schedule {
    std::map<NodeId, double> emissions;  // per source; missing sources emit at t = 0
    std::vector<InterventionEvent> events;

    /// Sorted times, non-negative, no two events on one target at one instant,
    /// every target present in the network. Throws InvalidSchedule/UnknownTarget.
    void check(const OpticalNetwork& network) const;
    bool operator==(const Schedule&) const = default;
};

enum class Legality { Legal, IllegalAlreadyPassed };
std::string_view to_string(Legality legality);

struct LegalityVerdict {
    Legality legality = Legality::Legal;
    std::vector<std::string> steered_systems;  // systems whose waves have yet to reach the target
    bool steers_measured = false;
    std::string reason;
    bool legal() const { return legality == Legality::Legal; }
};

struct Plate {
    SegmentId segment;
    double position = 0.5;
    double phase = 0.0;
    double inserted_at = 0.0;
    std::optional<double> removed_at;
    bool present_at(double t) const { return inserted_at <= t && (!removed_at || *removed_at > t); }
};

struct Click {
    std::string system;
    NodeId detector;  // detector id, or the id of a mirror that absorbed the particle
    double time = 0.0;
    int track = -1;
};

/// Another system's front sharing the segment a track is leaving.
struct Superposition {
    double time = 0.0;
    SegmentId segment;
    int track = -1;
    int other_track = -1;
    std::string other_system;
    WaveKind other_kind = WaveKind::Empty;
    double gap = 0.0;  // distance of the other front from the segment end
};

struct InterventionRecord {
    InterventionEvent event;
    LegalityVerdict verdict;
    bool applied = false;
};

struct TimelineOptions {
    std::string measured_system = "S";
    double coincidence_tolerance = 1e-9;  // seconds, relative to max(1, t)
    bool empty_waves_persist = true;      // whether EWs survive the particle's detection
    bool apply_illegal_events = false;    // apply IllegalAlreadyPassed events anyway (no-effect tests)
};

struct BranchRequest {
    const OpticalNetwork& network;
    const NodeId& node;
    const std::string& system;
    const PureState& incoming;
    const PureState& outgoing;
};
/// Chooses the output segment that carries the particle. Called only when a
/// particle-carrying front crosses a beam splitter.
using BranchPolicy = std::function<SegmentId(const BranchRequest&)>;

struct ExitContext {
    const WavefrontTrack& track;
    double time;
    const std::vector<Superposition>& partners;
};
/// Extra factor applied to a front's amplitude as it leaves a segment.
using ExitHook = std::function<Amplitude(const ExitContext&)>;

/// Single-writer discrete-event clock over one network. All crossing times
/// are computed analytically; advancing processes every happening strictly
/// before the target time, interventions at an instant before crossings.
class Timeline {
public:
    Timeline(OpticalNetwork network, std::map<std::string, double> speeds, Schedule schedule,
             TimelineOptions options = {});

    void set_branch_policy(BranchPolicy policy) { policy_ = std::move(policy); }
    void set_exit_hook(ExitHook hook) { exit_hook_ = std::move(hook); }

    double now() const { return now_; }
    bool finished() const;

    void advance(double dt);
    void advance_to(double t);
    void run_to_completion();

    /// Time of the next emission, scheduled event or crossing, if any.
    std::optional<double> next_happening() const;

    LegalityVerdict legality_check(const InterventionEvent& event) const;
    /// Throws UnknownTarget or NotRemovable; does not check legality.
    void apply_intervention(const InterventionEvent& event);
    /// Legality check followed by application when legal (or when illegal
    /// events are permitted). The event is stamped with the current time.
    InterventionRecord submit(InterventionAction action);

    const OpticalNetwork& network() const { return network_; }
    const TimelineOptions& options() const { return options_; }
    const std::vector<WavefrontTrack>& tracks() const { return tracks_; }
    const std::vector<Click>& clicks() const { return clicks_; }
    const std::vector<Plate>& plates() const { return plates_; }
    const std::vector<Superposition>& superpositions() const { return superpositions_; }
    const std::vector<InterventionRecord>& interventions() const { return records_; }
    bool mirror_present(const NodeId& id, double t) const;
    bool emitted(const std::string& system) const;

    /// Element state as actually encountered by the waves of `system`.
    ElementConfig seen_by(const std::string& system) const;

private:
    void emit(const Node& source);
    void process_scheduled(const InterventionEvent& event);
    void cross(std::size_t track_index);
    void finish_track(WavefrontTrack& t, TrackStatus status, const NodeId& node, double time);
    void register_click(const WavefrontTrack& t, const NodeId& node);
    Amplitude exit_factor(WavefrontTrack& t);
    WavefrontTrack& spawn(const WavefrontTrack& parent, const SegmentId& seg, Amplitude amp,
                          WaveKind kind);
    double exit_time(const WavefrontTrack& t) const;
    double plate_crossing(const WavefrontTrack& t, const Plate& p) const;

    struct Location {
        SegmentId segment;     // set for plate locations
        double fraction = 0.0;
        NodeId node;           // set for mirror locations
    };
    Location locate(const InterventionAction& action) const;
    bool passed(const std::string& system, const Location& loc, double t) const;
    bool ahead(const std::string& system, const Location& loc, double t) const;

    OpticalNetwork network_;
    std::map<std::string, double> speeds_;
    TimelineOptions options_;
    BranchPolicy policy_;
    ExitHook exit_hook_;

    double now_ = 0.0;
    std::vector<std::pair<double, NodeId>> pending_emissions_;  // sorted
    std::vector<InterventionEvent> pending_events_;            // sorted
    std::size_t next_event_ = 0;
    std::set<std::string> emitted_;

    std::vector<WavefrontTrack> tracks_;
    std::vector<Click> clicks_;
    std::vector<Plate> plates_;
    std::map<NodeId, double> mirror_removed_at_;
    std::vector<Superposition> superpositions_;
    std::vector<InterventionRecord> records_;
    std::map<std::string, std::set<SegmentId>> exited_;
    std::map<std::string, ElementConfig> seen_;
};

/// Runs a schedule to completion with no particle assignment (every front
/// stays undifferentiated).
Timeline replay(const OpticalNetwork& network, const std::map<std::string, double>& speeds,
                const Schedule& schedule, TimelineOptions options = {});

// ---- catch-up schedule for the two-source setup ----

struct CatchupOptions {
    double epsilon = 0.01;  // superposition window as a fraction of the final segment
    std::string measured_system = "S";
    std::string ancilla_system = "S'";
    bool empty_waves_persist = true;
    bool force_bisection = false;
};

struct CatchupSchedule {
    Schedule schedule;
    NodeId mirror;
    SegmentId final_segment;
    double final_segment_length = 0.0;
    double removal_time = 0.0;
    double measured_passes_mirror = 0.0;  // S leaves the mirror
    double ancilla_reaches_mirror = 0.0;  // S' arrives at the mirror
    double measured_enters_recombiner = 0.0;
    double gap = 0.0;                     // replayed distance of EW_S' from the recombiner
    std::string method;                   // "closed_form" or "bisection"
};

/// Emission offsets and a mirror-removal time such that the measured system
/// leaves the removable mirror before removal, the ancilla's transmitted wave
/// passes the removed mirror, and it trails the measured wave by less than
/// epsilon * (final segment length) when the latter enters the recombiner.
/// Throws NoFeasibleSchedule.
CatchupSchedule solve_catchup_schedule(const OpticalNetwork& network, const WaveNumbers& speeds,
                                       const CatchupOptions& options = {});

} // namespace mzsim

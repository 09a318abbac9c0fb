#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mzsim/experiment.hpp"
#include "mzsim/random_stream.hpp"
#include "mzsim/report.hpp"
#include "mzsim/timeline.hpp"

namespace mzsim {

/// Phase picked up by the measured system's wave on `applies_to` when an
/// empty wave of another system trails it within the superposition window.
struct DisturbanceModel {
    bool enabled = false;
    double delta = 0.0;  // radians, [0, 2pi)
    SegmentId applies_to = "9";

    void check() const;  // throws InvariantViolation
    bool operator==(const DisturbanceModel&) const = default;
};

struct BranchChoice {
    SegmentId full;   // carries the particle
    SegmentId empty;
};

/// Lossless 50-50 assignment of the particle at a beam splitter entered
/// through a single input.
BranchChoice sample_branch(RandomStream& rng, const OpticalNetwork& network, const NodeId& beam_splitter,
                           const SegmentId& input);

/// Draws the output carrying the particle with Born weights of the outgoing
/// amplitudes of a recombining beam splitter.
SegmentId guide_at_recombiner(RandomStream& rng, const PureState& outgoing);

struct TrialOutcome {
    NodeId detector;                        // where the measured system clicked
    double click_time = 0.0;
    std::vector<SegmentId> path;            // particle lineage of the measured system
    std::map<std::string, NodeId> clicks;   // per system
    bool retained = true;                   // post-selection satisfied
    bool disturbed = false;                 // the disturbance phase was applied
    bool operator==(const TrialOutcome&) const = default;
};

/// One trial that can be stepped (live steering) or run to completion.
class PilotWaveTrial {
public:
    PilotWaveTrial(const Experiment& experiment, RandomStream rng, DisturbanceModel disturbance = {},
                   bool apply_illegal_events = false);
    PilotWaveTrial(const PilotWaveTrial&) = delete;
    PilotWaveTrial& operator=(const PilotWaveTrial&) = delete;

    Timeline& timeline() { return *timeline_; }
    const Timeline& timeline() const { return *timeline_; }
    bool finished() const { return timeline_->finished(); }
    void run_to_completion() { timeline_->run_to_completion(); }

    /// Throws std::logic_error when a system did not click exactly once.
    TrialOutcome outcome() const;

private:
    std::unique_ptr<RandomStream> rng_;
    std::unique_ptr<Timeline> timeline_;
    std::string measured_;
    std::optional<PostSelection> post_select_;
    DisturbanceModel disturbance_;
    bool disturbed_ = false;
};

TrialOutcome run_trial(const Experiment& experiment, RandomStream rng, const DisturbanceModel& disturbance,
                       bool apply_illegal_events = false);

struct MonteCarloOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    bool apply_illegal_events = false;
};

/// Trial i uses RandomStream(seed).split(i); the report does not depend on
/// the number of worker threads.
RunReport run_monte_carlo(const Experiment& experiment, std::size_t n_trials, std::uint64_t seed,
                          const DisturbanceModel& disturbance, const MonteCarloOptions& options = {});

/// Speed of S' whose kinetic-energy frequency m v^2 matches that of S.
double matched_velocity(double m_s, double v_s, double m_s_prime);

/// Disturbance phase factor for one segment exit; shared by the trial engine
/// and the theoretical prediction.
Amplitude disturbance_factor(const DisturbanceModel& model, const std::string& measured_system,
                             double epsilon, double segment_length, const ExitContext& ctx);

} // namespace mzsim

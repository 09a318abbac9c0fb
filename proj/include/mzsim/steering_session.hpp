#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mzsim/pilot_wave_engine.hpp"
#include "mzsim/scenarios.hpp"

namespace mzsim {

enum class SessionState { Paused, Running, Finished };
std::string_view to_string(SessionState state);

enum class CommandOp { Start, Pause, SetRate, Intervene, RevealParticle };

struct Command {
    CommandOp op = CommandOp::Start;
    double rate = 0.0;                   // SetRate
    std::optional<InterventionAction> action;  // Intervene
    bool reveal = false;                 // RevealParticle
    std::optional<double> client_time;   // advisory only, never used for stamping
};

struct CommandResult {
    std::uint64_t seq = 0;  // position in the event log
    std::string op;         // wire name of the command
    bool accepted = false;
    std::string reason;     // rejection reason, e.g. IllegalAlreadyPassed
    double time = 0.0;      // simulated time the command was stamped with
    bool steers_measured = false;
};

struct TrackSnapshot {
    int id = -1;
    std::string system;
    std::string kind;  // "wave" while masked, else "FW" or "EW"
    SegmentId segment;
    double fraction = 0.0;
};

struct PlateSnapshot {
    SegmentId segment;
    double position = 0.5;
    double phase = 0.0;
};

struct Frame {
    std::uint64_t seq = 0;
    double time = 0.0;
    SessionState state = SessionState::Paused;
    bool revealed = false;
    std::vector<TrackSnapshot> tracks;
    std::vector<PlateSnapshot> plates;
    std::map<NodeId, bool> mirrors;  // removable mirrors, true while in the beam
    std::map<NodeId, std::size_t> counters;
    std::optional<CommandResult> ack;  // last command since the previous frame
    std::optional<TrialOutcome> outcome;
};

struct LogEntry {
    Command command;
    CommandResult result;
};

/// One live trial. All public members lock the session, so commands and
/// ticks from different threads are serialized into a single writer.
class Session {
public:
    /// Throws InvalidScenario.
    Session(std::string id, Scenario scenario, double clock_rate);

    const std::string& id() const { return id_; }
    const Scenario& scenario() const { return scenario_; }

    SessionState state() const;
    double clock_rate() const;
    double time() const;

    CommandResult command(const Command& cmd);

    /// Advances by clock_rate * real_seconds while running and returns the
    /// resulting frame. Paused sessions repeat the same simulated time.
    Frame tick(double real_seconds);
    Frame frame() const;

    std::vector<LogEntry> event_log() const;
    std::map<NodeId, std::size_t> counters() const;

private:
    Frame make_frame() const;

    mutable std::mutex mutex_;
    std::string id_;
    Scenario scenario_;
    double rate_;
    SessionState state_ = SessionState::Paused;
    bool reveal_ = false;
    std::unique_ptr<PilotWaveTrial> trial_;
    std::vector<LogEntry> log_;
    std::optional<CommandResult> pending_ack_;
    mutable std::uint64_t frame_seq_ = 0;
};

/// Single-trial scenario that a headless run uses to reproduce a session:
/// accepted interventions become scheduled events at their stamped times.
Scenario scenario_from_log(const Scenario& scenario, const std::vector<LogEntry>& log);

/// Final per-detector counters of the headless replay of a session log.
std::map<NodeId, std::size_t> replay_counters(const Scenario& scenario, const std::vector<LogEntry>& log);

class SessionRegistry {
public:
    /// Throws InvalidScenario or NonPositiveInput.
    std::shared_ptr<Session> open(Scenario scenario, double clock_rate);
    std::shared_ptr<Session> get(const std::string& id) const;  // throws UnknownSession
    std::vector<std::shared_ptr<Session>> all() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
};

} // namespace mzsim

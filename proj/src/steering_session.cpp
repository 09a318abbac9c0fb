#include "mzsim/steering_session.hpp"

#include <algorithm>
#include <cmath>

#include "mzsim/error.hpp"

namespace mzsim {

std::string_view to_string(SessionState state) {
    switch (state) {
    case SessionState::Paused: return "paused";
    case SessionState::Running: return "running";
    case SessionState::Finished: return "finished";
    }
    return "paused";
}

namespace {

std::string op_name(const Command& c) {
    switch (c.op) {
    case CommandOp::Start: return "start";
    case CommandOp::Pause: return "pause";
    case CommandOp::SetRate: return "set_rate";
    case CommandOp::RevealParticle: return "reveal_particle";
    case CommandOp::Intervene: break;
    }
    if (!c.action) return "intervene";
    if (std::holds_alternative<InsertPlate>(*c.action)) return "insert_plate";
    if (std::holds_alternative<RemovePlate>(*c.action)) return "remove_plate";
    return "remove_mirror";
}

std::string masked_kind(WaveKind kind, bool reveal) {
    if (!reveal) return "wave";
    switch (kind) {
    case WaveKind::Full: return "FW";
    case WaveKind::Empty: return "EW";
    case WaveKind::Undifferentiated: break;
    }
    return "wave";
}

} // namespace

Session::Session(std::string id, Scenario scenario, double clock_rate)
    : id_(std::move(id)), scenario_(std::move(scenario)), rate_(clock_rate) {
    if (!(clock_rate > 0.0) || !std::isfinite(clock_rate))
        throw Error(ErrorKind::NonPositiveInput, "clock rate must be positive");
    try {
        check_scenario(scenario_);
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidScenario, e.what());
    }
    trial_ = std::make_unique<PilotWaveTrial>(scenario_.experiment, RandomStream(scenario_.seed).split(0),
                                              scenario_.disturbance);
}

SessionState Session::state() const {
    std::lock_guard lock(mutex_);
    return state_;
}

double Session::clock_rate() const {
    std::lock_guard lock(mutex_);
    return rate_;
}

double Session::time() const {
    std::lock_guard lock(mutex_);
    return trial_->timeline().now();
}

CommandResult Session::command(const Command& cmd) {
    std::lock_guard lock(mutex_);
    CommandResult r;
    r.seq = log_.size();
    r.op = op_name(cmd);
    r.time = trial_->timeline().now();
    r.accepted = true;
    switch (cmd.op) {
    case CommandOp::Start:
        if (state_ == SessionState::Finished) {
            r.accepted = false;
            r.reason = "Finished";
        } else {
            state_ = SessionState::Running;
        }
        break;
    case CommandOp::Pause:
        if (state_ == SessionState::Running) state_ = SessionState::Paused;
        break;
    case CommandOp::SetRate:
        if (cmd.rate > 0.0 && std::isfinite(cmd.rate)) {
            rate_ = cmd.rate;
        } else {
            r.accepted = false;
            r.reason = "NonPositiveInput";
        }
        break;
    case CommandOp::RevealParticle:
        reveal_ = cmd.reveal;
        break;
    case CommandOp::Intervene: {
        if (!cmd.action) {
            r.accepted = false;
            r.reason = "MissingAction";
            break;
        }
        // A schedule cannot hold two events on one target at one instant, so
        // neither can a session that must replay as one.
        const bool clash = std::any_of(log_.begin(), log_.end(), [&](const LogEntry& e) {
            return e.command.action && e.result.accepted && e.result.time == r.time &&
                   target_of(*e.command.action) == target_of(*cmd.action);
        });
        if (clash) {
            r.accepted = false;
            r.reason = "InvalidSchedule";
            break;
        }
        try {
            const auto rec = trial_->timeline().submit(*cmd.action);
            r.accepted = rec.applied;
            r.steers_measured = rec.verdict.steers_measured;
            if (!rec.applied) r.reason = std::string(to_string(rec.verdict.legality));
        } catch (const Error& e) {
            r.accepted = false;
            r.reason = std::string(to_string(e.kind()));
        }
        break;
    }
    }
    log_.push_back({cmd, r});
    pending_ack_ = r;
    return r;
}

Frame Session::tick(double real_seconds) {
    std::lock_guard lock(mutex_);
    if (state_ == SessionState::Running) {
        auto& tl = trial_->timeline();
        tl.advance_to(tl.now() + rate_ * std::max(0.0, real_seconds));
        if (tl.finished()) state_ = SessionState::Finished;
    }
    Frame f = make_frame();
    pending_ack_.reset();
    return f;
}

Frame Session::frame() const {
    std::lock_guard lock(mutex_);
    return make_frame();
}

Frame Session::make_frame() const {
    const auto& tl = trial_->timeline();
    Frame f;
    f.seq = frame_seq_++;
    f.time = tl.now();
    f.state = state_;
    f.revealed = reveal_;
    for (const auto& t : tl.tracks()) {
        if (!t.live()) continue;
        const double len = tl.network().segment(t.segment).length;
        const double frac = std::clamp(t.position(f.time, len) / len, 0.0, 1.0);
        f.tracks.push_back({t.id, t.system, masked_kind(t.kind, reveal_), t.segment, frac});
    }
    for (const auto& p : tl.plates())
        if (p.present_at(f.time)) f.plates.push_back({p.segment, p.position, p.phase});
    for (const auto& n : tl.network().nodes())
        if (n.removable) f.mirrors[n.id] = tl.mirror_present(n.id, f.time);
    for (const auto& d : tl.network().detectors()) f.counters[d] = 0;
    for (const auto& c : tl.clicks()) ++f.counters[c.detector];
    f.ack = pending_ack_;
    if (state_ == SessionState::Finished) f.outcome = trial_->outcome();
    return f;
}

std::vector<LogEntry> Session::event_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::map<NodeId, std::size_t> Session::counters() const {
    std::lock_guard lock(mutex_);
    std::map<NodeId, std::size_t> out;
    for (const auto& d : trial_->timeline().network().detectors()) out[d] = 0;
    for (const auto& c : trial_->timeline().clicks()) ++out[c.detector];
    return out;
}

Scenario scenario_from_log(const Scenario& scenario, const std::vector<LogEntry>& log) {
    Scenario out = scenario;
    out.n_trials = 1;
    auto& events = out.experiment.schedule.events;
    for (const auto& e : log)
        if (e.command.op == CommandOp::Intervene && e.result.accepted)
            events.push_back({e.result.time, *e.command.action});
    std::stable_sort(events.begin(), events.end(),
                     [](const InterventionEvent& a, const InterventionEvent& b) { return a.time < b.time; });
    return out;
}

std::map<NodeId, std::size_t> replay_counters(const Scenario& scenario, const std::vector<LogEntry>& log) {
    const auto replayed = scenario_from_log(scenario, log);
    PilotWaveTrial trial(replayed.experiment, RandomStream(replayed.seed).split(0), replayed.disturbance);
    trial.run_to_completion();
    std::map<NodeId, std::size_t> out;
    for (const auto& d : replayed.experiment.network.detectors()) out[d] = 0;
    for (const auto& c : trial.timeline().clicks()) ++out[c.detector];
    return out;
}

std::shared_ptr<Session> SessionRegistry::open(Scenario scenario, double clock_rate) {
    std::lock_guard lock(mutex_);
    const std::string id = "s" + std::to_string(next_id_);
    auto s = std::make_shared<Session>(id, std::move(scenario), clock_rate);
    ++next_id_;
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> SessionRegistry::get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorKind::UnknownSession, id);
    return it->second;
}

std::vector<std::shared_ptr<Session>> SessionRegistry::all() const {
    std::lock_guard lock(mutex_);
    std::vector<std::shared_ptr<Session>> out;
    for (const auto& [_, s] : sessions_) out.push_back(s);
    return out;
}

} // namespace mzsim

#include "mzsim/timeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mzsim/error.hpp"

namespace mzsim {

namespace {
constexpr double kOccupied = 1e-24;
constexpr Amplitude kI{0.0, 1.0};

template <class... Ts> struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;
} // namespace

std::string_view to_string(WaveKind kind) {
    switch (kind) {
    case WaveKind::Undifferentiated: return "undifferentiated";
    case WaveKind::Full: return "FW";
    case WaveKind::Empty: return "EW";
    }
    return "?";
}

std::string_view to_string(TrackStatus status) {
    switch (status) {
    case TrackStatus::Live: return "live";
    case TrackStatus::Split: return "split";
    case TrackStatus::Detected: return "detected";
    case TrackStatus::Absorbed: return "absorbed";
    case TrackStatus::Vanished: return "vanished";
    }
    return "?";
}

std::string_view to_string(Legality legality) {
    return legality == Legality::Legal ? "Legal" : "IllegalAlreadyPassed";
}

double WavefrontTrack::position(double t, double segment_length) const {
    return std::clamp(speed * (t - entered_at), 0.0, segment_length);
}

std::string target_of(const InterventionAction& action) {
    return std::visit(overloaded{
                          [](const InsertPlate& a) { return a.segment; },
                          [](const RemovePlate& a) { return a.segment; },
                          [](const RemoveMirror& a) { return a.mirror; },
                      },
                      action);
}

std::string describe(const InterventionAction& action) {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const InsertPlate& a) {
                       os << "insert_plate(" << a.segment << ", phase=" << a.phase << ", at=" << a.position << ")";
                   },
                   [&](const RemovePlate& a) { os << "remove_plate(" << a.segment << ")"; },
                   [&](const RemoveMirror& a) { os << "remove_mirror(" << a.mirror << ")"; },
               },
               action);
    return os.str();
}

void Schedule::check(const OpticalNetwork& network) const {
    for (const auto& [src, t] : emissions) {
        const auto* n = network.find_node(src);
        if (!n || n->kind != NodeKind::Source) throw Error(ErrorKind::UnknownTarget, "no source " + src);
        if (!(t >= 0.0) || !std::isfinite(t))
            throw Error(ErrorKind::InvalidSchedule, "emission time of " + src + " must be >= 0");
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (!(e.time >= 0.0) || !std::isfinite(e.time))
            throw Error(ErrorKind::InvalidSchedule, "event times must be >= 0");
        if (i > 0 && e.time < events[i - 1].time)
            throw Error(ErrorKind::InvalidSchedule, "events must be sorted by time");
        for (std::size_t j = 0; j < i; ++j)
            if (events[j].time == e.time && target_of(events[j].action) == target_of(e.action))
                throw Error(ErrorKind::InvalidSchedule,
                            "two events on " + target_of(e.action) + " at the same instant");
        std::visit(overloaded{
                       [&](const InsertPlate& a) {
                           if (!network.find_segment(a.segment))
                               throw Error(ErrorKind::UnknownTarget, "no segment " + a.segment);
                           if (!std::isfinite(a.phase) || !(a.position >= 0.0 && a.position <= 1.0))
                               throw Error(ErrorKind::InvalidSchedule, "plate phase/position out of range");
                       },
                       [&](const RemovePlate& a) {
                           if (!network.find_segment(a.segment))
                               throw Error(ErrorKind::UnknownTarget, "no segment " + a.segment);
                       },
                       [&](const RemoveMirror& a) {
                           const auto* n = network.find_node(a.mirror);
                           if (!n || n->kind != NodeKind::Mirror)
                               throw Error(ErrorKind::UnknownTarget, "no mirror " + a.mirror);
                           if (!n->removable) throw Error(ErrorKind::NotRemovable, a.mirror);
                       },
                   },
                   e.action);
    }
}

Timeline::Timeline(OpticalNetwork network, std::map<std::string, double> speeds, Schedule schedule,
                   TimelineOptions options)
    : network_(std::move(network)), speeds_(std::move(speeds)), options_(std::move(options)) {
    schedule.check(network_);
    for (const auto& src : network_.sources()) {
        const auto& n = network_.node(src);
        auto sp = speeds_.find(n.system);
        if (sp == speeds_.end() || !(sp->second > 0.0) || !std::isfinite(sp->second))
            throw Error(ErrorKind::NonPositiveInput, "speed of system " + n.system + " must be positive");
        auto it = schedule.emissions.find(src);
        pending_emissions_.emplace_back(it == schedule.emissions.end() ? 0.0 : it->second, src);
    }
    std::sort(pending_emissions_.begin(), pending_emissions_.end());
    pending_events_ = std::move(schedule.events);
}

bool Timeline::emitted(const std::string& system) const { return emitted_.count(system) != 0; }

bool Timeline::finished() const {
    if (!pending_emissions_.empty()) return false;
    return std::none_of(tracks_.begin(), tracks_.end(), [](const auto& t) { return t.live(); });
}

double Timeline::exit_time(const WavefrontTrack& t) const {
    return t.crossing_time(network_.segment(t.segment).length, 1.0);
}

std::optional<double> Timeline::next_happening() const {
    std::optional<double> best;
    auto consider = [&](double t) {
        if (!best || t < *best) best = t;
    };
    if (!pending_emissions_.empty()) consider(pending_emissions_.front().first);
    if (next_event_ < pending_events_.size()) consider(pending_events_[next_event_].time);
    for (const auto& t : tracks_)
        if (t.live()) consider(exit_time(t));
    return best;
}

void Timeline::advance(double dt) {
    if (!(dt > 0.0)) throw Error(ErrorKind::NonPositiveInput, "dt must be positive");
    advance_to(now_ + dt);
}

void Timeline::advance_to(double target) {
    while (true) {
        auto next = next_happening();
        if (!next || *next >= target) break;
        now_ = std::max(now_, *next);
        // Emissions first, then interventions, then crossings at one instant.
        if (!pending_emissions_.empty() && pending_emissions_.front().first <= now_) {
            const auto src = pending_emissions_.front().second;
            pending_emissions_.erase(pending_emissions_.begin());
            emit(network_.node(src));
            continue;
        }
        if (next_event_ < pending_events_.size() && pending_events_[next_event_].time <= now_) {
            process_scheduled(pending_events_[next_event_++]);
            continue;
        }
        std::size_t best = tracks_.size();
        for (std::size_t i = 0; i < tracks_.size(); ++i) {
            if (!tracks_[i].live()) continue;
            if (best == tracks_.size() || exit_time(tracks_[i]) < exit_time(tracks_[best])) best = i;
        }
        if (best < tracks_.size()) cross(best);
    }
    now_ = std::max(now_, target);
}

void Timeline::run_to_completion() {
    while (auto next = next_happening()) advance_to(std::nextafter(*next, INFINITY));
}

void Timeline::emit(const Node& source) {
    WavefrontTrack t;
    t.id = static_cast<int>(tracks_.size());
    t.system = source.system;
    t.kind = WaveKind::Undifferentiated;
    t.segment = network_.outputs(source.id).front();
    t.entered_at = now_;
    t.speed = speeds_.at(source.system);
    t.history = {t.segment};
    tracks_.push_back(std::move(t));
    emitted_.insert(source.system);
}

void Timeline::process_scheduled(const InterventionEvent& event) {
    InterventionRecord rec{event, legality_check(event), false};
    if (rec.verdict.legal() || options_.apply_illegal_events) {
        apply_intervention(event);
        rec.applied = true;
    }
    records_.push_back(std::move(rec));
}

InterventionRecord Timeline::submit(InterventionAction action) {
    InterventionEvent event{now_, std::move(action)};
    InterventionRecord rec{event, legality_check(event), false};
    if (rec.verdict.legal() || options_.apply_illegal_events) {
        apply_intervention(event);
        rec.applied = true;
    }
    records_.push_back(rec);
    return rec;
}

bool Timeline::mirror_present(const NodeId& id, double t) const {
    auto it = mirror_removed_at_.find(id);
    return it == mirror_removed_at_.end() || it->second > t;
}

void Timeline::apply_intervention(const InterventionEvent& event) {
    std::visit(overloaded{
                   [&](const InsertPlate& a) {
                       if (!network_.find_segment(a.segment))
                           throw Error(ErrorKind::UnknownTarget, "no segment " + a.segment);
                       if (!(a.position >= 0.0 && a.position <= 1.0) || !std::isfinite(a.phase))
                           throw Error(ErrorKind::InvalidSchedule, "plate phase/position out of range");
                       plates_.push_back({a.segment, a.position, a.phase, event.time, std::nullopt});
                   },
                   [&](const RemovePlate& a) {
                       bool any = false;
                       for (auto& p : plates_) {
                           if (p.segment == a.segment && p.present_at(event.time)) {
                               p.removed_at = event.time;
                               any = true;
                           }
                       }
                       if (!any) throw Error(ErrorKind::UnknownTarget, "no plate on segment " + a.segment);
                   },
                   [&](const RemoveMirror& a) {
                       const auto* n = network_.find_node(a.mirror);
                       if (!n || n->kind != NodeKind::Mirror)
                           throw Error(ErrorKind::UnknownTarget, "no mirror " + a.mirror);
                       if (!n->removable) throw Error(ErrorKind::NotRemovable, a.mirror);
                       mirror_removed_at_.try_emplace(a.mirror, event.time);
                   },
               },
               event.action);
}

Timeline::Location Timeline::locate(const InterventionAction& action) const {
    return std::visit(overloaded{
                          [&](const InsertPlate& a) {
                              if (!network_.find_segment(a.segment))
                                  throw Error(ErrorKind::UnknownTarget, "no segment " + a.segment);
                              return Location{a.segment, a.position, {}};
                          },
                          [&](const RemovePlate& a) {
                              std::optional<double> first;
                              for (const auto& p : plates_)
                                  if (p.segment == a.segment && p.present_at(now_))
                                      first = std::min(first.value_or(p.position), p.position);
                              if (!first) throw Error(ErrorKind::UnknownTarget, "no plate on segment " + a.segment);
                              return Location{a.segment, *first, {}};
                          },
                          [&](const RemoveMirror& a) {
                              const auto* n = network_.find_node(a.mirror);
                              if (!n || n->kind != NodeKind::Mirror)
                                  throw Error(ErrorKind::UnknownTarget, "no mirror " + a.mirror);
                              return Location{{}, 0.0, a.mirror};
                          },
                      },
                      action);
}

bool Timeline::passed(const std::string& system, const Location& loc, double t) const {
    auto ex = exited_.find(system);
    const auto* exited = ex == exited_.end() ? nullptr : &ex->second;
    if (!loc.node.empty()) {
        for (const auto& in : network_.inputs(loc.node))
            if (exited && exited->count(in)) return true;
        return false;
    }
    if (exited && exited->count(loc.segment)) return true;
    const double len = network_.segment(loc.segment).length;
    for (const auto& tr : tracks_)
        if (tr.live() && tr.system == system && tr.segment == loc.segment &&
            t > tr.crossing_time(len, loc.fraction))
            return true;
    return false;
}

bool Timeline::ahead(const std::string& system, const Location& loc, double t) const {
    if (passed(system, loc, t)) return false;
    std::vector<SegmentId> targets;
    if (loc.node.empty()) targets.push_back(loc.segment);
    else targets = network_.inputs(loc.node);

    for (const auto& seg : targets) {
        if (!emitted(system)) {
            const auto* src = network_.source_of(system);
            if (src && network_.reaches(network_.outputs(src->id).front(), seg)) return true;
        }
        for (const auto& tr : tracks_) {
            if (!tr.live() || tr.system != system) continue;
            if (tr.segment == seg) return true;  // not passed, so still ahead of the front
            if (network_.reaches(tr.segment, seg)) return true;
        }
    }
    return false;
}

LegalityVerdict Timeline::legality_check(const InterventionEvent& event) const {
    const Location loc = locate(event.action);
    LegalityVerdict v;
    std::set<std::string> systems;
    for (const auto& src : network_.sources()) systems.insert(network_.node(src).system);
    for (const auto& s : systems)
        if (ahead(s, loc, event.time)) v.steered_systems.push_back(s);
    v.steers_measured = std::find(v.steered_systems.begin(), v.steered_systems.end(),
                                  options_.measured_system) != v.steered_systems.end();
    if (v.steered_systems.empty()) {
        v.legality = Legality::IllegalAlreadyPassed;
        v.reason = "every wave has already passed " + target_of(event.action);
    } else if (!v.steers_measured) {
        v.reason = "no steering of " + options_.measured_system;
    }
    return v;
}

double Timeline::plate_crossing(const WavefrontTrack& t, const Plate& p) const {
    return t.crossing_time(network_.segment(t.segment).length, p.position);
}

Amplitude Timeline::exit_factor(WavefrontTrack& t) {
    Amplitude factor{1.0};
    for (const auto& p : plates_)
        if (p.segment == t.segment && p.present_at(plate_crossing(t, p))) factor *= std::polar(1.0, p.phase);

    const double len = network_.segment(t.segment).length;
    std::vector<Superposition> partners;
    for (const auto& o : tracks_) {
        if (!o.live() || o.system == t.system || o.segment != t.segment) continue;
        partners.push_back({now_, t.segment, t.id, o.id, o.system, o.kind, len - o.position(now_, len)});
    }
    superpositions_.insert(superpositions_.end(), partners.begin(), partners.end());
    if (exit_hook_) factor *= exit_hook_(ExitContext{t, now_, partners});

    if (factor != Amplitude{1.0}) seen_[t.system].phases[t.segment] = std::arg(factor);
    exited_[t.system].insert(t.segment);
    t.amplitude *= factor;
    return factor;
}

void Timeline::finish_track(WavefrontTrack& t, TrackStatus status, const NodeId& node, double time) {
    t.status = status;
    t.ended_at = time;
    t.end_node = node;
}

void Timeline::register_click(const WavefrontTrack& t, const NodeId& node) {
    clicks_.push_back({t.system, node, now_, t.id});
    if (options_.empty_waves_persist) return;
    for (auto& o : tracks_)
        if (o.live() && o.system == t.system) finish_track(o, TrackStatus::Vanished, {}, now_);
}

WavefrontTrack& Timeline::spawn(const WavefrontTrack& parent, const SegmentId& seg, Amplitude amp,
                                WaveKind kind) {
    WavefrontTrack c;
    c.id = static_cast<int>(tracks_.size());
    c.system = parent.system;
    c.kind = kind;
    c.segment = seg;
    c.entered_at = now_;
    c.speed = parent.speed;
    c.amplitude = amp;
    c.parent = parent.id;
    c.history = parent.history;
    c.history.push_back(seg);
    tracks_.push_back(std::move(c));
    return tracks_.back();
}

void Timeline::cross(std::size_t index) {
    now_ = std::max(now_, exit_time(tracks_[index]));
    const SegmentId seg = tracks_[index].segment;
    const Node& node = network_.node(network_.segment(seg).to);
    const std::string system = tracks_[index].system;

    if (node.kind == NodeKind::BeamSplitter) {
        // Fronts of one system arriving together recombine coherently.
        const double tol = options_.coincidence_tolerance * std::max(1.0, std::abs(now_));
        std::vector<std::size_t> group{index};
        for (std::size_t i = 0; i < tracks_.size(); ++i) {
            const auto& o = tracks_[i];
            if (i == index || !o.live() || o.system != system || o.segment == seg) continue;
            if (network_.segment(o.segment).to == node.id && exit_time(o) <= now_ + tol) group.push_back(i);
        }
        PureState incoming;
        std::size_t carrier = index;
        bool carries = false;
        for (auto i : group) {
            exit_factor(tracks_[i]);
            incoming.add(tracks_[i].segment, tracks_[i].amplitude);
            if (tracks_[i].carries_particle()) {
                if (!carries) carrier = i;
                carries = true;
            }
        }
        const PureState outgoing = apply_beam_splitter(incoming, network_, node.id);
        SegmentId particle_out;
        if (carries && policy_) {
            particle_out = policy_(BranchRequest{network_, node.id, system, incoming, outgoing});
            if (std::norm(outgoing.amplitude(particle_out)) <= kOccupied)
                throw std::logic_error("particle assigned to an unoccupied output of " + node.id);
        }
        for (auto i : group) finish_track(tracks_[i], TrackStatus::Split, node.id, now_);
        const WavefrontTrack parent = tracks_[carrier];
        for (const auto& [out, amp] : outgoing.modes()) {
            if (std::norm(amp) <= kOccupied) continue;
            WaveKind kind = WaveKind::Empty;
            if (carries) kind = policy_ ? (out == particle_out ? WaveKind::Full : WaveKind::Empty)
                                        : WaveKind::Undifferentiated;
            spawn(parent, out, amp, kind);
        }
        return;
    }

    WavefrontTrack& t = tracks_[index];
    exit_factor(t);
    auto move_to = [&](const SegmentId& out, Amplitude factor) {
        t.segment = out;
        t.entered_at = now_;
        t.amplitude *= factor;
        t.history.push_back(out);
    };

    switch (node.kind) {
    case NodeKind::Mirror: {
        const bool present = mirror_present(node.id, now_);
        if (!present) seen_[system].removed_mirrors.insert(node.id);
        const RouteRole wanted = present ? RouteRole::Reflect : RouteRole::Through;
        auto r = std::find_if(node.routes.begin(), node.routes.end(),
                              [&](const Route& r) { return r.in == seg && r.role == wanted; });
        if (r == node.routes.end()) {
            // Blocked by the back of a present mirror.
            finish_track(t, TrackStatus::Absorbed, node.id, now_);
            if (t.carries_particle()) register_click(t, node.id);
        } else {
            move_to(r->out, present ? kI : Amplitude{1.0});
        }
        break;
    }
    case NodeKind::PhasePlateSlot:
        move_to(node.routes.front().out, Amplitude{1.0});
        break;
    case NodeKind::Detector:
        finish_track(t, TrackStatus::Detected, node.id, now_);
        if (t.carries_particle()) register_click(t, node.id);
        break;
    case NodeKind::Source:
    case NodeKind::BeamSplitter:
        throw std::logic_error("unexpected crossing into " + node.id);
    }
}

ElementConfig Timeline::seen_by(const std::string& system) const {
    auto it = seen_.find(system);
    return it == seen_.end() ? ElementConfig{} : it->second;
}

Timeline replay(const OpticalNetwork& network, const std::map<std::string, double>& speeds,
                const Schedule& schedule, TimelineOptions options) {
    Timeline tl(network, speeds, schedule, std::move(options));
    tl.run_to_completion();
    return tl;
}

} // namespace mzsim

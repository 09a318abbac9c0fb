#include <algorithm>
#include <cmath>
#include <numeric>

#include "mzsim/error.hpp"
#include "mzsim/timeline.hpp"

namespace mzsim {

namespace {

struct Geometry {
    NodeId mirror;
    SegmentId reflect_in;
    SegmentId through_in;
    std::vector<SegmentId> to_recombiner;  // mirror output up to the recombining beam splitter
    double measured_to_mirror = 0.0;
    double ancilla_to_mirror = 0.0;
    double ancilla_to_click = 0.0;  // length of the ancilla's post-selection arm
    double mirror_to_recombiner = 0.0;
    double final_length = 0.0;
    NodeId measured_source;
    NodeId ancilla_source;
};

[[noreturn]] void infeasible(const std::string& why) { throw Error(ErrorKind::NoFeasibleSchedule, why); }

double length_of(const OpticalNetwork& net, const std::vector<SegmentId>& route) {
    return std::accumulate(route.begin(), route.end(), 0.0,
                           [&](double acc, const SegmentId& s) { return acc + net.segment(s).length; });
}

Geometry analyse(const OpticalNetwork& net, const CatchupOptions& opt) {
    Geometry g;
    const Node* mirror = nullptr;
    for (const auto& n : net.nodes()) {
        if (n.kind == NodeKind::Mirror && n.removable) {
            if (mirror) infeasible("more than one removable mirror");
            mirror = &n;
        }
    }
    if (!mirror) infeasible("no removable mirror");
    g.mirror = mirror->id;

    SegmentId out;
    for (const auto& r : mirror->routes)
        if (r.role == RouteRole::Reflect) {
            g.reflect_in = r.in;
            out = r.out;
        }
    for (const auto& r : mirror->routes)
        if (r.role == RouteRole::Through && r.out == out) g.through_in = r.in;
    if (g.through_in.empty()) infeasible("no pass-through input in line with " + out);

    const Node* src = net.source_of(opt.measured_system);
    const Node* anc = net.source_of(opt.ancilla_system);
    if (!src || !anc) infeasible("both the measured and the ancilla source are required");
    g.measured_source = src->id;
    g.ancilla_source = anc->id;

    auto to_mirror = net.route_between(src->id, g.mirror);
    if (!to_mirror || to_mirror->back() != g.reflect_in)
        infeasible("measured system has no unique route onto the reflecting side of " + g.mirror);
    auto anc_to_mirror = net.route_between(anc->id, g.mirror);
    if (!anc_to_mirror || anc_to_mirror->back() != g.through_in)
        infeasible("ancilla has no unique route onto " + g.through_in);
    g.measured_to_mirror = length_of(net, *to_mirror);
    g.ancilla_to_mirror = length_of(net, *anc_to_mirror);

    // Follow the mirror output through pass-through elements to the recombiner.
    SegmentId seg = out;
    while (true) {
        g.to_recombiner.push_back(seg);
        const auto& next = net.node(net.segment(seg).to);
        if (next.kind == NodeKind::BeamSplitter) break;
        if (next.kind != NodeKind::PhasePlateSlot || next.routes.empty())
            infeasible("path after " + g.mirror + " does not lead to a beam splitter");
        seg = next.routes.front().out;
        if (g.to_recombiner.size() > net.segments().size()) infeasible("cyclic path after mirror");
    }
    g.mirror_to_recombiner = length_of(net, g.to_recombiner);
    g.final_length = net.segment(g.to_recombiner.back()).length;

    // The ancilla's other beam-splitter arm (where it is post-selected).
    double click = INFINITY;
    for (const auto& d : net.detectors()) {
        if (auto r = net.route_between(anc->id, d)) {
            const bool via_mirror = std::find(r->begin(), r->end(), g.through_in) != r->end();
            if (!via_mirror) click = std::min(click, length_of(net, *r));
        }
    }
    g.ancilla_to_click = click;
    return g;
}

struct Replayed {
    double gap = INFINITY;  // -inf when the ancilla wave entered the recombiner first
    bool all_legal = false;
    double measured_enters = NAN;
};

Replayed replay_schedule(const OpticalNetwork& net, const WaveNumbers& speeds, const Schedule& schedule,
                         const Geometry& g, const CatchupOptions& opt) {
    TimelineOptions to;
    to.measured_system = opt.measured_system;
    to.empty_waves_persist = opt.empty_waves_persist;
    std::map<std::string, double> v{{opt.measured_system, speeds.v_s}, {opt.ancilla_system, speeds.v_s_prime}};
    Timeline tl = replay(net, v, schedule, to);

    Replayed r;
    r.all_legal = std::all_of(tl.interventions().begin(), tl.interventions().end(),
                              [](const InterventionRecord& rec) { return rec.verdict.legal(); });
    const SegmentId& last = g.to_recombiner.back();
    for (const auto& t : tl.tracks())
        if (t.system == opt.measured_system && t.status == TrackStatus::Split && t.segment == last)
            r.measured_enters = t.ended_at;
    for (const auto& t : tl.tracks()) {
        if (t.system != opt.ancilla_system || t.history.size() < 2) continue;
        if (t.history[t.history.size() - 2] == last && t.entered_at <= r.measured_enters) r.gap = -INFINITY;
    }
    if (r.gap < 0.0) return r;
    for (const auto& s : tl.superpositions()) {
        if (s.segment != g.to_recombiner.back() || s.other_system != opt.ancilla_system) continue;
        const auto& tr = tl.tracks()[static_cast<std::size_t>(s.track)];
        if (tr.system != opt.measured_system) continue;
        r.gap = std::min(r.gap, s.gap);
    }
    return r;
}

} // namespace

CatchupSchedule solve_catchup_schedule(const OpticalNetwork& network, const WaveNumbers& speeds,
                                       const CatchupOptions& opt) {
    if (!(speeds.v_s > 0.0) || !(speeds.v_s_prime > 0.0) || !std::isfinite(speeds.v_s) ||
        !std::isfinite(speeds.v_s_prime))
        infeasible("speeds must be positive");
    if (!(opt.epsilon > 0.0 && opt.epsilon < 1.0)) infeasible("epsilon must lie in (0, 1)");
    const Geometry g = analyse(network, opt);
    const double v = speeds.v_s;
    const double w = speeds.v_s_prime;
    const double target_gap = 0.5 * opt.epsilon * g.final_length;

    // Measured system emitted at 0.
    const double t_leaves = g.measured_to_mirror / v;
    const double t_enter = t_leaves + g.mirror_to_recombiner / v;
    // Ancilla arrival at the mirror that leaves it target_gap short of the
    // recombiner when the measured wave enters it.
    const double a_mirror = t_enter - (g.mirror_to_recombiner - target_gap) / w;
    if (!(a_mirror > t_leaves))
        infeasible("the ancilla wave cannot reach the recombiner in time without passing the mirror "
                   "before the measured wave has left it");
    double tau = a_mirror - g.ancilla_to_mirror / w;
    if (!opt.empty_waves_persist && !(tau + g.ancilla_to_click / w > t_enter))
        infeasible("the ancilla is detected before the superposition and its empty wave does not persist");

    auto build = [&](double tau_) {
        const double shift = std::max(0.0, -tau_);
        const double arrive = tau_ + g.ancilla_to_mirror / w;
        CatchupSchedule cs;
        cs.mirror = g.mirror;
        cs.final_segment = g.to_recombiner.back();
        cs.final_segment_length = g.final_length;
        cs.measured_passes_mirror = t_leaves + shift;
        cs.ancilla_reaches_mirror = arrive + shift;
        cs.measured_enters_recombiner = t_enter + shift;
        cs.removal_time = 0.5 * (t_leaves + arrive) + shift;
        cs.schedule.emissions[g.measured_source] = shift;
        cs.schedule.emissions[g.ancilla_source] = tau_ + shift;
        cs.schedule.events.push_back({cs.removal_time, RemoveMirror{g.mirror}});
        return cs;
    };
    auto acceptable = [&](const CatchupSchedule& cs, const Replayed& r) {
        return r.all_legal && cs.removal_time > cs.measured_passes_mirror &&
               cs.removal_time < cs.ancilla_reaches_mirror && r.gap >= 0.0 &&
               r.gap < opt.epsilon * g.final_length;
    };

    CatchupSchedule cs = build(tau);
    Replayed r = replay_schedule(network, speeds, cs.schedule, g, opt);
    cs.gap = r.gap;
    cs.method = "closed_form";
    if (!opt.force_bisection && acceptable(cs, r)) return cs;

    // Bisection on the ancilla emission offset against the replayed gap,
    // which grows monotonically with the offset.
    double lo = t_leaves - g.ancilla_to_mirror / w;                           // arrives with S
    double hi = t_enter - g.ancilla_to_mirror / w;                            // arrives as S enters
    for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        CatchupSchedule trial = build(mid);
        Replayed rr = replay_schedule(network, speeds, trial.schedule, g, opt);
        if (rr.gap < target_gap) lo = mid;
        else hi = mid;
    }
    cs = build(0.5 * (lo + hi));
    r = replay_schedule(network, speeds, cs.schedule, g, opt);
    cs.gap = r.gap;
    cs.method = "bisection";
    if (!acceptable(cs, r)) infeasible("no schedule satisfies the superposition window");
    return cs;
}

} // namespace mzsim

#include "mzsim/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "mzsim/error.hpp"

namespace mzsim {

std::string_view to_string(Engine engine) {
    return engine == Engine::Amplitude ? "amplitude" : "pilot_wave";
}

std::optional<Engine> engine_from_string(std::string_view s) {
    if (s == "amplitude") return Engine::Amplitude;
    if (s == "pilot_wave" || s == "pilot-wave") return Engine::PilotWave;
    return std::nullopt;
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"which_path", "baseline", "plate_once", "plate_twice", "modified"};
    return names;
}

namespace {

constexpr std::uint64_t kDefaultSeed = 20240611;

Scenario single_source(std::string name, OpticalNetwork net, std::size_t trials) {
    Scenario sc;
    sc.name = std::move(name);
    sc.experiment.network = std::move(net);
    sc.experiment.systems = {{"S", 1.0, 1.0, 1.0}};
    sc.n_trials = trials;
    sc.seed = kDefaultSeed;
    return sc;
}

InterventionEvent pi_plate(double time, SegmentId segment) {
    return {time, InsertPlate{std::move(segment), std::numbers::pi, 0.5}};
}

} // namespace

Scenario modified_scenario(double delta, double arm_length, double prime_arm_length) {
    Scenario sc;
    sc.name = "modified";
    auto& exp = sc.experiment;
    exp.network = build_modified_geometry(arm_length, prime_arm_length);
    WaveNumbers w;
    w.v_s_prime = matched_velocity(w.m_s, w.v_s, w.m_s_prime);
    CatchupOptions opts;
    opts.epsilon = exp.epsilon;
    exp.schedule = solve_catchup_schedule(exp.network, w, opts).schedule;
    exp.systems = {{"S", w.v_s, w.m_s, w.k}, {"S'", w.v_s_prime, w.m_s_prime, w.k_prime}};
    exp.post_select = PostSelection{"S'", "D2'"};
    sc.disturbance = {true, delta, "9"};
    sc.n_trials = 100000;
    sc.seed = kDefaultSeed;
    return sc;
}

Scenario builtin(std::string_view name) {
    // Every segment is half the arm length, so with arm 1 and speed 1 the
    // front reaches BS2 at 0.5 and the arm midpoints at 0.75.
    if (name == "which_path") return single_source("which_path", build_which_path_geometry(1.0), 10000);
    if (name == "baseline") return single_source("baseline", build_renninger_geometry(1.0), 100000);
    if (name == "plate_once") {
        auto sc = single_source("plate_once", build_renninger_geometry(1.0), 10000);
        sc.experiment.schedule.events = {pi_plate(0.6, "6")};
        return sc;
    }
    if (name == "plate_twice") {
        auto sc = single_source("plate_twice", build_renninger_geometry(1.0), 10000);
        sc.experiment.schedule.events = {pi_plate(0.6, "6"), pi_plate(0.7, "7")};
        return sc;
    }
    if (name == "modified") return modified_scenario(0.0);
    throw Error(ErrorKind::UnknownScenario, std::string(name));
}

void check_scenario(const Scenario& sc) {
    const auto& exp = sc.experiment;
    const auto& net = exp.network;
    if (auto v = validate(net); !v.empty()) {
        std::string msg = "network: ";
        for (std::size_t i = 0; i < v.size(); ++i)
            msg += (i ? "; " : "") + v[i].code + " " + v[i].subject + ": " + v[i].message;
        throw Error(ErrorKind::InvariantViolation, msg);
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < exp.systems.size(); ++i) {
        const auto& s = exp.systems[i];
        const std::string at = "/systems/" + std::to_string(i);
        if (!ids.insert(s.id).second) throw Error(ErrorKind::InvariantViolation, at + ": duplicate system " + s.id);
        for (double x : {s.speed, s.mass})
            if (!(x > 0.0) || !std::isfinite(x))
                throw Error(ErrorKind::InvariantViolation, at + ": speed and mass must be positive");
        if (!std::isfinite(s.wave_number)) throw Error(ErrorKind::InvariantViolation, at + ": bad wave_number");
    }
    for (const auto& src : net.sources())
        if (!ids.count(net.node(src).system))
            throw Error(ErrorKind::InvariantViolation, "/systems: no entry for system " + net.node(src).system);
    if (!net.source_of(exp.measured_system))
        throw Error(ErrorKind::UnknownField, "/measured_system: no source emits " + exp.measured_system);
    if (exp.post_select) {
        if (!net.source_of(exp.post_select->system))
            throw Error(ErrorKind::UnknownField, "/post_select/system: no source emits " + exp.post_select->system);
        const Node* d = net.find_node(exp.post_select->detector);
        if (!d || d->kind != NodeKind::Detector)
            throw Error(ErrorKind::UnknownField, "/post_select/detector: no detector " + exp.post_select->detector);
        if (exp.post_select->system == exp.measured_system)
            throw Error(ErrorKind::InvariantViolation, "/post_select/system: must differ from the measured system");
    }
    for (const auto& [src, t] : exp.schedule.emissions) {
        const Node* n = net.find_node(src);
        if (!n || n->kind != NodeKind::Source)
            throw Error(ErrorKind::UnknownField, "/schedule/emissions/" + src + ": no source " + src);
        if (!(t >= 0.0) || !std::isfinite(t))
            throw Error(ErrorKind::InvariantViolation, "/schedule/emissions/" + src + ": must be >= 0");
    }
    for (std::size_t i = 0; i < exp.schedule.events.size(); ++i) {
        const auto& a = exp.schedule.events[i].action;
        const std::string at = "/schedule/events/" + std::to_string(i);
        if (std::holds_alternative<RemoveMirror>(a)) {
            const auto& m = std::get<RemoveMirror>(a).mirror;
            const Node* n = net.find_node(m);
            if (!n) throw Error(ErrorKind::UnknownField, at + "/mirror: no mirror " + m);
            if (!n->removable) throw Error(ErrorKind::InvariantViolation, at + "/mirror: " + m + " is not removable");
        } else {
            const auto seg = target_of(a);
            if (!net.find_segment(seg)) throw Error(ErrorKind::UnknownField, at + "/segment: no segment " + seg);
        }
        if (std::holds_alternative<InsertPlate>(a)) {
            const auto& p = std::get<InsertPlate>(a);
            if (!(p.position >= 0.0 && p.position <= 1.0) || !std::isfinite(p.phase))
                throw Error(ErrorKind::InvariantViolation, at + ": plate position must lie in [0, 1]");
        }
    }
    exp.schedule.check(net);
    sc.disturbance.check();
    if (sc.disturbance.enabled && !net.find_segment(sc.disturbance.applies_to))
        throw Error(ErrorKind::UnknownField, "/disturbance/applies_to: no segment " + sc.disturbance.applies_to);
    if (sc.n_trials < 1) throw Error(ErrorKind::InvariantViolation, "/trials: must be >= 1");
    if (!(exp.epsilon > 0.0 && exp.epsilon < 1.0))
        throw Error(ErrorKind::InvariantViolation, "/epsilon: must lie in (0, 1)");
}

namespace {

struct Analysis {
    Theory theory;
    Schedule effective;  // events that actually acted on the apparatus
};

Analysis analyse(const Scenario& sc, bool apply_illegal) {
    const auto& exp = sc.experiment;
    const auto& net = exp.network;
    auto options = exp.timeline_options(apply_illegal);
    // No particle is assigned here, so every front would click; keep the
    // other fronts alive so the replay sees the complete wave.
    options.empty_waves_persist = true;
    Timeline tl(net, exp.speeds(), exp.schedule, options);
    if (sc.disturbance.enabled) {
        tl.set_exit_hook([&](const ExitContext& ctx) {
            return disturbance_factor(sc.disturbance, exp.measured_system, exp.epsilon,
                                      net.segment(ctx.track.segment).length, ctx);
        });
    }
    tl.run_to_completion();

    Analysis out;
    out.effective.emissions = exp.schedule.emissions;
    for (const auto& r : tl.interventions())
        if (r.applied) out.effective.events.push_back(r.event);

    const auto seen = tl.seen_by(exp.measured_system);
    ConditionalState cond{evolve(net, exp.measured_system, seen), 1.0};
    if (exp.post_select) {
        const auto& ps = *exp.post_select;
        cond = post_select({cond.state, evolve(net, ps.system, tl.seen_by(ps.system))}, net, ps.detector);
    }
    const auto all = detection_probabilities(cond, net, seen);
    out.theory.weight = cond.weight;
    for (const auto& label : outcome_labels(net, exp.measured_system)) {
        auto it = all.find(label);
        out.theory.probabilities[label] = it == all.end() ? 0.0 : it->second;
    }
    return out;
}

RunReport sample_amplitude(const Scenario& sc, const Theory& th) {
    RunReport report;
    report.seed = sc.seed;
    report.n_trials = sc.n_trials;
    for (const auto& [label, p] : th.probabilities) report.counts[label] = 0;
    const RandomStream root(sc.seed);
    for (std::size_t i = 0; i < sc.n_trials; ++i) {
        auto rng = root.split(i);
        if (sc.experiment.post_select && !(rng.uniform() < th.weight)) continue;
        ++report.retained;
        const double u = rng.uniform();
        double acc = 0.0;
        std::string pick;
        for (const auto& [label, p] : th.probabilities) {
            if (p <= 0.0) continue;
            pick = label;
            acc += p;
            if (u < acc) break;
        }
        ++report.counts[pick];
    }
    finalize_counts(report);
    return report;
}

} // namespace

Theory theoretical_probabilities(const Scenario& scenario) { return analyse(scenario, false).theory; }

RunReport run(const Scenario& scenario, const RunOptions& options) {
    check_scenario(scenario);
    const auto analysis = analyse(scenario, options.apply_illegal_events);
    RunReport report =
        scenario.engine == Engine::Amplitude
            ? sample_amplitude(scenario, analysis.theory)
            : run_monte_carlo(scenario.experiment, scenario.n_trials, scenario.seed, scenario.disturbance,
                              {options.threads, options.apply_illegal_events});
    report.scenario = scenario.name;
    report.engine = std::string(to_string(scenario.engine));
    report.theoretical = analysis.theory.probabilities;
    report.theoretical_weight = analysis.theory.weight;
    if (report.retained > 0) report.chi_square = chi_square(report.counts, report.theoretical, report.retained);
    Scenario echo = scenario;
    echo.experiment.schedule = analysis.effective;
    report.config = serialize_scenario(echo);
    return report;
}

} // namespace mzsim

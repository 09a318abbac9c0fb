#include "mzsim/pilot_wave_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <set>
#include <thread>

#include "mzsim/error.hpp"

namespace mzsim {

std::vector<std::string> outcome_labels(const OpticalNetwork& network, const std::string& system) {
    const Node* src = network.source_of(system);
    if (!src) throw Error(ErrorKind::UnknownNode, "no source emits system " + system);
    std::set<std::string> labels;
    std::set<SegmentId> seen;
    std::vector<SegmentId> stack{network.outputs(src->id).front()};
    while (!stack.empty()) {
        SegmentId seg = stack.back();
        stack.pop_back();
        if (!seen.insert(seg).second) continue;
        const auto& end = network.node(network.segment(seg).to);
        if (end.kind == NodeKind::Detector) labels.insert(end.id);
        bool reflects = false;
        for (const auto& r : end.routes) {
            if (r.in != seg) continue;
            if (r.role != RouteRole::Through) reflects = true;
            stack.push_back(r.out);
        }
        if (end.kind == NodeKind::Mirror && !reflects) labels.insert(end.id);
    }
    return {labels.begin(), labels.end()};
}

void DisturbanceModel::check() const {
    if (!std::isfinite(delta) || delta < 0.0 || delta >= 2 * std::numbers::pi)
        throw Error(ErrorKind::InvariantViolation, "delta must lie in [0, 2pi)");
    if (applies_to.empty()) throw Error(ErrorKind::InvariantViolation, "disturbance needs a segment");
}

BranchChoice sample_branch(RandomStream& rng, const OpticalNetwork& network, const NodeId& beam_splitter,
                           const SegmentId& input) {
    const auto& bs = network.node(beam_splitter);
    BranchChoice transmit_full;
    for (const auto& r : bs.routes) {
        if (r.in != input) continue;
        if (r.role == RouteRole::Transmit) transmit_full.full = r.out;
        if (r.role == RouteRole::Reflect) transmit_full.empty = r.out;
    }
    if (transmit_full.full.empty() || transmit_full.empty.empty())
        throw Error(ErrorKind::UnknownSegment, input + " is not an input of " + beam_splitter);
    if (rng.uniform() < 0.5) return transmit_full;
    return {transmit_full.empty, transmit_full.full};
}

SegmentId guide_at_recombiner(RandomStream& rng, const PureState& outgoing) {
    const auto occupied = outgoing.occupied_modes();
    if (occupied.empty()) throw std::logic_error("recombiner has no occupied output");
    double total = 0.0;
    for (const auto& m : occupied) total += std::norm(outgoing.amplitude(m));
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (const auto& m : occupied) {
        acc += std::norm(outgoing.amplitude(m));
        if (u < acc) return m;
    }
    return *occupied.rbegin();
}

Amplitude disturbance_factor(const DisturbanceModel& model, const std::string& measured_system,
                             double epsilon, double segment_length, const ExitContext& ctx) {
    if (!model.enabled || ctx.track.system != measured_system || ctx.track.segment != model.applies_to)
        return Amplitude{1.0};
    for (const auto& p : ctx.partners)
        if (p.other_kind != WaveKind::Full && p.gap >= 0.0 && p.gap <= epsilon * segment_length)
            return std::polar(1.0, model.delta);
    return Amplitude{1.0};
}

PilotWaveTrial::PilotWaveTrial(const Experiment& experiment, RandomStream rng, DisturbanceModel disturbance,
                               bool apply_illegal_events)
    : rng_(std::make_unique<RandomStream>(rng)),
      timeline_(std::make_unique<Timeline>(experiment.network, experiment.speeds(), experiment.schedule,
                                           experiment.timeline_options(apply_illegal_events))),
      measured_(experiment.measured_system),
      post_select_(experiment.post_select),
      disturbance_(std::move(disturbance)) {
    disturbance_.check();
    timeline_->set_branch_policy([rng = rng_.get()](const BranchRequest& r) {
        const auto in = r.incoming.occupied_modes();
        if (in.size() == 1) return sample_branch(*rng, r.network, r.node, *in.begin()).full;
        return guide_at_recombiner(*rng, r.outgoing);
    });
    if (disturbance_.enabled) {
        const double eps = experiment.epsilon;
        timeline_->set_exit_hook([this, eps](const ExitContext& ctx) {
            const double len = timeline_->network().segment(ctx.track.segment).length;
            const Amplitude f = disturbance_factor(disturbance_, measured_, eps, len, ctx);
            if (f != Amplitude{1.0}) disturbed_ = true;
            return f;
        });
    }
}

TrialOutcome PilotWaveTrial::outcome() const {
    if (!timeline_->finished()) throw std::logic_error("trial has not finished");
    TrialOutcome out;
    std::map<std::string, int> per_system;
    for (const auto& c : timeline_->clicks()) {
        ++per_system[c.system];
        out.clicks[c.system] = c.detector;
        if (c.system == measured_) {
            out.detector = c.detector;
            out.click_time = c.time;
            out.path = timeline_->tracks()[static_cast<std::size_t>(c.track)].history;
        }
    }
    for (const auto& src : timeline_->network().sources()) {
        const auto& system = timeline_->network().node(src).system;
        if (per_system[system] != 1)
            throw std::logic_error("system " + system + " clicked " + std::to_string(per_system[system]) +
                                   " times in one trial");
    }
    if (post_select_) {
        auto it = out.clicks.find(post_select_->system);
        out.retained = it != out.clicks.end() && it->second == post_select_->detector;
    }
    out.disturbed = disturbed_;
    return out;
}

TrialOutcome run_trial(const Experiment& experiment, RandomStream rng, const DisturbanceModel& disturbance,
                       bool apply_illegal_events) {
    PilotWaveTrial trial(experiment, rng, disturbance, apply_illegal_events);
    trial.run_to_completion();
    return trial.outcome();
}

RunReport run_monte_carlo(const Experiment& experiment, std::size_t n_trials, std::uint64_t seed,
                          const DisturbanceModel& disturbance, const MonteCarloOptions& options) {
    if (n_trials < 1) throw Error(ErrorKind::NonPositiveInput, "n_trials must be >= 1");
    experiment.schedule.check(experiment.network);
    disturbance.check();
    const auto labels = outcome_labels(experiment.network, experiment.measured_system);

    struct Slot {
        int label = -1;
        bool retained = false;
        bool disturbed = false;
    };
    std::vector<Slot> slots(n_trials);
    const RandomStream root(seed);

    unsigned workers = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, (n_trials + 255) / 256));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        try {
            constexpr std::size_t chunk = 256;
            for (std::size_t begin = next.fetch_add(chunk); begin < n_trials; begin = next.fetch_add(chunk)) {
                for (std::size_t i = begin; i < std::min(n_trials, begin + chunk); ++i) {
                    const auto o = run_trial(experiment, root.split(i), disturbance, options.apply_illegal_events);
                    auto it = std::find(labels.begin(), labels.end(), o.detector);
                    if (it == labels.end()) throw std::logic_error("click at unexpected label " + o.detector);
                    slots[i] = {static_cast<int>(it - labels.begin()), o.retained, o.disturbed};
                }
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n_trials;
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }
    if (failure) std::rethrow_exception(failure);

    RunReport report;
    report.engine = "pilot_wave";
    report.seed = seed;
    report.n_trials = n_trials;
    for (const auto& l : labels) report.counts[l] = 0;
    for (const auto& s : slots) {  // fixed reduction order by trial index
        if (!s.retained) continue;
        ++report.retained;
        ++report.counts[labels[static_cast<std::size_t>(s.label)]];
        if (s.disturbed) ++report.disturbed;
    }
    finalize_counts(report);
    return report;
}

double matched_velocity(double m_s, double v_s, double m_s_prime) {
    for (double x : {m_s, v_s, m_s_prime})
        if (!(x > 0.0) || !std::isfinite(x))
            throw Error(ErrorKind::NonPositiveInput, "masses and speed must be positive");
    return v_s * std::sqrt(m_s / m_s_prime);
}

} // namespace mzsim

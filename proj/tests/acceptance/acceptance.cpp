// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "checks.hpp"
#include "mzsim/error.hpp"
#include "mzsim/scenarios.hpp"
#include "test_support.hpp"

using namespace mzsim;

namespace {

constexpr double kPi = std::numbers::pi;

struct Result {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) detail << "failed: " << what << "; ";
        ok = ok && cond;
    }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Result&)>& body) {
    Result r;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.require(false, std::string("exception ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.detail << "(" << secs << " s)";
    std::printf("%s %s: %s\n", r.ok ? "PASS" : "FAIL", name.c_str(), r.detail.str().c_str());
    std::fflush(stdout);
    failures += r.ok ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario plated(const std::vector<std::pair<SegmentId, double>>& plates) {
    auto s = builtin("baseline");
    double t = 0.0;
    for (const auto& [seg, phase] : plates) {
        t += 0.05;
        s.experiment.schedule.events.push_back({t, InsertPlate{seg, phase, 0.5}});
    }
    return s;
}

bool all_legal(const Scenario& s) {
    const auto tl = replay(s.experiment.network, s.experiment.speeds(), s.experiment.schedule);
    for (const auto& r : tl.interventions())
        if (!r.verdict.legal()) return false;
    return true;
}

Scenario random_scenario(gen::Rng& rng) {
    const auto& names = builtin_names();
    Scenario s;
    const auto pick = static_cast<std::size_t>(rng.integer(0, static_cast<int>(names.size())));
    if (pick == names.size()) {
        s = modified_scenario(rng.angle(), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0));
    } else {
        s = builtin(names[pick]);
    }
    s.engine = rng.coin() ? Engine::Amplitude : Engine::PilotWave;
    s.n_trials = static_cast<std::size_t>(rng.integer(100, 2000));
    s.seed = rng.u64();
    return s;
}

// Places a plate behind the measured front on a segment it has already
// crossed into, returning the event.
InterventionEvent late_plate(gen::Rng& rng, const Scenario& s) {
    const auto& exp = s.experiment;
    const auto& net = exp.network;
    const auto src = net.source_of(exp.measured_system)->id;
    const double t0 = exp.schedule.emissions.count(src) ? exp.schedule.emissions.at(src) : 0.0;
    const double v = exp.speeds().at(exp.measured_system);
    const double pos = rng.uniform(0.0, 1.0);
    const double l1 = net.segment("1").length;
    if (rng.coin()) return {t0 + pos * l1 / v + rng.uniform(1e-3, 1.0), InsertPlate{"1", rng.angle(), pos}};
    const SegmentId arm = rng.coin() ? "6" : "7";
    return {t0 + (l1 + pos * net.segment(arm).length) / v + rng.uniform(1e-3, 1.0),
            InsertPlate{arm, rng.angle(), pos}};
}

} // namespace

int main() {
    criterion("equation chain", [](Result& r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto p = predict_modified_setup(0.0);
        const double s = 1.0 / std::sqrt(2.0);
        r.require(std::abs(p.final_state.amplitude("4") - Amplitude(-s, 0)) <= 1e-12, "amplitude -1/sqrt2 on D1");
        r.require(std::abs(p.post_weight - 0.5) <= 1e-12, "post-selection weight 1/2");
        r.require(std::abs(p.p_d1 - 1.0) <= 1e-12, "P(D1) = 1");
        r.require(p.p_d2 <= 1e-12, "P(D2) = 0");
        const auto th = theoretical_probabilities(modified_scenario(0.0));
        r.require(std::abs(th.weight - 0.5) <= 1e-12 && th.probabilities.at("D2") <= 1e-12, "scenario theory");
        const double secs = seconds_since(t0);
        r.require(secs < 1.0, "runtime < 1 s");
        r.detail << "amp(D1 mode) " << p.final_state.amplitude("4") << " weight " << p.post_weight << " ";
    });

    criterion("baseline", [](Result& r) {
        const auto t0 = std::chrono::steady_clock::now();
        auto s = builtin("baseline");
        const auto th = theoretical_probabilities(s);
        r.require(std::abs(th.probabilities.at("D1") - 1.0) <= 1e-12, "amplitude P(D1) = 1");
        s.n_trials = 100000;
        const auto rep = run(s);
        r.require(rep.retained == 100000, "all trials retained");
        r.require(rep.counts.at("D2") == 0, "zero D2 clicks");
        const double secs = seconds_since(t0);
        r.require(secs < 10.0, "runtime < 10 s");
        r.detail << "D1 " << rep.counts.at("D1") << " D2 " << rep.counts.at("D2") << " ";
    });

    criterion("steering", [](Result& r) {
        const auto a = plated({{"6", kPi}});
        const auto b = plated({{"7", kPi}});
        r.require(all_legal(a) && all_legal(b), "plates legal");
        const auto pa = theoretical_probabilities(a).probabilities;
        const auto pb = theoretical_probabilities(b).probabilities;
        r.require(std::abs(pa.at("D2") - 1.0) <= 1e-12, "P(D2) = 1");
        r.require(pa == pb, "identical maps for either arm");
        auto run_a = a;
        run_a.n_trials = 10000;
        r.require(run(run_a).counts.at("D1") == 0, "pilot-wave D2 only");
        r.detail << "P(D2) " << pa.at("D2") << " ";
    });

    criterion("suspension", [](Result& r) {
        for (const auto& pair : {std::vector<std::pair<SegmentId, double>>{{"6", kPi}, {"6", kPi}},
                                 std::vector<std::pair<SegmentId, double>>{{"6", kPi}, {"7", kPi}},
                                 std::vector<std::pair<SegmentId, double>>{{"7", kPi}, {"7", kPi}}}) {
            const auto s = plated(pair);
            r.require(all_legal(s), "two plates legal");
            r.require(std::abs(theoretical_probabilities(s).probabilities.at("D1") - 1.0) <= 1e-12, "two plates");
        }
        for (int n = 1; n <= 8; ++n) {
            std::vector<std::pair<SegmentId, double>> seq;
            for (int k = 0; k < n; ++k) seq.push_back({k % 2 ? "7" : "6", kPi});
            auto s = plated(seq);
            r.require(all_legal(s), "sequence legal");
            const auto p = theoretical_probabilities(s).probabilities;
            const char* want = n % 2 ? "D2" : "D1";
            r.require(std::abs(p.at(want) - 1.0) <= 1e-12, "alternating n = " + std::to_string(n));
            s.n_trials = 2000;
            r.require(run(s).counts.at(want) == 2000, "pilot-wave n = " + std::to_string(n));
        }
        r.detail << "n = 1..8 ";
    });

    criterion("exclusivity", [](Result& r) {
        const auto s = builtin("which_path");
        const RandomStream root(s.seed);
        std::size_t d6 = 0, d7 = 0;
        const std::size_t n = 10000;
        for (std::size_t i = 0; i < n; ++i) {
            const auto o = run_trial(s.experiment, root.split(i), s.disturbance);  // throws unless one click
            r.require(o.clicks.size() == 1, "one click per trial");
            (o.detector == "D6" ? d6 : d7) += 1;
        }
        r.require(d6 + d7 == n, "every trial clicks at a mid-arm detector");
        r.require(within_exact_binomial(d6, n, 0.5), "D6 within 5 sigma");
        r.require(within_exact_binomial(d7, n, 0.5), "D7 within 5 sigma");
        r.detail << "D6 " << d6 << " D7 " << d7 << " ";
    });

    criterion("delta law", [](Result& r) {
        for (int i = 0; i < 100; ++i) {
            const double delta = 2 * kPi * i / 100;
            const double p = predict_modified_setup(delta).p_d2;
            r.require(std::abs(p - oracle::modified(delta).p_d2) <= 1e-9, "matrix oracle grid");
            r.require(std::abs(p - std::pow(std::sin(delta / 2), 2)) <= 1e-9, "closed form grid");
        }
        for (int q = 0; q <= 4; ++q) {
            const double delta = kPi * q / 4;
            auto s = modified_scenario(delta);
            s.n_trials = 100000;
            const auto rep = run(s);
            const double want = std::pow(std::sin(delta / 2), 2);
            r.require(within_exact_binomial(rep.counts.at("D2"), rep.retained, want),
                      "freq(D2) at delta = " + std::to_string(delta));
            r.detail << "d=" << q << "pi/4 f=" << rep.frequencies.at("D2") << " ";
        }
    });

    criterion("legality no-effect", [](Result& r) {
        gen::Rng rng(20240611);
        for (int i = 0; i < 100; ++i) {
            const auto s = random_scenario(rng);
            const auto event = late_plate(rng, s);
            auto with = s;
            auto& ev = with.experiment.schedule.events;
            auto at = std::upper_bound(ev.begin(), ev.end(), event.time,
                                       [](double t, const InterventionEvent& e) { return t < e.time; });
            const auto index = static_cast<std::size_t>(at - ev.begin());
            ev.insert(at, event);
            const auto tl = replay(with.experiment.network, with.experiment.speeds(), with.experiment.schedule);
            r.require(tl.interventions().at(index).verdict.legality == Legality::IllegalAlreadyPassed,
                      "event is illegal on replay");
            const auto base = run(s);
            const auto extra = run(with);
            r.require(base == extra, "RunReport identical for " + s.name);
            r.require(report_to_json(base) == report_to_json(extra), "serialized report identical");
        }
        r.detail << "100 scenarios ";
    });

    criterion("schedule solver soundness", [](Result& r) {
        gen::Rng rng(31337);
        for (int i = 0; i < 100; ++i) {
            WaveNumbers w;
            w.v_s = rng.uniform(0.2, 3.0);
            w.v_s_prime = w.v_s * rng.uniform(1.0, 3.0);
            CatchupOptions o;
            o.epsilon = rng.uniform(0.001, 0.1);
            o.force_bisection = rng.integer(0, 4) == 0;
            const auto net = build_modified_geometry(rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0));
            const auto cs = solve_catchup_schedule(net, w, o);
            const auto c = checks::verify(net, w, cs, o.epsilon);
            r.require(c.removal_after_passage, "removal after passage");
            r.require(c.gap_in_window, "gap inside the window");
            r.require(c.all_legal, "all events legal");
        }
        int rejected = 0;
        for (int i = 0; i < 100; ++i) {
            WaveNumbers w;
            w.v_s = rng.uniform(0.2, 3.0);
            CatchupOptions o;
            o.epsilon = rng.uniform(0.001, 0.1);
            w.v_s_prime = w.v_s * (1.0 - o.epsilon) * rng.uniform(0.2, 1.0);
            o.force_bisection = rng.coin();
            const auto net = build_modified_geometry(rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0));
            try {
                solve_catchup_schedule(net, w, o);
            } catch (const Error& e) {
                rejected += e.kind() == ErrorKind::NoFeasibleSchedule;
            }
        }
        try {
            solve_catchup_schedule(build_renninger_geometry(1.0), WaveNumbers{});
        } catch (const Error& e) {
            rejected += e.kind() == ErrorKind::NoFeasibleSchedule;
        }
        r.require(rejected == 101, "infeasible inputs rejected");
        r.detail << "100 feasible, " << rejected << " infeasible rejected ";
    });

    criterion("unitarity", [](Result& r) {
        gen::Rng rng(2024);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) worst = std::max(worst, checks::ladder_norm_drift(rng));
        r.require(worst <= 1e-12, "norm drift <= 1e-12");
        r.detail << "max drift " << worst << " ";
    });

    criterion("zero-cell rule", [](Result& r) {
        const auto rep = run(builtin("modified"));
        r.require(rep.theoretical.at("D2") == 0.0, "theory assigns D2 zero");
        r.require(rep.counts.at("D2") == 0, "count(D2) = 0");
        r.require(rep.chi_square && rep.chi_square->zero_cells_ok, "zero cells empty");
        r.detail << "retained " << rep.retained << " D2 " << rep.counts.at("D2") << " ";
    });

    return failures == 0 ? 0 : 1;
}

// mzsim: run scenarios, solve catch-up schedules, validate scenario files and
// serve live steering sessions.

#include <pthread.h>

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mzsim/error.hpp"
#include "mzsim/scenarios.hpp"
#include "mzsim/steering_server.hpp"

namespace {

using namespace mzsim;
using json = nlohmann::json;

constexpr int kValidationFailure = 2;
constexpr int kInfeasible = 3;

Scenario load(const std::string& name_or_path) {
    const auto& names = builtin_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin(name_or_path);
    std::ifstream in(name_or_path);
    if (!in) throw Error(ErrorKind::UnknownScenario, name_or_path + " is neither a built-in nor a readable file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::NoFeasibleSchedule: return kInfeasible;
    case ErrorKind::ParseError:
    case ErrorKind::UnknownField:
    case ErrorKind::InvariantViolation:
    case ErrorKind::InvalidScenario:
    case ErrorKind::UnknownScenario:
    case ErrorKind::InvalidSchedule:
    case ErrorKind::UnknownTarget:
    case ErrorKind::NonPositiveInput:
    case ErrorKind::NonPositiveLength:
    case ErrorKind::InvalidNetwork: return kValidationFailure;
    default: return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mach-Zehnder empty-wave simulator"};
    app.require_subcommand(1);

    std::string scenario_arg;
    std::string engine_arg;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    double delta = 0.0;
    std::string format = "table";
    unsigned threads = 0;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario and print its report");
    run_cmd->add_option("--scenario", scenario_arg, "Built-in name or scenario file")->required();
    auto* engine_opt = run_cmd->add_option("--engine", engine_arg, "amplitude or pilot-wave")
                           ->check(CLI::IsMember({"amplitude", "pilot-wave", "pilot_wave"}));
    auto* trials_opt = run_cmd->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Random seed");
    auto* delta_opt = run_cmd->add_option("--delta", delta, "Disturbance phase in radians (enables it)");
    run_cmd->add_option("--format", format, "table or json")->check(CLI::IsMember({"table", "json"}));
    run_cmd->add_option("--threads", threads, "Worker threads (0: all cores)");

    double epsilon = 0.0;
    bool force_bisection = false;
    auto* solve_cmd = app.add_subcommand("solve-schedule", "Solve the catch-up schedule for a two-source geometry");
    solve_cmd->add_option("--scenario", scenario_arg, "Built-in name or scenario file")->required();
    auto* eps_opt = solve_cmd->add_option("--epsilon", epsilon, "Superposition window (fraction of the segment)");
    solve_cmd->add_flag("--bisection", force_bisection, "Use the numerical search instead of the closed form");

    bool canonical = false;
    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario and report the first problem");
    validate_cmd->add_option("--scenario", scenario_arg, "Built-in name or scenario file")->required();
    validate_cmd->add_flag("--canonical", canonical, "Print the canonical form on success");

    ServerOptions server_opts;
    auto* serve_cmd = app.add_subcommand("serve", "Serve live steering sessions");
    serve_cmd->add_option("--port", server_opts.port, "TCP port")->required();
    serve_cmd->add_option("--tick-ms", server_opts.tick_ms, "Frame period in milliseconds")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--host", server_opts.host, "Listen address");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            Scenario sc = load(scenario_arg);
            if (*engine_opt) sc.engine = *engine_from_string(engine_arg);
            if (*trials_opt) sc.n_trials = trials;
            if (*seed_opt) sc.seed = seed;
            if (*delta_opt) {
                sc.disturbance.enabled = true;
                sc.disturbance.delta = delta;
            }
            const auto report = run(sc, {threads, false});
            std::cout << (format == "json" ? report_to_json(report) : report_to_table(report));
            return 0;
        }
        if (*solve_cmd) {
            const Scenario sc = load(scenario_arg);
            WaveNumbers w;
            CatchupOptions opts;
            opts.epsilon = *eps_opt ? epsilon : sc.experiment.epsilon;
            opts.measured_system = sc.experiment.measured_system;
            opts.empty_waves_persist = sc.experiment.empty_waves_persist;
            opts.force_bisection = force_bisection;
            for (const auto& s : sc.experiment.systems) {
                if (s.id == opts.measured_system) {
                    w.v_s = s.speed, w.m_s = s.mass, w.k = s.wave_number;
                } else {
                    opts.ancilla_system = s.id;
                    w.v_s_prime = s.speed, w.m_s_prime = s.mass, w.k_prime = s.wave_number;
                }
            }
            const auto cs = solve_catchup_schedule(sc.experiment.network, w, opts);
            Scenario solved = sc;
            solved.experiment.schedule = cs.schedule;
            json out{{"method", cs.method},
                     {"mirror", cs.mirror},
                     {"removal_time", cs.removal_time},
                     {"measured_passes_mirror", cs.measured_passes_mirror},
                     {"ancilla_reaches_mirror", cs.ancilla_reaches_mirror},
                     {"measured_enters_recombiner", cs.measured_enters_recombiner},
                     {"final_segment", cs.final_segment},
                     {"gap", cs.gap},
                     {"window", opts.epsilon * cs.final_segment_length},
                     {"scenario", json::parse(serialize_scenario(solved))}};
            std::cout << out.dump(2) << "\n";
            return 0;
        }
        if (*validate_cmd) {
            const Scenario sc = load(scenario_arg);
            check_scenario(sc);
            if (canonical)
                std::cout << serialize_scenario(sc);
            else
                std::cout << json{{"valid", true}, {"name", sc.name}}.dump(2) << "\n";
            return 0;
        }
        if (*serve_cmd) {
            // Block the signals before any server thread exists, then wait for them here.
            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);
            SteeringServer server(server_opts);
            server.start();
            std::cerr << "listening on " << server_opts.host << ":" << server.port() << "\n";
            int sig = 0;
            sigwait(&signals, &sig);
            server.stop();
            return 0;
        }
    } catch (const Error& e) {
        const int code = exit_code_for(e);
        if (*validate_cmd)
            std::cout << json{{"valid", false}, {"kind", to_string(e.kind())}, {"message", e.what()}}.dump(2) << "\n";
        else
            std::cerr << "error: " << e.what() << "\n";
        return code;
    }
    return 0;
}

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mzsim/experiment.hpp"
#include "mzsim/pilot_wave_engine.hpp"
#include "mzsim/report.hpp"

namespace mzsim {

enum class Engine { Amplitude, PilotWave };

std::string_view to_string(Engine engine);
std::optional<Engine> engine_from_string(std::string_view s);  // accepts "pilot-wave" too

struct Scenario {
    std::string name;
    Experiment experiment;
    Engine engine = Engine::PilotWave;
    DisturbanceModel disturbance;
    std::size_t n_trials = 10000;
    std::uint64_t seed = 1;

    bool operator==(const Scenario&) const = default;
};

const std::vector<std::string>& builtin_names();

/// which_path, baseline, plate_once, plate_twice, modified. Throws UnknownScenario.
Scenario builtin(std::string_view name);

/// Modified two-source setup with the disturbance phase switched on.
Scenario modified_scenario(double delta, double arm_length = 1.0, double prime_arm_length = 1.0);

/// Throws InvariantViolation, UnknownField or InvalidSchedule on the first problem.
void check_scenario(const Scenario& scenario);

struct Theory {
    std::map<std::string, double> probabilities;  // conditional on the post-selection
    double weight = 1.0;                          // probability of the retained outcome
};

/// Amplitude-engine prediction for the element states the waves actually
/// meet under the scenario's schedule.
Theory theoretical_probabilities(const Scenario& scenario);

struct RunOptions {
    unsigned threads = 0;
    bool apply_illegal_events = false;
};

RunReport run(const Scenario& scenario, const RunOptions& options = {});

// ---- text formats ----

/// Canonical JSON document; byte-stable under parse/serialize.
std::string serialize_scenario(const Scenario& scenario);

/// Throws ParseError (with line and column), UnknownField (with the field
/// path) or InvariantViolation.
Scenario parse_scenario(std::string_view text);

std::string report_to_json(const RunReport& report);
std::string report_to_table(const RunReport& report);

} // namespace mzsim

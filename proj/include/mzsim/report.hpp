#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "mzsim/statistics.hpp"

namespace mzsim {

/// Aggregate of a batch of trials for the measured system.
struct RunReport {
    std::string scenario;
    std::string engine;
    std::uint64_t seed = 0;
    std::size_t n_trials = 0;
    std::size_t retained = 0;
    double retained_fraction = 0.0;
    std::map<std::string, std::size_t> counts;
    std::map<std::string, double> frequencies;
    std::map<std::string, Interval> intervals;     // exact binomial, 5 sigma
    std::map<std::string, double> theoretical;
    double theoretical_weight = 1.0;               // post-selection probability
    std::optional<ChiSquare> chi_square;
    std::size_t disturbed = 0;                     // retained trials carrying the disturbance phase
    std::string config;                            // canonical echo of the scenario

    bool operator==(const RunReport&) const = default;
};

/// Fills frequencies and intervals from counts and retained.
void finalize_counts(RunReport& report);

} // namespace mzsim

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>

namespace mzsim {

/// Two-sided tail probability of a normal deviate beyond `sigmas`.
double sigma_to_alpha(double sigmas);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    bool contains(double p) const { return lo <= p && p <= hi; }
    bool operator==(const Interval&) const = default;
};

/// Exact (Clopper-Pearson) binomial interval for k successes in n trials.
Interval clopper_pearson(std::size_t k, std::size_t n, double alpha);

/// True when p lies inside the exact binomial interval at the confidence of a
/// `sigmas` normal deviate.
bool within_exact_binomial(std::size_t k, std::size_t n, double p, double sigmas = 5.0);

struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    bool zero_cells_ok = true;  // every zero-probability cell has zero counts
    bool operator==(const ChiSquare&) const = default;
};

/// Probabilities at or below this are cancellation residue and count as zero.
constexpr double kZeroCell = 1e-12;

/// Pearson statistic over cells with positive expected probability; cells with
/// zero probability are checked for zero counts instead.
ChiSquare chi_square(const std::map<std::string, std::size_t>& counts,
                     const std::map<std::string, double>& probabilities, std::size_t n);

} // namespace mzsim

#include "mzsim/statistics.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <cmath>

namespace mzsim {

double sigma_to_alpha(double sigmas) { return std::erfc(sigmas / std::sqrt(2.0)); }

Interval clopper_pearson(std::size_t k, std::size_t n, double alpha) {
    using boost::math::binomial_distribution;
    if (n == 0) return {0.0, 1.0};
    const auto trials = static_cast<double>(n);
    const auto successes = static_cast<double>(k);
    const auto method = binomial_distribution<>::clopper_pearson_exact_interval;
    return {binomial_distribution<>::find_lower_bound_on_p(trials, successes, alpha / 2, method),
            binomial_distribution<>::find_upper_bound_on_p(trials, successes, alpha / 2, method)};
}

bool within_exact_binomial(std::size_t k, std::size_t n, double p, double sigmas) {
    return clopper_pearson(k, n, sigma_to_alpha(sigmas)).contains(p);
}

ChiSquare chi_square(const std::map<std::string, std::size_t>& counts,
                     const std::map<std::string, double>& probabilities, std::size_t n) {
    ChiSquare out;
    int cells = 0;
    for (const auto& [label, p] : probabilities) {
        auto it = counts.find(label);
        const double observed = it == counts.end() ? 0.0 : static_cast<double>(it->second);
        if (p > kZeroCell) {
            const double expected = p * static_cast<double>(n);
            out.statistic += (observed - expected) * (observed - expected) / expected;
            ++cells;
        } else if (observed > 0.0) {
            out.zero_cells_ok = false;
        }
    }
    out.dof = std::max(0, cells - 1);
    return out;
}

} // namespace mzsim

#include "mzsim/report.hpp"

namespace mzsim {

void finalize_counts(RunReport& report) {
    const double alpha = sigma_to_alpha(5.0);
    report.retained_fraction =
        report.n_trials ? static_cast<double>(report.retained) / static_cast<double>(report.n_trials) : 0.0;
    for (const auto& [label, k] : report.counts) {
        report.frequencies[label] =
            report.retained ? static_cast<double>(k) / static_cast<double>(report.retained) : 0.0;
        report.intervals[label] = clopper_pearson(k, report.retained, alpha);
    }
}

} // namespace mzsim

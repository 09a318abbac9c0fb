#include <catch_amalgamated.hpp>

#include <cmath>

#include "mzsim/report.hpp"
#include "mzsim/statistics.hpp"
#include "test_support.hpp"

using namespace mzsim;

namespace {

// P(lo <= X <= hi) for X ~ Bin(n, p), summed term by term in log space.
double binom_mass(std::size_t lo, std::size_t hi, std::size_t n, double p) {
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double lc = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
        sum += std::exp(lc + j * std::log(p) + (n - j) * std::log1p(-p));
    }
    return std::min(sum, 1.0);
}

// Solve f(p) = target for a monotone f by bisection.
template <class F>
double bisect(F f, double target, bool increasing) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        ((f(mid) < target) == increasing ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Interval cp_oracle(std::size_t k, std::size_t n, double alpha) {
    Interval out;
    out.lo = k == 0 ? 0.0 : bisect([&](double p) { return binom_mass(k, n, n, p); }, alpha / 2, true);
    out.hi = k == n ? 1.0 : bisect([&](double p) { return binom_mass(0, k, n, p); }, alpha / 2, false);
    return out;
}

} // namespace

TEST_CASE("five sigma tail probability") {
    CHECK(std::abs(sigma_to_alpha(5.0) - 5.733031437583878e-7) < 1e-18);
    CHECK(std::abs(sigma_to_alpha(1.0) - 0.31731050786291415) < 1e-15);
}

TEST_CASE("exact interval closed forms at the edges") {
    const double a = 0.05;
    const auto none = clopper_pearson(0, 10, a);
    CHECK(none.lo == 0.0);
    CHECK(std::abs(none.hi - (1 - std::pow(a / 2, 0.1))) < 1e-12);
    const auto all = clopper_pearson(10, 10, a);
    CHECK(all.hi == 1.0);
    CHECK(std::abs(all.lo - std::pow(a / 2, 0.1)) < 1e-12);
    CHECK(clopper_pearson(0, 0, a) == Interval{0.0, 1.0});
}

TEST_CASE("property: exact interval matches a summed binomial oracle", "[property]") {
    gen::Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        const auto n = static_cast<std::size_t>(rng.integer(1, 400));
        const auto k = static_cast<std::size_t>(rng.integer(0, static_cast<int>(n)));
        const double alpha = rng.coin() ? sigma_to_alpha(5.0) : rng.uniform(0.001, 0.3);
        const auto got = clopper_pearson(k, n, alpha);
        const auto want = cp_oracle(k, n, alpha);
        INFO("k " << k << " n " << n << " alpha " << alpha);
        CHECK(std::abs(got.lo - want.lo) < 1e-9);
        CHECK(std::abs(got.hi - want.hi) < 1e-9);
        CHECK(got.contains(static_cast<double>(k) / static_cast<double>(n)));
    }
}

TEST_CASE("binomial membership") {
    CHECK(within_exact_binomial(5000, 10000, 0.5));
    CHECK_FALSE(within_exact_binomial(5300, 10000, 0.5));
    CHECK(within_exact_binomial(0, 100000, 0.0));
    CHECK_FALSE(within_exact_binomial(1, 100000, 0.0));
}

TEST_CASE("chi-square over positive cells, zero cells must be empty") {
    const auto c = chi_square({{"a", 60}, {"b", 40}}, {{"a", 0.5}, {"b", 0.5}}, 100);
    CHECK(std::abs(c.statistic - 4.0) < 1e-12);
    CHECK(c.dof == 1);
    CHECK(c.zero_cells_ok);

    const auto zero = chi_square({{"a", 100}}, {{"a", 1.0}, {"b", 0.0}}, 100);
    CHECK(zero.statistic == 0.0);
    CHECK(zero.dof == 0);
    CHECK(zero.zero_cells_ok);

    const auto residue = chi_square({{"a", 100}, {"b", 0}}, {{"a", 1.0}, {"b", 4e-33}}, 100);
    CHECK(residue.dof == 0);
    CHECK(residue.zero_cells_ok);
    CHECK_FALSE(chi_square({{"a", 99}, {"b", 1}}, {{"a", 1.0}, {"b", 4e-33}}, 100).zero_cells_ok);

    const auto broken = chi_square({{"a", 99}, {"b", 1}}, {{"a", 1.0}, {"b", 0.0}}, 100);
    CHECK_FALSE(broken.zero_cells_ok);
    CHECK(std::isfinite(broken.statistic));
}

TEST_CASE("finalize_counts derives frequencies from retained trials") {
    RunReport r;
    r.n_trials = 200;
    r.retained = 100;
    r.counts = {{"D1", 75}, {"D2", 25}};
    finalize_counts(r);
    CHECK(r.retained_fraction == 0.5);
    CHECK(r.frequencies.at("D1") == 0.75);
    CHECK(r.intervals.at("D2") == clopper_pearson(25, 100, sigma_to_alpha(5.0)));

    RunReport empty;
    empty.n_trials = 10;
    empty.counts = {{"D1", 0}};
    finalize_counts(empty);
    CHECK(empty.frequencies.at("D1") == 0.0);
    CHECK(empty.intervals.at("D1") == Interval{0.0, 1.0});
}
